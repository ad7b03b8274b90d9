"""
Unit Tests for the densam CLI

Runs main() in-process against temporary files and checks exit codes, stdout JSON and manifests.
"""
import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stdout
from pathlib import Path
from unittest.mock import patch

import pytest

from densam.cli import EXIT_DOMAIN, EXIT_INPUT, EXIT_MISMATCH, EXIT_NO_CELLS, EXIT_OK, main
from densam.memory.emergence import classify_emergence


class CliTestCase(unittest.TestCase):
    """Temporary workspace with a two-pattern instance"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.patterns = self.write("patterns.csv", "0\n1\n")
        self.env = patch.dict(os.environ, {"LOG_LEVEL": "WARNING"}, clear=False)
        self.env.start()
        for name in ("DENSAM_THREADS", "DENSAM_MC_SAMPLES"):
            os.environ.pop(name, None)

    def tearDown(self):
        self.env.stop()
        self.tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return path

    def run_cli(self, *argv):
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            status = main([str(a) for a in argv])
        output = buffer.getvalue()
        return status, output


@pytest.mark.unit
class TestRetrieveCommand(CliTestCase):
    """Test densam retrieve"""

    def test_fixed_point(self):
        """Test that the fixed-point mode returns the midpoint memory"""
        query = self.write("q.csv", "0.4\n")
        status, output = self.run_cli("retrieve", "--patterns", self.patterns, "--query", query, "--beta", 2)
        assert status == EXIT_OK
        result = json.loads(output)["results"][0]
        assert result["point"] == [0.5]
        assert result["subset"] == [0, 1]
        assert result["converged"]

    def test_single_step(self):
        """Test single-step retrieval of an isolated pattern"""
        patterns = self.write("far.csv", "0\n10\n")
        query = self.write("q.csv", "0.1\n")
        status, output = self.run_cli(
            "retrieve", "--patterns", patterns, "--query", query, "--beta", 2, "--mode", "single"
        )
        assert status == EXIT_OK
        assert json.loads(output)["results"][0]["point"] == [0.0]

    def test_gradient_descent_to_file(self):
        """Test that --out writes results to a file instead of stdout"""
        query = self.write("q.csv", "0.2\n0.8\n")
        out = self.dir / "gd.json"
        argv = ["retrieve", "--patterns", self.patterns, "--query", query, "--beta", 2, "--mode", "gd"]
        status, output = self.run_cli(*argv, "--steps", 2000, "--lr", 0.05, "--out", out)
        assert status == EXIT_OK
        assert output == ""
        results = json.loads(out.read_text())["results"]
        assert len(results) == 2
        assert all(abs(r["point"][0] - 0.5) < 1e-6 for r in results)

    def test_unsupported_query(self):
        """Test that a query outside every support exits with the domain code"""
        query = self.write("q.csv", "0.5\n")
        status, _ = self.run_cli("retrieve", "--patterns", self.patterns, "--query", query, "--beta", 16)
        assert status == EXIT_DOMAIN

    def test_ambiguous_single_step(self):
        query = self.write("q.csv", "0.5\n")
        status, _ = self.run_cli(
            "retrieve", "--patterns", self.patterns, "--query", query, "--beta", 2, "--mode", "single"
        )
        assert status == EXIT_DOMAIN

    def test_malformed_patterns(self):
        """Test that a malformed pattern file exits with the input code"""
        bad = self.write("bad.csv", "0,1\nx\n")
        query = self.write("q.csv", "0.5\n")
        status, _ = self.run_cli("retrieve", "--patterns", bad, "--query", query, "--beta", 2)
        assert status == EXIT_INPUT

    def test_query_width_mismatch(self):
        """Test that a query of the wrong width is rejected"""
        query = self.write("q.csv", "0.5,0.5\n")
        status, _ = self.run_cli("retrieve", "--patterns", self.patterns, "--query", query, "--beta", 2)
        assert status == EXIT_INPUT

    def test_bad_beta(self):
        query = self.write("q.csv", "0.5\n")
        status, _ = self.run_cli("retrieve", "--patterns", self.patterns, "--query", query, "--beta", -1)
        assert status == EXIT_INPUT


@pytest.mark.unit
class TestEnumerateCommand(CliTestCase):
    """Test densam enumerate"""

    def test_two_pattern_emergence(self):
        """Test that enumerate reports the emergent midpoint"""
        status, output = self.run_cli("enumerate", "--patterns", self.patterns, "--beta", 2, "--oracle")
        assert status == EXIT_OK
        payload = json.loads(output)
        assert [m["subset"] for m in payload["memories"]] == [[0], [1], [0, 1]]
        assert payload["globally_emergent"]
        assert payload["memories"][2]["local_class"] == "strongly-emergent"

    def test_disjoint(self):
        status, output = self.run_cli("enumerate", "--patterns", self.patterns, "--beta", 16)
        assert status == EXIT_OK
        assert len(json.loads(output)["memories"]) == 2

    @patch("densam.cli.brute_force_minima", return_value=[])
    def test_oracle_mismatch(self, _):
        """Test that an oracle disagreement exits with the mismatch code"""
        status, output = self.run_cli("enumerate", "--patterns", self.patterns, "--beta", 2, "--oracle")
        assert status == EXIT_MISMATCH
        report = json.loads(output)
        assert report["only_pruned"] == [[0], [0, 1], [1]]
        assert report["only_exhaustive"] == []

    def test_workers_default_from_environment(self):
        """Test that --workers falls back to DENSAM_THREADS"""
        with patch.dict(os.environ, {"DENSAM_THREADS": "3"}):
            with patch("densam.cli.classify_emergence", wraps=classify_emergence) as classify:
                status, _ = self.run_cli("enumerate", "--patterns", self.patterns, "--beta", 2)
        assert status == EXIT_OK
        assert classify.call_args.kwargs["workers"] == 3

    def test_explicit_workers_win(self):
        with patch.dict(os.environ, {"DENSAM_THREADS": "3"}):
            with patch("densam.cli.classify_emergence", wraps=classify_emergence) as classify:
                self.run_cli("enumerate", "--patterns", self.patterns, "--beta", 2, "--workers", 2)
        assert classify.call_args.kwargs["workers"] == 2

    def test_neighborhood_blowup(self):
        patterns = self.write("many.csv", "\n".join(str(i / 100) for i in range(12)) + "\n")
        status, _ = self.run_cli("enumerate", "--patterns", patterns, "--beta", 2, "--subset-cap", 8)
        assert status == EXIT_DOMAIN


@pytest.mark.unit
class TestOtherCommands(CliTestCase):
    """Test beta-search, kernels and support-fraction"""

    def test_beta_search(self):
        """Test that beta-search reaches full interaction on a line"""
        patterns = self.write("line.csv", "0\n1\n2\n")
        status, output = self.run_cli("beta-search", "--patterns", patterns, "--target-k", 3)
        assert status == EXIT_OK
        payload = json.loads(output)
        assert payload["mean_interactions"] == 3.0
        assert payload["beta"] == pytest.approx(2.0 / payload["radius"] ** 2)

    def test_kernels(self):
        """Test that the kernel table is printed and written"""
        out = self.dir / "kernels.csv"
        status, output = self.run_cli("kernels", "--out", out)
        assert status == EXIT_OK
        assert "epanechnikov" in output
        assert "1.000000" in output
        assert out.read_text().startswith("kernel,mu_k,sigma_k,efficiency,compact")

    def test_support_fraction(self):
        """Test the support fraction of a single ball"""
        patterns = self.write("center.csv", "0.5\n")
        status, output = self.run_cli("support-fraction", "--patterns", patterns, "--beta", 200, "--samples", 200000)
        assert status == EXIT_OK
        payload = json.loads(output)
        assert payload["fraction"] == pytest.approx(0.2, abs=0.005)
        assert payload["n_samples"] == 200000

    def test_manifest_written_last(self):
        """Test that the manifest records the command and output hashes"""
        manifest = self.dir / "run" / "manifest.json"
        out = self.dir / "kernels.csv"
        status, _ = self.run_cli("--manifest", manifest, "kernels", "--out", out)
        assert status == EXIT_OK
        payload = json.loads(manifest.read_text())
        assert payload["command"] == "kernels"
        assert payload["exit_status"] == 0
        assert payload["outputs"][0]["path"] == str(out)
        assert len(payload["outputs"][0]["sha1"]) == 40

    def test_manifest_records_failures(self):
        manifest = self.dir / "manifest.json"
        query = self.write("q.csv", "0.5\n")
        status, _ = self.run_cli(
            "--manifest", manifest, "retrieve", "--patterns", self.patterns, "--query", query, "--beta", 16
        )
        assert status == EXIT_DOMAIN
        assert json.loads(manifest.read_text())["exit_status"] == EXIT_DOMAIN

    def test_invalid_environment(self):
        """Test that a bad DENSAM_THREADS exits with the input code"""
        with patch.dict(os.environ, {"DENSAM_THREADS": "many"}):
            status, _ = self.run_cli("kernels")
        assert status == EXIT_INPUT


@pytest.mark.unit
class TestSweepCommand(CliTestCase):
    """Test densam sweep"""

    def sweep_config(self, **overrides):
        config = {
            "experiment": "kernel_sweep",
            "kernels": ["epanechnikov", "triangle"],
            "ladder": {"count": 3},
            "scan_points": 401,
            "output_dir": str(self.dir / "results"),
        }
        config.update(overrides)
        return self.write("sweep.json", json.dumps(config))

    def test_kernel_sweep_outputs(self):
        """Test that a kernel sweep writes its CSV, report and manifest"""
        status, _ = self.run_cli("sweep", "--config", self.sweep_config())
        assert status == EXIT_OK
        results = self.dir / "results"
        assert (results / "kernel_sweep.csv").exists()
        assert (results / "kernel_sweep_report.txt").exists()
        manifest = json.loads((results / "manifest.json").read_text())
        assert manifest["config"]["experiment"] == "kernel_sweep"
        assert {Path(o["path"]).name for o in manifest["outputs"]} >= {"kernel_sweep.csv", "kernel_sweep.json"}

    def test_rerun_is_byte_identical(self):
        """Test that rerunning a sweep reproduces the CSV byte for byte"""
        config = self.sweep_config()
        self.run_cli("sweep", "--config", config)
        first = (self.dir / "results" / "kernel_sweep.csv").read_bytes()
        self.run_cli("sweep", "--config", config)
        assert (self.dir / "results" / "kernel_sweep.csv").read_bytes() == first

    def test_empty_ladder(self):
        """Test that a sweep without cells exits with the no-cells code"""
        config = self.sweep_config(
            experiment="minima_scaling",
            generator={"kind": "uniform", "m": 5, "d": 2},
            ladder={"count": 0},
        )
        status, _ = self.run_cli("sweep", "--config", config)
        assert status == EXIT_NO_CELLS
        manifest = json.loads((self.dir / "results" / "manifest.json").read_text())
        assert manifest["exit_status"] == EXIT_NO_CELLS

    def test_invalid_config(self):
        """Test that an unknown experiment is rejected"""
        config = self.write("bad.json", json.dumps({"experiment": "hopfield_capacity"}))
        status, _ = self.run_cli("sweep", "--config", config)
        assert status == EXIT_INPUT

    def test_missing_config(self):
        status, _ = self.run_cli("sweep", "--config", self.dir / "absent.json")
        assert status == EXIT_INPUT


if __name__ == "__main__":
    unittest.main()
