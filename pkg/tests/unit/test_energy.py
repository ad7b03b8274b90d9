"""
Unit Tests for Energies

LSR and LSE energies, gradients, active sets and the Hessian scalar.
"""
import math
import unittest

import numpy as np
import pytest

from densam.memory.energy import (
    EnergySpec,
    active_set,
    energy,
    energy_batch,
    gradient,
    gradient_batch,
    lse_energy,
    lse_gradient,
    lse_weights,
    lsr_energy,
    lsr_gradient,
    lsr_gradient_state,
    lsr_hessian_scalar,
    support_mask,
)
from densam.memory.errors import InvalidParameterError
from densam.memory.patterns import PatternSet, critical_beta_range, generate_uniform

TWO = PatternSet([0.0, 1.0])
COMPACT_SMOOTH = ("epanechnikov", "quartic", "triweight", "tricube", "cosine")


def numeric_gradient(x, patterns, spec, h):
    """Five-point central differences of the energy, one coordinate at a time"""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        values = [energy(x + k * step, patterns, spec) for k in (-2, -1, 1, 2)]
        grad[i] = (values[0] - 8 * values[1] + 8 * values[2] - values[3]) / (12 * h)
    return grad


def random_instance(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.choice([5, 12, 30]))
    d = int(rng.choice([2, 3, 8]))
    return rng, generate_uniform(m, d, seed=seed)


def interior_points(rng, patterns, spec, count):
    """Points inside some support, clear of every support boundary and pattern, with total weight >= 0.05"""
    radius = spec.radius
    points = []
    while len(points) < count:
        direction = rng.standard_normal(patterns.d)
        x = patterns.data[rng.integers(patterns.m)] + radius * rng.random() * direction / np.linalg.norm(direction)
        dist = np.sqrt(patterns.squared_distances(x))
        if np.any(np.abs(dist - radius) <= 1e-3 * radius) or np.any(dist <= 1e-3 * radius):
            continue
        value = energy(x, patterns, spec)
        if math.isfinite(value) and math.exp(-spec.beta * value) >= 0.05:
            points.append(x)
    return points


@pytest.mark.unit
class TestEnergySpec(unittest.TestCase):
    """Test EnergySpec validation"""

    def test_kernel_name_is_parsed(self):
        """Test that kernel names are parsed case-insensitively"""
        spec = EnergySpec(kernel="Gaussian", beta=1.0)
        assert spec.kernel.value == "gaussian"
        assert spec.radius == math.inf

    def test_rejects_bad_beta_and_epsilon(self):
        """Test that non-positive beta and negative epsilon are rejected"""
        with self.assertRaises(InvalidParameterError):
            EnergySpec(beta=0.0)
        with self.assertRaises(InvalidParameterError):
            EnergySpec(beta=-1.0)
        with self.assertRaises(InvalidParameterError):
            EnergySpec(beta=1.0, epsilon=-0.1)

    def test_with_beta(self):
        """Test that with_beta keeps epsilon and rescales the radius"""
        spec = EnergySpec(beta=2.0, epsilon=0.1).with_beta(8.0)
        assert spec.beta == 8.0
        assert spec.epsilon == 0.1
        assert spec.radius == pytest.approx(0.5)


@pytest.mark.unit
class TestActiveSet(unittest.TestCase):
    """Test active_set"""

    def test_midpoint(self):
        assert active_set([0.5], TWO, EnergySpec(beta=2.0)).indices == (0, 1)

    def test_boundary_is_excluded(self):
        """Test that a pattern exactly on the support boundary is inactive"""
        assert active_set([0.0], TWO, EnergySpec(beta=2.0)).indices == (0,)

    def test_far_point(self):
        """Test that a far point has an empty active set"""
        assert len(active_set([5.0], TWO, EnergySpec(beta=50.0))) == 0

    def test_gaussian_activates_everything(self):
        """Test that every pattern is active under the Gaussian kernel"""
        assert active_set([9.0], TWO, EnergySpec(kernel="gaussian", beta=50.0)).indices == (0, 1)

    def test_query_shape_checked(self):
        with self.assertRaises(InvalidParameterError):
            active_set([0.5, 0.5], TWO, EnergySpec(beta=2.0))


@pytest.mark.unit
class TestLSREnergy(unittest.TestCase):
    """Test lsr_energy and its gradient"""

    def test_isolated_pattern_has_zero_energy(self):
        """Test that an isolated stored pattern has zero energy"""
        assert lsr_energy([0.0], TWO, EnergySpec(beta=16.0)) == 0.0

    def test_midpoint_value(self):
        assert lsr_energy([0.5], TWO, EnergySpec(beta=2.0)) == pytest.approx(-0.5 * math.log(1.5))

    def test_unsupported_is_infinite(self):
        """Test that the energy is infinite outside every support without epsilon"""
        assert lsr_energy([0.5], TWO, EnergySpec(beta=16.0)) == math.inf

    def test_epsilon_floor(self):
        """Test that epsilon caps the energy outside every support"""
        spec = EnergySpec(beta=16.0, epsilon=0.25)
        assert lsr_energy([0.5], TWO, spec) == pytest.approx(-math.log(0.25) / 16.0)

    def test_gradient_examples(self):
        """Test the gradient at a few hand-computed points"""
        spec = EnergySpec(beta=2.0)
        assert lsr_gradient([0.5], TWO, spec)[0] == 0.0
        assert lsr_gradient([0.4], TWO, spec)[0] == pytest.approx(-0.2 / 1.48)
        np.testing.assert_array_equal(lsr_gradient([0.0], TWO, EnergySpec(beta=16.0)), [0.0])

    def test_unsupported_gradient_flag(self):
        """Test that an unsupported point reports a zero, unsupported gradient"""
        state = lsr_gradient_state([0.5], TWO, EnergySpec(beta=16.0))
        assert not state.supported
        assert state.active == ()
        np.testing.assert_array_equal(state.vector, [0.0])

    def test_epsilon_keeps_far_points_supported(self):
        state = lsr_gradient_state([0.5], TWO, EnergySpec(beta=16.0, epsilon=0.1))
        assert state.supported
        assert state.active == ()

    def test_lsr_rejects_gaussian(self):
        """Test that the LSR energy refuses the Gaussian kernel"""
        with self.assertRaises(InvalidParameterError):
            lsr_energy([0.5], TWO, EnergySpec(kernel="gaussian", beta=2.0))


@pytest.mark.unit
class TestLSEEnergy(unittest.TestCase):
    """Test lse_energy and its gradient"""

    def setUp(self):
        self.spec = EnergySpec(kernel="gaussian", beta=2.0)

    def test_single_pattern(self):
        """Test the LSE energy and gradient of a single pattern"""
        single = PatternSet([0.3])
        assert lse_energy([0.3], single, self.spec) == pytest.approx(0.0, abs=1e-15)
        assert lse_gradient([1.0], single, self.spec)[0] == pytest.approx(0.7)

    def test_midpoint_value(self):
        expected = -0.5 * math.log(2 * math.exp(-0.25))
        assert lse_energy([0.5], TWO, self.spec) == pytest.approx(expected)

    def test_midpoint_gradient_is_zero(self):
        assert lse_gradient([0.5], TWO, self.spec)[0] == pytest.approx(0.0, abs=1e-15)

    def test_stored_pattern_is_not_stationary(self):
        """Test that LSE moves away from a stored pattern"""
        patterns = PatternSet([[1.0, 0.0], [0.0, 1.0]])
        assert np.linalg.norm(lse_gradient([1.0, 0.0], patterns, self.spec)) > 0.0

    def test_weights_sum_to_one(self):
        """Test that the softmax weights sum to 1 for small and huge beta"""
        patterns = generate_uniform(30, 4, seed=2)
        points = np.random.default_rng(3).uniform(-1.0, 2.0, size=(200, 4))
        for beta in (0.5, 2.0, 50.0, 1e4):
            spec = EnergySpec(kernel="gaussian", beta=beta)
            for x in points:
                weights = lse_weights(x, patterns, spec)
                assert np.all(weights >= 0.0)
                assert abs(weights.sum() - 1.0) <= 1e-12

    def test_large_beta_does_not_overflow(self):
        """Test that a huge beta stays finite"""
        spec = EnergySpec(kernel="gaussian", beta=1e6)
        value = lse_energy([5.0], TWO, spec)
        assert math.isfinite(value)
        assert value == pytest.approx(8.0, rel=1e-6)


@pytest.mark.unit
class TestGradientConsistency:
    """Test analytic gradients against finite differences, 1000 points per energy"""

    @pytest.mark.parametrize("kernel", COMPACT_SMOOTH)
    @pytest.mark.parametrize("seed", range(10))
    def test_lsr_gradient(self, kernel, seed):
        """Test that the LSR gradient matches finite differences inside the support"""
        rng, patterns = random_instance(seed)
        low, high = critical_beta_range(patterns)
        beta = float(np.exp(rng.uniform(np.log(low), np.log(high))))
        spec = EnergySpec(kernel=kernel, beta=beta, epsilon=0.0 if seed % 2 else 1e-3)
        h = 1e-4 * spec.radius
        for x in interior_points(rng, patterns, spec, 100):
            analytic = gradient(x, patterns, spec)
            error = np.linalg.norm(analytic - numeric_gradient(x, patterns, spec, h))
            assert error <= 1e-5 * np.linalg.norm(analytic) + 1e-9, (kernel, beta, x)

    @pytest.mark.parametrize("seed", range(10))
    def test_lse_gradient(self, seed):
        """Test that the LSE gradient matches finite differences"""
        rng, patterns = random_instance(seed)
        spec = EnergySpec(kernel="gaussian", beta=float(np.exp(rng.uniform(np.log(0.5), np.log(10.0)))))
        h = 1e-3 / math.sqrt(spec.beta)
        for x in rng.uniform(-0.25, 1.25, size=(100, patterns.d)):
            analytic = gradient(x, patterns, spec)
            error = np.linalg.norm(analytic - numeric_gradient(x, patterns, spec, h))
            assert error <= 1e-7 * np.linalg.norm(analytic) + 1e-9, (spec.beta, x)


@pytest.mark.unit
class TestHessianScalar(unittest.TestCase):
    """Test lsr_hessian_scalar"""

    def test_isolated_pattern(self):
        assert lsr_hessian_scalar([0.0], TWO, EnergySpec(beta=16.0)) == pytest.approx(1.0)

    def test_midpoint(self):
        assert lsr_hessian_scalar([0.5], TWO, EnergySpec(beta=2.0)) == pytest.approx(2 / 1.5)

    def test_empty_active_set(self):
        """Test that the Hessian scalar needs an active pattern"""
        with self.assertRaises(InvalidParameterError):
            lsr_hessian_scalar([0.5], TWO, EnergySpec(beta=16.0))


@pytest.mark.unit
class TestBatchEvaluation(unittest.TestCase):
    """Test the vectorized energy and gradient"""

    def test_batch_matches_pointwise(self):
        """Test that batched energies and gradients match the pointwise ones"""
        patterns = generate_uniform(10, 3, seed=12)
        points = np.random.default_rng(1).random((20, 3))
        for kernel in ("epanechnikov", "gaussian", "quartic"):
            spec = EnergySpec(kernel=kernel, beta=6.0)
            energies = energy_batch(points, patterns, spec)
            grads, supported = gradient_batch(points, patterns, spec)
            for i, x in enumerate(points):
                expected = energy(x, patterns, spec)
                if math.isinf(expected):
                    assert math.isinf(energies[i])
                    assert not supported[i]
                    continue
                assert energies[i] == pytest.approx(expected, rel=1e-12)
                np.testing.assert_allclose(grads[i], gradient(x, patterns, spec), rtol=1e-9, atol=1e-12)

    def test_support_mask(self):
        mask = support_mask(np.array([[0.5], [0.05], [3.0]]), TWO, EnergySpec(beta=16.0))
        np.testing.assert_array_equal(mask, [False, True, False])


if __name__ == "__main__":
    unittest.main()
