"""
Unit Tests for Kernels

Kernel shapes, separation weights, support radii and the moment table.
"""
import math
import unittest

import numpy as np
import pytest

from densam.memory.errors import InvalidParameterError
from densam.memory.kernels import (
    KernelId,
    KernelMoments,
    kernel_moments,
    kernel_shape,
    kernel_shape_derivative,
    kernel_table,
    optimal_bandwidth,
    optimal_mise,
    parse_kernel,
    separation_profile,
    separation_weight,
    support_radius,
)


@pytest.mark.unit
class TestKernelShapes(unittest.TestCase):
    """Test kernel_shape and separation_weight"""

    def test_epanechnikov_peak_and_boundary(self):
        """Test the Epanechnikov shape at its peak and edge"""
        assert kernel_shape(KernelId.EPANECHNIKOV, 0.0) == 1.0
        assert kernel_shape(KernelId.EPANECHNIKOV, 1.0) == 0.0
        assert kernel_shape(KernelId.EPANECHNIKOV, 0.5) == pytest.approx(0.75)

    def test_triangle_half(self):
        assert kernel_shape("triangle", 0.5) == pytest.approx(0.5)

    def test_compact_kernels_vanish_outside(self):
        """Test that compact kernels are zero outside the unit interval"""
        u = np.array([1.0, 1.5, -2.0])
        for kernel in KernelId:
            if kernel.compact:
                np.testing.assert_array_equal(kernel_shape(kernel, u), np.zeros(3))

    def test_gaussian_shape(self):
        """Test the Gaussian shape against its closed form"""
        assert kernel_shape("gaussian", 1.0) == pytest.approx(math.exp(-0.5))

    def test_array_in_array_out(self):
        """Test that arrays map to arrays of the same shape"""
        values = kernel_shape("quartic", np.array([0.0, 0.5]))
        assert isinstance(values, np.ndarray)
        np.testing.assert_allclose(values, [1.0, 0.75**2])

    def test_separation_weight_examples(self):
        """Test separation weights at hand-computed distances"""
        assert separation_weight("epanechnikov", 2, 0.25) == pytest.approx(0.75)
        assert separation_weight("epanechnikov", 2, 1.0) == 0.0
        assert separation_weight("gaussian", 2, 0.0) == 1.0

    def test_separation_weight_rejects_bad_beta(self):
        """Test that separation weights need a finite positive beta"""
        with self.assertRaises(InvalidParameterError):
            separation_weight("epanechnikov", 0.0, 1.0)
        with self.assertRaises(InvalidParameterError):
            separation_weight("epanechnikov", math.inf, 1.0)

    def test_derivative_matches_finite_difference(self):
        """Test that profile derivatives match central differences"""
        h = 1e-6
        for kernel in ("epanechnikov", "gaussian", "triweight", "quartic", "tricube", "cosine", "triangle"):
            for t in (0.1, 0.3, 0.7):
                numeric = (separation_profile(kernel, t + h) - separation_profile(kernel, t - h)) / (2 * h)
                assert kernel_shape_derivative(kernel, t) == pytest.approx(numeric, rel=1e-5, abs=1e-7), kernel

    def test_derivative_zero_outside_support(self):
        for kernel in KernelId:
            if kernel.compact:
                assert kernel_shape_derivative(kernel, 1.2) == 0.0


@pytest.mark.unit
class TestKernelParsing(unittest.TestCase):
    """Test parse_kernel"""

    def test_case_insensitive(self):
        assert parse_kernel(" Epanechnikov ") is KernelId.EPANECHNIKOV
        assert parse_kernel(KernelId.COSINE) is KernelId.COSINE

    def test_unknown_kernel(self):
        """Test that an unknown kernel name raises"""
        with self.assertRaises(InvalidParameterError) as ctx:
            parse_kernel("boxcar")
        assert "epanechnikov" in str(ctx.exception)


@pytest.mark.unit
class TestSupportRadius(unittest.TestCase):
    """Test support_radius"""

    def test_examples(self):
        assert support_radius("epanechnikov", 2) == pytest.approx(1.0)
        assert support_radius("epanechnikov", 200) == pytest.approx(0.1)
        assert support_radius("gaussian", 3.0) == math.inf

    def test_every_compact_kernel_shares_radius(self):
        """Test that all compact kernels share the radius sqrt(2/beta)"""
        for kernel in KernelId:
            if kernel.compact:
                assert support_radius(kernel, 8.0) == pytest.approx(0.5)


@pytest.mark.unit
class TestKernelMoments(unittest.TestCase):
    """Test kernel_moments and the efficiency table"""

    def test_epanechnikov_reference(self):
        """Test the Epanechnikov roughness against its closed form"""
        moments = kernel_moments("epanechnikov")
        assert moments.efficiency == pytest.approx(1.0, abs=1e-6)
        # unit-variance Epanechnikov: integral of K^2 = 3 / (5 sqrt 5)
        assert moments.sigma_k == pytest.approx(3 / (5 * math.sqrt(5)), rel=1e-8)

    def test_published_efficiencies(self):
        """Test the Gaussian and uniform efficiencies"""
        assert kernel_moments("gaussian").efficiency == pytest.approx(0.951, abs=5e-4)
        assert kernel_moments("uniform").efficiency == pytest.approx(0.929, abs=5e-4)

    def test_normalization(self):
        """Test that every rescaled kernel has unit mass and unit second moment to 1e-8"""
        for kernel in KernelId:
            moments = kernel_moments(kernel)
            assert moments.mass == pytest.approx(1.0, abs=1e-8), kernel
            assert moments.mu_k == pytest.approx(1.0, abs=1e-8), kernel
            assert 0.0 < moments.efficiency <= 1.0 + 1e-9, kernel

    def test_optimal_bandwidth_unit_factors(self):
        unit = KernelMoments(kernel=KernelId.EPANECHNIKOV, mu_k=1.0, sigma_k=1.0, efficiency=1.0, mass=1.0)
        assert optimal_bandwidth(unit, 4, 1.0) == pytest.approx(1.0)

    def test_optimal_bandwidth_gaussian_closed_form(self):
        """Test the MISE-optimal bandwidth for the Gaussian kernel"""
        moments = kernel_moments("gaussian")
        expected = (4 * moments.sigma_k / (100 * moments.mu_k**2)) ** 0.2
        assert optimal_bandwidth("gaussian", 100, 1.0) == pytest.approx(expected)

    def test_optimal_bandwidth_rejects_bad_arguments(self):
        """Test that bandwidth inputs are validated"""
        with self.assertRaises(InvalidParameterError):
            optimal_bandwidth("gaussian", 0, 1.0)
        with self.assertRaises(InvalidParameterError):
            optimal_mise("gaussian", 10, 0.0)

    def test_mise_decreases_with_samples(self):
        """Test that the optimal MISE shrinks with more samples"""
        assert optimal_mise("epanechnikov", 1000, 1.0) < optimal_mise("epanechnikov", 100, 1.0)

    def test_table(self):
        """Test that the kernel table lists every kernel with Epanechnikov first in efficiency"""
        table = kernel_table()
        assert len(table) == len(KernelId)
        assert table.iloc[0]["kernel"] == "epanechnikov"
        assert list(table.columns) == ["kernel", "mu_k", "sigma_k", "efficiency", "compact"]
        assert table["efficiency"].is_monotonic_decreasing


if __name__ == "__main__":
    unittest.main()
