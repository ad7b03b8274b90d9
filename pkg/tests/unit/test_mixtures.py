"""
Unit Tests for Gaussian Mixtures
"""
import math
import unittest

import numpy as np
import pytest

from densam.experiments.mixtures import GaussianMixture, gmm_logpdf
from densam.memory.errors import InvalidParameterError


@pytest.mark.unit
class TestGaussianMixture(unittest.TestCase):
    """Test GaussianMixture sampling and densities"""

    def test_single_component_peak(self):
        """Test the log density at the mean of a single component"""
        mix = GaussianMixture(means=[[0.0]], sigma=0.1)
        assert gmm_logpdf(0.0, mix) == pytest.approx(-0.5 * math.log(2 * math.pi * 0.01))
        assert gmm_logpdf(0.0, mix) == pytest.approx(1.3836, abs=1e-4)

    def test_matches_direct_sum(self):
        """Test that the log density matches a direct sum over components"""
        mix = GaussianMixture.random(4, 3, sigma=0.2, seed=1)
        x = np.array([0.4, 0.5, 0.6])
        densities = [
            math.exp(-float(np.sum((x - mu) ** 2)) / (2 * 0.04)) / (2 * math.pi * 0.04) ** 1.5 for mu in mix.means
        ]
        assert gmm_logpdf(x, mix) == pytest.approx(math.log(np.mean(densities)), rel=1e-10)

    def test_permutation_invariant(self):
        """Test that component order does not matter"""
        mix = GaussianMixture.random(5, 2, seed=3)
        flipped = GaussianMixture(means=mix.means[::-1], sigma=mix.sigma)
        points = np.random.default_rng(0).random((10, 2))
        np.testing.assert_allclose(mix.logpdf(points), flipped.logpdf(points), rtol=1e-12)

    def test_far_point_is_finite(self):
        """Test that far points keep a finite log density"""
        mix = GaussianMixture(means=[[0.0, 0.0]], sigma=0.01)
        assert math.isfinite(gmm_logpdf([50.0, 50.0], mix))

    def test_peak_bound_for_separated_means(self):
        mix = GaussianMixture(means=[[0.0], [10.0]], sigma=0.1)
        peak = -0.5 * math.log(2 * math.pi * 0.01)
        assert gmm_logpdf(10.0, mix) >= math.log(0.5) + peak - 1e-9

    def test_sampling_is_reproducible(self):
        """Test that the same seed draws the same samples"""
        mix = GaussianMixture.random(3, 2, seed=9)
        a = mix.sample(100, np.random.Generator(np.random.PCG64(4)))
        b = mix.sample(100, np.random.Generator(np.random.PCG64(4)))
        np.testing.assert_array_equal(a, b)
        assert a.shape == (100, 2)

    def test_random_means_in_unit_cube(self):
        """Test that random means lie in the unit cube"""
        mix = GaussianMixture.random(10, 8, seed=2)
        assert mix.k == 10
        assert mix.d == 8
        assert np.all((mix.means >= 0) & (mix.means <= 1))

    def test_invalid_parameters(self):
        """Test that zero components and non-positive sigma are rejected"""
        with self.assertRaises(InvalidParameterError):
            GaussianMixture(means=[[0.0]], sigma=0.0)
        with self.assertRaises(InvalidParameterError):
            GaussianMixture.random(0, 2)


if __name__ == "__main__":
    unittest.main()
