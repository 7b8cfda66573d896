import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg, special

from conftest import CASE1, mixtures
from mixbayes.core import AtomicMixture, Dataset, point_mass, sample
from mixbayes.metrics import wasserstein
from mixbayes.moments import (
    DenoisedEstimate,
    MomentFitWarning,
    MomentVector,
    batch_count,
    denoised_batch_moments,
    fit_mixture_from_moments,
    hermite,
    median_denoised_estimator,
    moment_vector,
)


def he_per_sample(x, r):
    return np.array([hermite(h, x) for h in range(1, r + 1)])


class TestMomentVector:
    def test_examples(self):
        assert np.allclose(moment_vector(AtomicMixture([-1.0, 1.0], [0.5, 0.5]), 3).values, [0, 1, 0])
        assert np.allclose(moment_vector(point_mass(2.0), 2).values, [2, 4])
        assert np.allclose(moment_vector(CASE1, 2).values, [0, 5])

    def test_json_shape(self):
        mv = moment_vector(CASE1, 3)
        d = mv.to_dict()
        assert d["order"] == 3 and len(d["values"]) == 3
        assert np.array_equal(MomentVector.from_dict(d).values, mv.values)
        with pytest.raises(ValueError):
            MomentVector.from_dict({"order": 2, "values": [1.0, 2.0, 3.0]})

    @given(mixtures())
    def test_bounded_by_powers_of_L(self, nu):
        m = moment_vector(nu, 8).values
        assert all(abs(m[h - 1]) <= 6.0 ** h * (1 + 1e-12) for h in range(1, 9))

    @given(mixtures(), st.integers(1, 4))
    def test_hankel_psd(self, nu, s):
        m = np.concatenate(([1.0], moment_vector(nu, 2 * s).values))
        h = linalg.hankel(m[: s + 1], m[s:])
        scale = np.max(np.abs(m))
        assert np.min(linalg.eigvalsh(h)) >= -1e-8 * scale

    @given(mixtures(), mixtures(), st.integers(1, 6))
    def test_lipschitz_in_w1(self, a, b, h):
        ma, mb = moment_vector(a, h).values[-1], moment_vector(b, h).values[-1]
        assert abs(ma - mb) <= h * 6.0 ** (h - 1) * wasserstein(a, b, 1) + 1e-9 * 6.0 ** h


class TestHermite:
    def test_base_cases(self):
        assert hermite(0, 3.7) == 1.0
        assert hermite(1, 3.7) == 3.7

    def test_examples(self):
        assert hermite(2, 3.0) == pytest.approx(8.0)
        assert hermite(3, 2.0) == pytest.approx(2.0)

    def test_against_scipy(self):
        x = np.linspace(-4, 4, 17)
        for h in range(13):
            assert np.allclose(hermite(h, x), special.eval_hermitenorm(h, x), rtol=1e-10, atol=1e-10)

    def test_order_guard(self):
        with pytest.raises(ValueError):
            hermite(41, 1.0)
        with pytest.raises(ValueError):
            hermite(-1, 1.0)

    @given(st.integers(1, 11), st.floats(-8, 8))
    def test_recurrence(self, h, x):
        lhs = hermite(h + 1, x)
        rhs = x * hermite(h, x) - h * hermite(h - 1, x)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestDenoising:
    def test_single_point(self):
        assert np.allclose(denoised_batch_moments([1.7], 2), [1.7, 1.7 ** 2 - 1])

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            denoised_batch_moments([], 2)

    def test_standard_normal_has_zero_moments(self):
        x = np.random.default_rng(1).standard_normal(1_000_000)
        est = denoised_batch_moments(x, 5)
        se = he_per_sample(x, 5).std(axis=1) / math.sqrt(x.size)
        assert np.all(np.abs(est) < 5 * se)

    def test_case1_second_moment(self):
        x = sample(CASE1, 1_000_000, 2).observations
        est = denoised_batch_moments(x, 2)
        se = he_per_sample(x, 2).std(axis=1) / math.sqrt(x.size)
        assert np.all(np.abs(est - [0.0, 5.0]) < 5 * se)

    def test_is_mean_of_hermite_values(self, rng):
        x = rng.normal(size=50)
        assert np.allclose(denoised_batch_moments(x, 6), he_per_sample(x, 6).mean(axis=1), rtol=1e-9, atol=1e-9)


class TestMedianEstimator:
    def test_batch_count(self):
        assert batch_count(1000, 2, 0.001) == math.floor(math.log(4000))
        assert batch_count(3, 2, 1e-6) == 3
        # clamped to one batch when log(2k/eta) < 1
        assert batch_count(100, 1, 0.9) == 1

    def test_single_batch_is_full_sample(self, rng):
        x = rng.normal(size=200)
        est = median_denoised_estimator(x, 2, eta=0.9)
        assert est.batches == 1
        assert np.allclose(est.values, denoised_batch_moments(x, 3))

    def test_single_batch_is_permutation_invariant(self, rng):
        x = rng.normal(size=200)
        a = median_denoised_estimator(x, 2, eta=0.9).values
        b = median_denoised_estimator(rng.permutation(x), 2, eta=0.9).values
        assert np.allclose(a, b, rtol=1e-12)

    def test_median_of_three_batches(self):
        # three single-point batches with first moments 1, 2, 10
        est = median_denoised_estimator([1.0, 2.0, 10.0], 1, eta=2 / math.e ** 3.5)
        assert est.batches == 3
        assert est.values[0] == 2.0

    def test_lower_median_for_even_batches(self):
        est = median_denoised_estimator([4.0, 1.0, 3.0, 2.0], 1, eta=2 / math.e ** 4.5)
        assert est.batches == 4
        assert est.values[0] == 2.0

    def test_uneven_batches(self):
        # 5 points in 3 batches: sizes 2, 2, 1
        est = median_denoised_estimator([0.0, 2.0, 10.0, 12.0, 100.0], 1, eta=2 / math.e ** 3.5)
        assert est.values[0] == 11.0

    def test_default_eta(self, rng):
        est = median_denoised_estimator(rng.normal(size=500), 2)
        assert est.eta == pytest.approx(1 / 500)
        assert est.batches == math.floor(math.log(4 * 500))

    def test_validation(self):
        with pytest.raises(ValueError):
            median_denoised_estimator([], 1)
        with pytest.raises(ValueError):
            median_denoised_estimator([1.0], 0)
        with pytest.raises(ValueError):
            median_denoised_estimator([1.0, 2.0], 1, eta=1.5)

    def test_accepts_dataset(self):
        d = sample(CASE1, 100, 5)
        assert np.array_equal(median_denoised_estimator(d, 2).values,
                              median_denoised_estimator(d.observations, 2).values)

    def test_case1_accuracy(self):
        x = sample(CASE1, 100_000, 6).observations
        est = median_denoised_estimator(x, 4, eta=0.01)
        truth = moment_vector(CASE1, 7).values
        se_full = he_per_sample(x, 7).std(axis=1) / math.sqrt(x.size)
        assert np.all(np.abs(est.values - truth) < 10 * se_full)


class TestFit:
    def test_point_mass(self):
        nu = fit_mixture_from_moments(moment_vector(point_mass(0.0), 1), 1)
        assert nu.atoms[0] == 0.0 and nu.weights[0] == 1.0

    def test_symmetric_pair(self):
        nu = fit_mixture_from_moments(moment_vector(AtomicMixture([-1.0, 1.0], [0.5, 0.5]), 3), 2)
        assert np.allclose(nu.atoms, [-1, 1], atol=1e-8)
        assert np.allclose(nu.weights, [0.5, 0.5], atol=1e-8)

    def test_case1(self):
        nu = fit_mixture_from_moments(moment_vector(CASE1, 7), 4)
        assert wasserstein(nu, CASE1) < 1e-6

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            fit_mixture_from_moments([0.0, 1.0], 2)

    def test_infeasible_input_is_flagged(self):
        # m2 < m1^2 admits no distribution
        with pytest.warns(MomentFitWarning):
            nu = fit_mixture_from_moments([1.0, 0.5, 0.0], 2)
        assert nu.k == 2 and np.all(nu.weights >= 0)
        assert np.all(np.abs(nu.atoms) <= 6.0)

    def test_noisy_estimate_returns_valid_mixture(self):
        est = median_denoised_estimator(sample(CASE1, 300, 1), 4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MomentFitWarning)
            nu = fit_mixture_from_moments(est, 4)
        assert isinstance(est, DenoisedEstimate)
        assert nu.k == 4 and math.isclose(nu.weights.sum(), 1.0)

    def test_round_trip_random(self, rng):
        for _ in range(50):
            k = int(rng.integers(1, 6))
            while True:
                atoms = np.sort(rng.uniform(-6, 6, k))
                if k == 1 or np.min(np.diff(atoms)) >= 0.05:
                    break
            w = rng.dirichlet(np.ones(k)) * (1 - 0.05 * k) + 0.05
            nu = AtomicMixture(atoms, w)
            fit = fit_mixture_from_moments(moment_vector(nu, 2 * k - 1), k)
            assert wasserstein(fit, nu) < 1e-6
