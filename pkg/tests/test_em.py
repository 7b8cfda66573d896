import numpy as np
import pytest

from mixbayes.core import AtomicMixture, sample
from mixbayes.metrics import wasserstein
from mixbayes.samplers import EmptyComponentWarning, em_log_posterior, em_map

from conftest import CASE1, random_mixture

# W1 of the best of 20 restarts on the fixture below, recorded on the first calibrated run
CASE1_EM_BASELINE = 0.1325


def test_single_component_is_clipped_mean():
    x = np.array([1.0, 2.0, 4.5])
    res = em_map(x, 1)
    assert res.mixture.atoms[0] == pytest.approx(2.5) and res.mixture.weights[0] == 1.0
    assert em_map(np.array([9.0, 10.0]), 1).mixture.atoms[0] == 6.0


def test_flat_weight_prior_is_mle():
    x = sample(CASE1, 100, 1).observations
    m = AtomicMixture([-1.0, 1.0], [0.3, 0.7])
    assert em_log_posterior(x, m.atoms, m.weights, 1.0) == pytest.approx(
        float(np.sum(np.log(0.3 * np.exp(-0.5 * (x + 1) ** 2) + 0.7 * np.exp(-0.5 * (x - 1) ** 2))))
        - 100 * 0.5 * np.log(2 * np.pi))


@pytest.mark.parametrize("dirichlet", [1.0, 1.5, 3.0])
def test_monotone(rng, dirichlet):
    for _ in range(10):
        truth = random_mixture(rng, max_atoms=4, bound=4)
        x = sample(truth, 200, int(rng.integers(1 << 30))).observations
        k = int(rng.integers(2, 6))
        res = em_map(x, k, dirichlet=dirichlet, n_restarts=3, seed=int(rng.integers(1 << 30)), max_iter=200)
        assert np.all(np.diff(res.history) >= -1e-8)
        assert np.all(np.abs(res.mixture.atoms) <= 6.0)


def test_case1_recovery():
    x = sample(CASE1, 2000, 2024).observations
    res = em_map(x, 4, n_restarts=20, seed=0)
    err = wasserstein(res.mixture, CASE1, 1)
    print(f"EM case 1 n=2000 W1 = {err:.4f}")
    assert err < 0.25
    assert err == pytest.approx(CASE1_EM_BASELINE, abs=5e-4)


def test_floor_flagged():
    x = np.full(20, -6.0)
    init = AtomicMixture([-6.0, 6.0], [0.5, 0.5])
    with pytest.warns(EmptyComponentWarning):
        res = em_map(x, 2, init=init, n_restarts=1, dirichlet=1.0)
    assert res.floored and res.mixture.weights.min() > 0


def test_restarts_deterministic():
    x = sample(CASE1, 300, 8).observations
    a, b = em_map(x, 4, n_restarts=5, seed=3), em_map(x, 4, n_restarts=5, seed=3)
    assert a.mixture == b.mixture


def test_validation():
    with pytest.raises(ValueError):
        em_map(np.ones(3), 0)
    with pytest.raises(ValueError):
        em_map(np.array([]), 2)
