import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mixbayes import (
    DPGaussianMixture,
    MAPGaussianMixture,
    MFMGaussianMixture,
    MomentGaussianMixture,
)
from mixbayes.core import sample
from mixbayes.metrics import wasserstein

from conftest import CASE1

SHORT = {"iterations": 1500, "burn_in": 500, "thin": 10}


@pytest.fixture(scope="module")
def x():
    return sample(CASE1, 800, 31).observations


ESTIMATORS = [
    MAPGaussianMixture(n_components=4, n_restarts=5),
    MomentGaussianMixture(n_components=4),
    MFMGaussianMixture(**SHORT),
    DPGaussianMixture(**SHORT),
]


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__)
def test_fit_predict_score(est, x):
    est = clone(est)
    assert est.fit(x) is est
    nu = est.mixture_
    assert wasserstein(nu, CASE1, 1) < 0.8
    proba = est.predict_proba(x[:20])
    assert proba.shape == (20, est.n_components_)
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert np.array_equal(est.predict(x[:20]), proba.argmax(axis=1))
    assert np.isfinite(est.score(x))
    assert est.score_samples(x[:5]).shape == (5,)


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__)
def test_not_fitted(est):
    with pytest.raises(NotFittedError):
        clone(est).predict(np.zeros(3))


def test_params_round_trip():
    est = MFMGaussianMixture(rate="const:0.01", alpha=0.5, random_state=3)
    params = est.get_params()
    assert params["rate"] == "const:0.01" and params["alpha"] == 0.5
    assert clone(est).get_params() == params
    est.set_params(alpha=0.8)
    assert est.alpha == 0.8


def test_column_input_matches_vector(x):
    a = MAPGaussianMixture(n_components=2, n_restarts=2).fit(x)
    b = MAPGaussianMixture(n_components=2, n_restarts=2).fit(x.reshape(-1, 1))
    assert a.mixture_ == b.mixture_


@pytest.mark.parametrize("bad", [np.zeros((4, 2)), np.array([1.0, np.nan]), np.array([])])
def test_bad_input(bad):
    with pytest.raises(ValueError):
        MAPGaussianMixture(n_components=1).fit(bad)


def test_bad_components(x):
    with pytest.raises(ValueError):
        MAPGaussianMixture(n_components=0).fit(x)


def test_mfm_attributes(x):
    est = MFMGaussianMixture(**SHORT).fit(x)
    assert abs(sum(est.k_pmf_.values()) - 1) < 1e-12
    assert est.k_mode_ == est.mixture_.k
    assert len(est.trace_) == 100
