import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import CASE1, mixtures
from mixbayes.core import (
    AtomicMixture,
    Dataset,
    GaussianMixtureDensity,
    SeparationSpec,
    density,
    is_separated,
    log_density,
    point_mass,
    sample,
    separation_witness_for_ball,
)
from mixbayes.metrics import wasserstein


class TestAtomicMixture:
    def test_validation(self):
        with pytest.raises(ValueError):
            AtomicMixture([], [])
        with pytest.raises(ValueError):
            AtomicMixture([0.0, 1.0], [1.0])
        with pytest.raises(ValueError):
            AtomicMixture([0.0, 1.0], [0.7, 0.7])
        with pytest.raises(ValueError):
            AtomicMixture([0.0, 1.0], [-0.1, 1.1])
        with pytest.raises(ValueError):
            AtomicMixture([7.0], [1.0], bound=6.0)

    def test_small_drift_is_renormalized(self):
        nu = AtomicMixture([0.0, 1.0], [0.5, 0.5 + 5e-10])
        assert math.fsum(nu.weights) == pytest.approx(1.0, abs=1e-15)

    def test_immutable(self):
        nu = AtomicMixture([0.0, 1.0], [0.5, 0.5])
        with pytest.raises(ValueError):
            nu.atoms[0] = 3.0

    def test_json_round_trip_is_exact(self):
        nu = AtomicMixture([0.1, -2 / 3, 1e-17], [1 / 3, 1 / 3, 1 / 3])
        back = AtomicMixture.from_json(nu.to_json())
        assert np.array_equal(back.atoms, nu.atoms)
        assert np.array_equal(back.weights, nu.weights)
        assert set(json.loads(nu.to_json())) == {"atoms", "weights"}

    def test_canonicalize_merges_duplicates(self):
        nu = AtomicMixture([1.0, 0.0, 1.0], [0.25, 0.5, 0.25]).canonicalize()
        assert nu.k == 2
        assert np.allclose(nu.weights, [0.5, 0.5])


class TestDensity:
    def test_point_mass_at_zero(self):
        assert density(point_mass(0.0), 0.0) == pytest.approx(0.3989422804, abs=1e-10)

    def test_symmetric_pair(self):
        nu = AtomicMixture([-1.0, 1.0], [0.5, 0.5])
        assert density(nu, 0.0) == pytest.approx(0.2419707245, abs=1e-10)

    def test_case1_against_direct_sum(self):
        oracle = sum(0.25 * stats.norm.pdf(3.0 - t) for t in (-3, -1, 1, 3))
        assert density(GaussianMixtureDensity(CASE1), 3.0) == pytest.approx(oracle, rel=1e-12)

    def test_far_tail_log_density_is_finite(self):
        assert np.isfinite(log_density(CASE1, np.array([1e3, -1e3]))).all()

    @given(mixtures(), st.floats(-30, 30))
    def test_density_range(self, nu, x):
        v = density(nu, x)
        assert 0 < v <= 1 / math.sqrt(2 * math.pi) + 1e-15

    @given(mixtures(bound=8.0))
    def test_integrates_to_one(self, nu):
        total, _ = integrate.quad(lambda x: density(nu, x), -18, 18, points=sorted(nu.atoms), limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestSample:
    def test_validation(self):
        with pytest.raises(ValueError):
            sample(CASE1, 0, 1)

    def test_point_mass_mean(self):
        d = sample(point_mass(0.0), 100_000, 3)
        assert abs(d.observations.mean()) < 5 / math.sqrt(d.n)

    def test_case1_mean(self):
        d = sample(CASE1, 100_000, 4)
        assert abs(d.observations.mean()) < 5 * math.sqrt(6 / d.n)

    def test_deterministic(self):
        assert np.array_equal(sample(CASE1, 50, 9).observations, sample(CASE1, 50, 9).observations)

    def test_save_load_round_trip(self, tmp_path):
        d = sample(CASE1, 20, 11)
        path = d.save(tmp_path / "x.txt")
        back = Dataset.load(path)
        assert np.array_equal(back.observations, d.observations)
        assert back.seed == 11
        assert back.truth == CASE1
        meta = json.loads(path.with_suffix(".json").read_text())
        assert meta["seed"] == 11 and meta["n"] == 20


def separation_oracle(nu, spec):
    """Exhaustive search over all set partitions into k0 groups."""
    k = nu.k
    if spec.k0 > k:
        return False
    for labels in itertools.product(range(spec.k0), repeat=k):
        if set(labels) != set(range(spec.k0)) or labels[0] != 0:
            continue
        ok = True
        for g in range(spec.k0):
            if sum(w for w, l in zip(nu.weights, labels) if l == g) < spec.omega - 1e-12:
                ok = False
                break
        if not ok:
            continue
        for i in range(k):
            for j in range(k):
                if labels[i] != labels[j] and abs(nu.atoms[i] - nu.atoms[j]) < spec.gamma - 1e-12:
                    ok = False
        if ok:
            return True
    return False


class TestSeparation:
    def test_case1_examples(self):
        assert is_separated(CASE1, SeparationSpec(4, 2.0, 0.25))
        assert is_separated(CASE1, SeparationSpec(1, 100.0, 1.0))
        assert not is_separated(CASE1, SeparationSpec(4, 2.1, 0.25))

    def test_noncontiguous_groups_count(self):
        # {-2.1, -0.1, 2.8} and {1.3, 1.4}: every cross pair is >= 0.5 apart
        nu = AtomicMixture([1.3, 2.8, -0.1, 1.4, -2.1], [0.38, 0.19, 0.01, 0.18, 0.24])
        assert is_separated(nu, SeparationSpec(2, 0.5, 0.36))

    def test_k0_above_atom_count_is_false(self):
        assert not is_separated(point_mass(0.0), SeparationSpec(2, 1.0, 0.1))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SeparationSpec(0, 1.0, 0.5)
        with pytest.raises(ValueError):
            SeparationSpec(1, 0.0, 0.5)
        with pytest.raises(ValueError):
            SeparationSpec(1, 1.0, 1.5)

    def test_agrees_with_partition_oracle(self, rng):
        for _ in range(1000):
            k = int(rng.integers(1, 7))
            atoms = np.round(rng.uniform(-3, 3, k), 1)
            nu = AtomicMixture(atoms, rng.dirichlet(np.ones(k)))
            spec = SeparationSpec(int(rng.integers(1, k + 1)), float(rng.choice([0.3, 0.5, 1.0, 1.5])),
                                  float(rng.uniform(0.02, 0.6)))
            assert is_separated(nu, spec) == separation_oracle(nu, spec), (nu, spec)


class TestBallWitness:
    def test_identity(self):
        nu0 = AtomicMixture([-1.0, 1.0], [0.5, 0.5])
        assert separation_witness_for_ball(nu0, 0.1, nu0)

    def test_case1_shift(self):
        cand = AtomicMixture(CASE1.atoms + 0.01, CASE1.weights)
        assert wasserstein(cand, CASE1) == pytest.approx(0.01)
        assert separation_witness_for_ball(CASE1, 0.05, cand)

    def test_single_atom(self):
        assert separation_witness_for_ball(point_mass(0.0), 0.2, point_mass(0.0))

    def test_outside_ball_is_an_error(self):
        with pytest.raises(ValueError):
            separation_witness_for_ball(CASE1, 0.05, AtomicMixture(CASE1.atoms + 0.5, CASE1.weights))
        with pytest.raises(ValueError):
            separation_witness_for_ball(CASE1, 0.3, CASE1)

    def test_low_mass_bridge_atom_breaks_inclusion(self):
        # an atom of mass 0.05 halfway between the two truth atoms is within W1 0.05 < c gamma omega = 0.2
        # but sits closer than (1 - 2c) gamma = 1.2 to both sides, so no 2-part partition exists
        nu0 = AtomicMixture([-1.0, 1.0], [0.5, 0.5])
        nu = AtomicMixture([-1.0, 0.0, 1.0], [0.45, 0.05, 0.5])
        assert wasserstein(nu, nu0) < 0.2
        assert not separation_witness_for_ball(nu0, 0.2, nu)

    def test_inclusion_for_local_perturbations(self, rng):
        # every atom within c gamma of some atom of nu0: the case the covering argument handles
        for _ in range(300):
            k = int(rng.integers(1, 6))
            while True:
                atoms = np.sort(rng.uniform(-5, 5, k))
                if k == 1 or np.min(np.diff(atoms)) >= 0.2:
                    break
            nu0 = AtomicMixture(atoms, rng.dirichlet(np.full(k, 2.0)) * 0.9 + 0.1 / k)
            c = float(rng.uniform(0.01, 0.24))
            gamma0 = float(np.min(np.diff(atoms))) if k > 1 else 1.0
            radius = c * gamma0 * float(nu0.weights.min())
            scale = 1.0
            while True:
                parts = [(th + rng.uniform(-1, 1, 3) * scale * radius, rng.dirichlet(np.ones(3)) * w)
                         for th, w in zip(nu0.atoms, nu0.weights)]
                cand = AtomicMixture(np.clip(np.concatenate([p[0] for p in parts]), -6, 6),
                                     np.concatenate([p[1] for p in parts]))
                if wasserstein(cand, nu0) < radius:
                    break
                scale /= 2
            assert separation_witness_for_ball(nu0, c, cand)
