"""Mixing distributions, Gaussian location mixtures and synthetic data.

A mixing distribution ``nu = sum_j w_j delta_{theta_j}`` is represented by
:class:`AtomicMixture`. Convolving it with the standard normal kernel gives
the Gaussian location mixture :class:`GaussianMixtureDensity`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import logsumexp

DEFAULT_L = 6.0
WEIGHT_TOL = 1e-12
RENORMALIZE_TOL = 1e-9

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


class AtomicMixture:
    """A finite mixing distribution ``sum_j w_j delta_{theta_j}``.

    Parameters
    ----------
    atoms : array-like of shape (k,)
        Component locations.
    weights : array-like of shape (k,)
        Nonnegative mixing weights. A drift of up to 1e-9 from unit total
        mass is silently renormalized; larger deviations raise.
    bound : float, optional
        If given, every atom must lie in ``[-bound, bound]``.
    """

    __slots__ = ("_atoms", "_weights", "_bound")

    def __init__(self, atoms, weights, bound: Optional[float] = None):
        atoms = np.asarray(atoms, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if atoms.size == 0:
            raise ValueError("a mixing distribution needs at least one atom")
        if atoms.shape != weights.shape:
            raise ValueError(
                f"atoms and weights differ in length: {atoms.size} != {weights.size}"
            )
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = math.fsum(weights)
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        if abs(total - 1.0) > 0.0:
            weights = weights / total
        if bound is not None and np.any(np.abs(atoms) > bound):
            raise ValueError(f"atoms outside [-{bound}, {bound}]")
        self._atoms = _frozen(atoms)
        self._weights = _frozen(weights)
        self._bound = bound

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def bound(self) -> Optional[float]:
        return self._bound

    @property
    def k(self) -> int:
        return self._atoms.size

    def __len__(self) -> int:
        return self.k

    def __repr__(self) -> str:
        return f"AtomicMixture(atoms={self._atoms.tolist()}, weights={self._weights.tolist()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicMixture):
            return NotImplemented
        return np.array_equal(self._atoms, other._atoms) and np.array_equal(
            self._weights, other._weights
        )

    def __hash__(self):
        return hash((self._atoms.tobytes(), self._weights.tobytes()))

    def sorted(self) -> "AtomicMixture":
        order = np.argsort(self._atoms, kind="stable")
        return AtomicMixture(self._atoms[order], self._weights[order], self._bound)

    def canonicalize(self, tol: float = 1e-12) -> "AtomicMixture":
        """Sort atoms, merge atoms closer than ``tol`` and drop zero weights."""
        order = np.argsort(self._atoms, kind="stable")
        atoms, weights = self._atoms[order], self._weights[order]
        merged_atoms = [atoms[0]]
        merged_weights = [weights[0]]
        for a, w in zip(atoms[1:], weights[1:]):
            if a - merged_atoms[-1] <= tol:
                merged_weights[-1] += w
            else:
                merged_atoms.append(a)
                merged_weights.append(w)
        merged_atoms = np.array(merged_atoms)
        merged_weights = np.array(merged_weights)
        keep = merged_weights > 0
        return AtomicMixture(merged_atoms[keep], merged_weights[keep], self._bound)

    def scaled(self, factor: float) -> "AtomicMixture":
        return AtomicMixture(self._atoms * factor, self._weights)

    def to_dict(self) -> dict:
        return {"atoms": [float(a) for a in self._atoms], "weights": [float(w) for w in self._weights]}

    def to_json(self) -> str:
        # json uses repr for floats, which round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, bound: Optional[float] = None) -> "AtomicMixture":
        if "atoms" not in data or "weights" not in data:
            raise ValueError("mixture JSON needs 'atoms' and 'weights'")
        return cls(data["atoms"], data["weights"], bound)

    @classmethod
    def from_json(cls, text: str, bound: Optional[float] = None) -> "AtomicMixture":
        return cls.from_dict(json.loads(text), bound)


def point_mass(theta: float = 0.0) -> AtomicMixture:
    return AtomicMixture([theta], [1.0])


@dataclass(frozen=True)
class GaussianMixtureDensity:
    """The density of ``nu * Phi``: a unit-variance Gaussian location mixture."""

    mixture: AtomicMixture
    bound: float = DEFAULT_L

    def logpdf(self, x) -> np.ndarray:
        return log_density(self.mixture, x)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def __call__(self, x):
        return self.pdf(x)

    @property
    def support_radius(self) -> float:
        return max(self.bound, float(np.max(np.abs(self.mixture.atoms))))


def log_density(nu: AtomicMixture, x) -> np.ndarray:
    """Log of ``sum_j w_j phi(x - theta_j)``, evaluated with log-sum-exp."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        logw = np.log(nu.weights)
    d = x[..., None] - nu.atoms
    return logsumexp(logw - 0.5 * d * d, axis=-1) - _LOG_SQRT_2PI


def density(gmm, x):
    """Mixture density at ``x``; ``gmm`` may be a density or a bare mixture."""
    nu = gmm.mixture if isinstance(gmm, GaussianMixtureDensity) else gmm
    out = np.exp(log_density(nu, x))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Dataset:
    """Observations ``X_1..X_n`` with the seed and, when synthetic, the truth."""

    observations: np.ndarray
    seed: Optional[int] = None
    truth: Optional[AtomicMixture] = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float).ravel()
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return self.observations.size

    def __len__(self) -> int:
        return self.n

    def save(self, path) -> Path:
        """Write one observation per line plus a ``.json`` sidecar."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for x in self.observations:
                fh.write(repr(float(x)) + "\n")
        sidecar = {"n": self.n, "seed": self.seed}
        if self.truth is not None:
            sidecar["truth"] = self.truth.to_dict()
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
        return path

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        obs = np.loadtxt(path, dtype=float, ndmin=1)
        seed, truth = None, None
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            seed = meta.get("seed")
            if meta.get("truth") is not None:
                truth = AtomicMixture.from_dict(meta["truth"])
        return cls(obs, seed, truth)


def sample(truth: AtomicMixture, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. observations from ``truth * Phi``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    comp = rng.choice(truth.k, size=n, p=truth.weights)
    x = truth.atoms[comp] + rng.standard_normal(n)
    return Dataset(x, seed, truth)


@dataclass(frozen=True)
class SeparationSpec:
    k0: int
    gamma: float
    omega: float

    def __post_init__(self):
        if self.k0 < 1:
            raise ValueError("k0 must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.omega <= 1:
            raise ValueError("omega must lie in (0, 1]")


SEPARATION_MAX_SMALL_GROUPS = 22


def _max_covered_bins(items, omega: float) -> int:
    """Largest number of disjoint subsets of ``items`` each summing to >= omega.

    Exact subset dynamic program over states ``(bins completed, partial fill)``
    ordered lexicographically; a state with one more completed bin dominates
    any partial fill.
    """
    m = len(items)
    best = [(-1, 0.0)] * (1 << m)
    best[0] = (0, 0.0)
    for mask in range(1 << m):
        bins, fill = best[mask]
        if bins < 0:
            continue
        for i in range(m):
            bit = 1 << i
            if mask & bit:
                continue
            nf = fill + items[i]
            cand = (bins + 1, 0.0) if nf >= omega else (bins, nf)
            if cand > best[mask | bit]:
                best[mask | bit] = cand
    return best[-1][0]


def is_separated(nu: AtomicMixture, spec: SeparationSpec, tol: float = 1e-12) -> bool:
    """Whether ``nu`` is ``k0`` (gamma, omega)-separated.

    Sorted atoms closer than ``gamma`` must share a group, so the atoms are
    first cut into maximal chains at every gap >= gamma. Groups may be any
    unions of chains (they need not be contiguous), which turns the question
    into covering ``k0`` bins of size ``omega`` with the chain weights:
    chains heavier than ``omega`` fill a bin on their own and the remaining
    light chains are handled by an exact subset search.
    Zero-weight atoms are not part of the support and are ignored.
    """
    keep = nu.weights > 0
    atoms, weights = nu.atoms[keep], nu.weights[keep]
    if spec.k0 > atoms.size:
        return False
    omega = spec.omega - tol
    if spec.k0 == 1:
        return math.fsum(weights) >= omega
    order = np.argsort(atoms, kind="stable")
    atoms, weights = atoms[order], weights[order]

    chains = []
    current = weights[0]
    for gap, w in zip(np.diff(atoms), weights[1:]):
        if gap >= spec.gamma - tol:
            chains.append(current)
            current = w
        else:
            current += w
    chains.append(current)
    if len(chains) < spec.k0 or math.fsum(chains) < spec.k0 * omega:
        return False

    heavy = sum(1 for c in chains if c >= omega)
    if heavy >= spec.k0:
        return True
    light = sorted(c for c in chains if c < omega)
    if len(light) > SEPARATION_MAX_SMALL_GROUPS:
        raise ValueError(f"exact separation search limited to {SEPARATION_MAX_SMALL_GROUPS} light groups")
    return heavy + _max_covered_bins(light, omega) >= spec.k0


def min_atom_gap(nu: AtomicMixture) -> float:
    if nu.k < 2:
        return math.inf
    return float(np.min(np.diff(np.sort(nu.atoms))))


def separation_witness_for_ball(
    nu0: AtomicMixture, c: float, candidate: AtomicMixture
) -> bool:
    """Check that ``candidate`` in the W1 ball around ``nu0`` is separated.

    For ``W1(candidate, nu0) < c * gamma(nu0) * omega(nu0)`` the candidate
    must be ``k0`` ((1-2c) gamma, (1-4c)/(1-3c) omega)-separated, with
    ``k0`` the number of atoms of ``nu0``.

    Returns False when the inclusion fails. It does fail for candidates
    with a light atom farther than ``c * gamma`` from every atom of
    ``nu0``: such an atom can bridge two groups at a small W1 cost.
    """
    from .metrics import wasserstein

    if not 0 < c < 0.25:
        raise ValueError("c must lie in (0, 1/4)")
    if np.any(nu0.weights <= 0) or np.unique(nu0.atoms).size != nu0.k:
        raise ValueError("nu0 needs distinct atoms and positive weights")
    gamma0 = min_atom_gap(nu0)
    omega0 = float(np.min(nu0.weights))
    radius = c * gamma0 * omega0
    w1 = wasserstein(candidate, nu0, 1)
    if not w1 < radius:
        raise ValueError(f"candidate is outside the W1 ball: {w1} >= {radius}")
    if nu0.k == 1:
        return is_separated(candidate, SeparationSpec(1, 1.0, omega0))
    spec = SeparationSpec(
        nu0.k, (1 - 2 * c) * gamma0, (1 - 4 * c) / (1 - 3 * c) * omega0
    )
    return is_separated(candidate, spec)
