"""Distances between mixing distributions and between mixture densities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from .core import AtomicMixture, GaussianMixtureDensity, log_density

LP_SIZE_CAP = 64
QUAD_MARGIN = 12.0
QUAD_EPSABS = 1e-10
_LOG_RATIO_FLOOR = math.log(1e-300)


@dataclass(frozen=True)
class TransportPlan:
    mass: np.ndarray

    @property
    def rows(self) -> int:
        return self.mass.shape[0]

    @property
    def cols(self) -> int:
        return self.mass.shape[1]


def wasserstein(nu1: AtomicMixture, nu2: AtomicMixture, q: float = 1.0) -> float:
    """W_q between two atomic distributions via the comonotone coupling.

    Both supports are sorted and the two CDFs are swept together; each
    step moves the overlapping quantile mass between the current atoms.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    o1 = np.argsort(nu1.atoms, kind="stable")
    o2 = np.argsort(nu2.atoms, kind="stable")
    a1, w1 = nu1.atoms[o1], nu1.weights[o1]
    a2, w2 = nu2.atoms[o2], nu2.weights[o2]
    c1 = np.cumsum(w1)
    c2 = np.cumsum(w2)
    c1[-1] = c2[-1] = 1.0
    # merged breakpoints of both quantile functions
    cuts = np.union1d(c1, c2)
    lower = np.concatenate(([0.0], cuts[:-1]))
    mass = cuts - lower
    mid = 0.5 * (lower + cuts)
    i1 = np.minimum(np.searchsorted(c1, mid), a1.size - 1)
    i2 = np.minimum(np.searchsorted(c2, mid), a2.size - 1)
    cost = np.abs(a1[i1] - a2[i2]) ** q
    total = math.fsum(mass * cost)
    return total ** (1.0 / q)


def wasserstein_lp_oracle(
    nu1: AtomicMixture, nu2: AtomicMixture, q: float = 1.0
) -> Tuple[float, TransportPlan]:
    """Solve the transport linear program directly (test oracle)."""
    k1, k2 = nu1.k, nu2.k
    if k1 + k2 > LP_SIZE_CAP:
        raise ValueError(f"combined support {k1 + k2} exceeds the oracle cap {LP_SIZE_CAP}")
    cost = np.abs(nu1.atoms[:, None] - nu2.atoms[None, :]) ** q
    a_eq = np.zeros((k1 + k2, k1 * k2))
    for j in range(k1):
        a_eq[j, j * k2:(j + 1) * k2] = 1.0
    for h in range(k2):
        a_eq[k1 + h, h::k2] = 1.0
    b_eq = np.concatenate((nu1.weights, nu2.weights))
    res = optimize.linprog(
        cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.clip(res.x.reshape(k1, k2), 0.0, None)
    value = max(float(cost.ravel() @ res.x), 0.0)
    return value ** (1.0 / q), TransportPlan(plan)


def _as_density(d) -> GaussianMixtureDensity:
    return d if isinstance(d, GaussianMixtureDensity) else GaussianMixtureDensity(d)


def _integrate(f, d1: GaussianMixtureDensity, d2: GaussianMixtureDensity) -> float:
    radius = max(d1.support_radius, d2.support_radius) + QUAD_MARGIN
    points = np.unique(np.concatenate((d1.mixture.atoms, d2.mixture.atoms)))
    points = points[np.abs(points) < radius]
    val, _ = integrate.quad(
        f, -radius, radius, points=points if points.size else None,
        epsabs=QUAD_EPSABS, epsrel=1e-10, limit=500,
    )
    return val


def hellinger_sq(d1, d2) -> float:
    """Squared Hellinger distance ``int (sqrt p1 - sqrt p2)^2``."""
    d1, d2 = _as_density(d1), _as_density(d2)

    def f(x):
        return (math.exp(0.5 * float(d1.logpdf(x))) - math.exp(0.5 * float(d2.logpdf(x)))) ** 2

    return max(_integrate(f, d1, d2), 0.0)


def _log_ratio(d1, d2, x):
    l1 = float(d1.logpdf(x))
    l2 = float(d2.logpdf(x))
    return l1, max(l1 - l2, _LOG_RATIO_FLOOR)


def kl_divergence(d1, d2) -> float:
    """``KL(p1, p2) = int p1 log(p1 / p2)``."""
    d1, d2 = _as_density(d1), _as_density(d2)

    def f(x):
        l1, lr = _log_ratio(d1, d2, x)
        return math.exp(l1) * lr

    return max(_integrate(f, d1, d2), 0.0)


def kl2_divergence(d1, d2) -> float:
    """Second KL variation ``int p1 log(p1 / p2)^2``."""
    d1, d2 = _as_density(d1), _as_density(d2)

    def f(x):
        l1, lr = _log_ratio(d1, d2, x)
        return math.exp(l1) * lr * lr

    return max(_integrate(f, d1, d2), 0.0)


def renyi_divergence(d1, d2, alpha: float) -> float:
    """Renyi divergence ``-log int p1^alpha p2^(1-alpha)`` for alpha in (0, 1)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    d1, d2 = _as_density(d1), _as_density(d2)

    def f(x):
        return math.exp(alpha * float(d1.logpdf(x)) + (1 - alpha) * float(d2.logpdf(x)))

    affinity = _integrate(f, d1, d2)
    return max(-math.log(min(affinity, 1.0)), 0.0)


def wasserstein_partition_bound_check(
    nu1: AtomicMixture,
    nu2: AtomicMixture,
    partition: Sequence[float],
    q: float = 1.0,
    bound: float = 6.0,
    tol: float = 1e-12,
) -> bool:
    """Check ``W_q <= max diam(B_j) + diam(Theta) (sum |nu1(B_j) - nu2(B_j)|)^(1/q)``.

    ``partition`` lists the cell edges ``-bound = e_0 < e_1 < ... < e_m = bound``;
    cells are ``[e_{j-1}, e_j)`` with the last one closed.
    """
    edges = np.asarray(partition, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("partition edges must be strictly increasing")
    if not (math.isclose(edges[0], -bound) and math.isclose(edges[-1], bound)):
        raise ValueError("partition must cover [-bound, bound]")

    def cell_mass(nu):
        idx = np.clip(np.searchsorted(edges, nu.atoms, side="right") - 1, 0, edges.size - 2)
        return np.bincount(idx, weights=nu.weights, minlength=edges.size - 1)

    diff = math.fsum(np.abs(cell_mass(nu1) - cell_mass(nu2)))
    rhs = float(np.max(np.diff(edges))) + 2 * bound * diff ** (1.0 / q)
    return wasserstein(nu1, nu2, q) <= rhs + tol
