"""Moments of mixing distributions and the denoised moment estimators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .core import DEFAULT_L, AtomicMixture, Dataset

HERMITE_MAX_ORDER = 40


class MomentFitWarning(UserWarning):
    """Raised when a moment vector had to be projected before fitting."""


@dataclass(frozen=True)
class MomentVector:
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def order(self) -> int:
        return self.values.size

    def to_dict(self) -> dict:
        return {"order": self.order, "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, data: dict) -> "MomentVector":
        mv = cls(data["values"])
        if "order" in data and data["order"] != mv.order:
            raise ValueError("moment order does not match the number of values")
        return mv


@dataclass(frozen=True)
class DenoisedEstimate:
    values: np.ndarray
    batches: int
    eta: float

    @property
    def order(self) -> int:
        return len(self.values)

    def as_moment_vector(self) -> MomentVector:
        return MomentVector(self.values)


def moment_vector(nu: AtomicMixture, r: int) -> MomentVector:
    """``(m_1, ..., m_r)`` with ``m_h = sum_j w_j theta_j^h``."""
    if r < 1:
        raise ValueError("r must be positive")
    powers = nu.atoms[None, :] ** np.arange(1, r + 1)[:, None]
    return MomentVector([math.fsum(row) for row in powers * nu.weights])


def _hermite_coefficients(h: int) -> list:
    # He_h(x) = sum_a c_a x^(h-2a), c_a = h! (-1/2)^a / (a! (h-2a)!)
    return [
        (-0.5) ** a * math.factorial(h) / (math.factorial(a) * math.factorial(h - 2 * a))
        for a in range(h // 2 + 1)
    ]


def hermite(h: int, x):
    """Probabilists' Hermite polynomial ``He_h(x)``."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h > HERMITE_MAX_ORDER:
        raise ValueError(f"order {h} exceeds {HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for a, c in enumerate(_hermite_coefficients(h)):
        out = out + c * x ** (h - 2 * a)
    return float(out) if out.ndim == 0 else out


def denoise_raw_moments(raw: np.ndarray) -> np.ndarray:
    """Map raw moments ``(M~_0=1, M~_1, ..., M~_r)`` to Hermite-denoised ones."""
    raw = np.asarray(raw, dtype=float)
    r = raw.size - 1
    out = np.empty(r)
    for h in range(1, r + 1):
        coeffs = _hermite_coefficients(h)
        out[h - 1] = math.fsum(c * raw[h - 2 * a] for a, c in enumerate(coeffs))
    return out


def _raw_moments(batch: np.ndarray, r: int) -> np.ndarray:
    powers = batch[None, :] ** np.arange(r + 1)[:, None]
    return powers.mean(axis=1)


def denoised_batch_moments(batch, r: int) -> np.ndarray:
    """Unbiased estimates of ``m_1..m_r`` of the mixing distribution.

    Since ``E He_h(theta + Z) = theta^h`` for standard normal ``Z``, the
    Hermite transform of the raw batch moments removes the noise.
    """
    batch = np.asarray(batch, dtype=float).ravel()
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    if r < 1:
        raise ValueError("r must be positive")
    return denoise_raw_moments(_raw_moments(batch, r))


def batch_count(n: int, k: int, eta: float) -> int:
    n_batches = math.floor(math.log(2 * k / eta))
    return max(1, min(n_batches, n))


def median_denoised_estimator(
    data, k: int, eta: Optional[float] = None
) -> DenoisedEstimate:
    """Coordinatewise median of batch-denoised moments of order ``1..2k-1``.

    The sample is cut, in order, into ``N = floor(log(2k/eta)) ^ n`` batches;
    the first ``n mod N`` batches get one extra point. With an even ``N``
    the lower median is used. ``eta`` defaults to ``1/n``.
    """
    x = data.observations if isinstance(data, Dataset) else np.asarray(data, dtype=float).ravel()
    n = x.size
    if n < 1:
        raise ValueError("data must be nonempty")
    if k < 1:
        raise ValueError("k must be positive")
    if eta is None:
        eta = 1.0 / n if n > 1 else 0.5
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    r = 2 * k - 1
    n_batches = batch_count(n, k, eta)
    sizes = np.full(n_batches, n // n_batches)
    sizes[: n % n_batches] += 1
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    per_batch = np.array(
        [denoised_batch_moments(x[bounds[i]:bounds[i + 1]], r) for i in range(n_batches)]
    )
    ranked = np.sort(per_batch, axis=0)
    median = ranked[math.ceil(n_batches / 2) - 1]
    return DenoisedEstimate(median, n_batches, eta)


def _quadrature_from_moments(m: np.ndarray, k: int):
    """Gauss quadrature nodes/weights from moments ``m_0..m_{2k-1}``.

    Returns ``(nodes, weights, projected)``.
    """
    h0 = linalg.hankel(m[:k], m[k - 1:2 * k - 1])
    h1 = linalg.hankel(m[1:k + 1], m[k:2 * k])
    projected = False
    eigmin = float(np.min(linalg.eigvalsh(h0)))
    ridge_floor = 1e-10
    if eigmin < ridge_floor:
        h0 = h0 + (ridge_floor - eigmin) * np.eye(k)
        projected = True
    nodes = linalg.eigh(h1, h0, eigvals_only=True)
    return np.sort(nodes), projected


def _vandermonde_weights(nodes: np.ndarray, m: np.ndarray) -> np.ndarray:
    v = nodes[None, :] ** np.arange(m.size)[:, None]
    w, *_ = linalg.lstsq(v, m)
    return w


def _moment_residual(params, k, m, scale):
    nodes, w = params[:k], params[k:]
    pw = (nodes[None, :] / scale) ** np.arange(m.size)[:, None]
    return pw @ w - m / scale ** np.arange(m.size)


def fit_mixture_from_moments(
    m, k: int, bound: float = DEFAULT_L, polish: bool = True
) -> AtomicMixture:
    """Recover a ``k``-atomic distribution on ``[-bound, bound]`` from ``m_1..m_{2k-1}``.

    Nodes come from the generalized eigenproblem of the shifted Hankel
    pencil (Gauss quadrature); weights from the Vandermonde moment system.
    On exact moment vectors the result is refined by a Newton-type
    least-squares polish. Infeasible inputs are ridge-projected, clamped and
    renormalized, and a :class:`MomentFitWarning` is emitted.
    """
    vals = m.values if isinstance(m, (MomentVector, DenoisedEstimate)) else np.asarray(m, dtype=float)
    vals = np.asarray(vals, dtype=float).ravel()
    if k < 1:
        raise ValueError("k must be positive")
    if vals.size != 2 * k - 1:
        raise ValueError(f"need {2 * k - 1} moments for k={k}, got {vals.size}")
    if k == 1:
        theta = float(np.clip(vals[0], -bound, bound))
        return AtomicMixture([theta], [1.0])

    # rescale atoms to [-1, 1] to keep the Hankel system well scaled
    scale = bound
    full = np.concatenate(([1.0], vals)) / scale ** np.arange(2 * k)
    nodes, projected = _quadrature_from_moments(full, k)
    nodes = np.clip(nodes, -1.0, 1.0)
    weights = _vandermonde_weights(nodes, full)

    if polish and not projected:
        x0 = np.concatenate((nodes * scale, weights))
        res = optimize.least_squares(
            _moment_residual, x0, args=(k, np.concatenate(([1.0], vals)), scale),
            xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm",
        )
        cand_nodes, cand_w = res.x[:k] / scale, res.x[k:]
        old = np.linalg.norm(_moment_residual(x0, k, np.concatenate(([1.0], vals)), scale))
        if res.success and np.linalg.norm(res.fun) <= old:
            nodes, weights = np.clip(cand_nodes, -1.0, 1.0), cand_w

    if np.any(weights < 0) or not np.isfinite(weights).all():
        projected = True
        weights = np.clip(np.nan_to_num(weights, nan=0.0), 0.0, None)
    total = weights.sum()
    if total <= 0:
        projected = True
        weights = np.full(k, 1.0 / k)
    else:
        if abs(total - 1.0) > 1e-9:
            projected = True
        weights = weights / total
    if projected:
        warnings.warn("moment vector is not feasible; returning the nearest fit", MomentFitWarning)
    return AtomicMixture(nodes * scale, weights).sorted()
