"""EM for the MAP estimate of a k-component unit-variance Gaussian location mixture."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from ..core import DEFAULT_L, AtomicMixture
from ._kernels import mixture_loglik

WEIGHT_FLOOR = 1e-12


class EmptyComponentWarning(RuntimeWarning):
    pass


@dataclass
class EmResult:
    mixture: AtomicMixture
    log_posterior: float
    history: List[float] = field(default_factory=list)
    n_iter: int = 0
    floored: bool = False


def em_log_posterior(x, atoms, weights, dirichlet: float = 1.0) -> float:
    """Log-likelihood plus ``(dirichlet-1) sum log w`` (constants dropped)."""
    lp = mixture_loglik(np.ascontiguousarray(x, dtype=float), atoms, weights)
    if dirichlet != 1.0:
        lp += (dirichlet - 1.0) * float(np.sum(np.log(weights)))
    return lp


def _em_once(x, atoms, weights, dirichlet, bound, max_iter, tol) -> EmResult:
    n, k = x.size, atoms.size
    history = [em_log_posterior(x, atoms, weights, dirichlet)]
    floored = False
    it = 0
    for it in range(1, max_iter + 1):
        d = x[:, None] - atoms[None, :]
        log_r = np.log(weights)[None, :] - 0.5 * d * d
        log_r -= logsumexp(log_r, axis=1, keepdims=True)
        resp = np.exp(log_r)
        mass = resp.sum(axis=0)
        # M-step: Dirichlet mode for the weights, clipped weighted means for the atoms
        new_w = mass + (dirichlet - 1.0)
        if np.any(new_w < WEIGHT_FLOOR * n):
            floored = True
            new_w = np.maximum(new_w, WEIGHT_FLOOR * n)
        new_w = new_w / new_w.sum()
        safe = np.where(mass > 0, mass, 1.0)
        new_atoms = np.where(mass > 0, resp.T @ x / safe, atoms)
        new_atoms = np.clip(new_atoms, -bound, bound)
        lp = em_log_posterior(x, new_atoms, new_w, dirichlet)
        atoms, weights = new_atoms, new_w
        history.append(lp)
        if lp - history[-2] < tol:
            break
    return EmResult(AtomicMixture(atoms, weights), history[-1], history, it, floored)


def em_map(
    data,
    k: int,
    dirichlet: float = 1.0,
    bound: float = DEFAULT_L,
    init: Optional[AtomicMixture] = None,
    max_iter: int = 500,
    tol: float = 1e-8,
    n_restarts: int = 1,
    seed: Optional[int] = 0,
) -> EmResult:
    """MAP estimate under a symmetric Dirichlet weight prior and uniform atom prior.

    Restarts draw ``k`` distinct observations as initial atoms with equal
    weights; an explicit ``init`` is used for the first restart. The best
    restart by log posterior is returned.
    """
    x = np.asarray(getattr(data, "observations", data), dtype=float).ravel()
    if k < 1:
        raise ValueError("k must be positive")
    if x.size == 0:
        raise ValueError("data must be nonempty")
    if k == 1:
        theta = float(np.clip(x.mean(), -bound, bound))
        mix = AtomicMixture([theta], [1.0])
        lp = em_log_posterior(x, mix.atoms, mix.weights, dirichlet)
        return EmResult(mix, lp, [lp], 0)
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, n_restarts)):
        if r == 0 and init is not None:
            atoms, weights = np.array(init.atoms, dtype=float), np.array(init.weights, dtype=float)
        else:
            replace = x.size < k
            atoms = np.sort(rng.choice(x, size=k, replace=replace)) + 1e-6 * np.arange(k)
            atoms = np.clip(atoms, -bound, bound)
            weights = np.full(k, 1.0 / k)
        res = _em_once(x, atoms, weights, dirichlet, bound, max_iter, tol)
        if best is None or res.log_posterior > best.log_posterior:
            best = res
    if best.floored:
        warnings.warn("a component lost all responsibility; its weight was floored",
                      EmptyComponentWarning)
    best.mixture = best.mixture.sorted()
    return best
