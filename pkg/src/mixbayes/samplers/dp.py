"""Dirichlet-process mixture posterior via Neal's auxiliary-component sampler.

The base measure is uniform on ``[-L, L]`` and the kernel is the unit
variance Gaussian. Saved states report the number of occupied clusters
``T_n`` and the empirical mixing measure (cluster frequencies at the
cluster atoms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from ..core import AtomicMixture
from ..priors import ConfigError, DpPriorSpec
from ._kernels import neal8_sweep
from .mfm import _observations
from .trace import MoveStats, PosteriorTrace, SamplerConfig

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class DpState:
    """Allocations plus capacity-sized cluster arrays (first ``n_clusters`` live)."""

    assignments: np.ndarray
    counts: np.ndarray
    atoms: np.ndarray
    n_clusters: int

    @property
    def T(self) -> int:
        return int(self.n_clusters)

    @property
    def mixture(self) -> AtomicMixture:
        t = self.n_clusters
        counts = self.counts[:t].astype(float)
        return AtomicMixture(self.atoms[:t].copy(), counts / counts.sum())

    def copy(self) -> "DpState":
        return DpState(self.assignments.copy(), self.counts.copy(), self.atoms.copy(), self.n_clusters)


def _capacity(n: int, m_aux: int) -> int:
    return n + m_aux + 1


def initial_dp_state(x: np.ndarray, n_clusters: int, bound: float, m_aux: int = 3) -> DpState:
    """Quantile bins: observation ``i`` (in sorted order) joins bin ``i * T // n``."""
    n = x.size
    t = max(1, min(n_clusters, n))
    cap = _capacity(n, m_aux)
    z = np.empty(n, dtype=np.int64)
    order = np.argsort(x, kind="stable")
    z[order] = (np.arange(n) * t) // n
    counts = np.zeros(cap, dtype=np.int64)
    np.add.at(counts, z, 1)
    atoms = np.zeros(cap)
    for c in range(t):
        atoms[c] = np.clip(x[z == c].mean(), -bound, bound)
    return DpState(z, counts, atoms, t)


def dp_log_posterior(x, state: DpState, kappa: float, bound: float, use_lik: bool = True) -> float:
    """Exchangeable partition probability + base density + likelihood."""
    n, t = x.size, state.n_clusters
    counts = state.counts[:t]
    lp = t * math.log(kappa) + gammaln(kappa) - gammaln(kappa + n) + float(gammaln(counts).sum())
    lp -= t * math.log(2.0 * bound)
    if use_lik:
        d = x - state.atoms[state.assignments]
        lp += float(-0.5 * np.dot(d, d)) - n * _LOG_SQRT_2PI
    return float(lp)


def neal8_step(state: DpState, data, prior: DpPriorSpec, m_aux: int, rng,
               kappa: Optional[float] = None, use_lik: bool = True,
               step: float = 0.5, exact_atoms: bool = True) -> DpState:
    """One sweep of reallocations followed by a Metropolis refresh of each atom.

    ``kappa`` overrides the concentration given by ``prior`` at the current
    sample size. The input state is left untouched.
    """
    if m_aux < 1:
        raise ConfigError("m_aux must be positive")
    x = _observations(data)
    if not use_lik and x.size == 0:
        x = np.zeros(state.assignments.size)
    n = x.size
    if kappa is None:
        kappa = prior.concentration(n)
    s = state.copy()
    cap = _capacity(n, m_aux)
    if s.counts.size < cap:
        s.counts = np.concatenate((s.counts, np.zeros(cap - s.counts.size, dtype=np.int64)))
        s.atoms = np.concatenate((s.atoms, np.zeros(cap - s.atoms.size)))
    u_aux = rng.random((n, m_aux))
    u_cat = rng.random(n)
    z_ref = rng.standard_normal(cap)
    u_ref = rng.random(cap)
    s.n_clusters = int(neal8_sweep(
        x, s.assignments, s.counts, s.atoms, s.n_clusters, float(kappa), m_aux,
        float(prior.L), use_lik, u_aux, u_cat, z_ref, u_ref, float(step), exact_atoms,
    ))
    return s


def run_dp(data, prior: DpPriorSpec, cfg: SamplerConfig, n: Optional[int] = None,
           use_lik: bool = True, kappa: Optional[float] = None) -> PosteriorTrace:
    """Run a chain and return the thinned trace of ``T_n`` and empirical mixtures.

    Prior-only runs (``use_lik=False`` or no data) need ``n`` and draw the
    partition from the Chinese restaurant process.
    """
    x = _observations(data)
    if x.size == 0 or not use_lik:
        if n is None and x.size == 0:
            raise ConfigError("prior-only runs need an explicit sample size n")
        use_lik = False
        x = np.zeros(n if n is not None else x.size)
    n = x.size
    kappa = float(prior.concentration(n) if kappa is None else kappa)
    if not kappa > 0:
        raise ConfigError("concentration must be positive")
    bound = float(prior.L)
    state = initial_dp_state(x, cfg.init_clusters if use_lik else 1, bound, cfg.m_aux)
    rng = np.random.default_rng(cfg.seed)
    its, sizes, lps, atoms, weights = [], [], [], [], []
    cap = _capacity(n, cfg.m_aux)
    for it in range(1, cfg.iterations + 1):
        u_aux = rng.random((n, cfg.m_aux))
        u_cat = rng.random(n)
        z_ref = rng.standard_normal(cap)
        u_ref = rng.random(cap)
        state.n_clusters = int(neal8_sweep(
            x, state.assignments, state.counts, state.atoms, state.n_clusters, kappa,
            cfg.m_aux, bound, use_lik, u_aux, u_cat, z_ref, u_ref, float(cfg.dp_atom_step),
            cfg.dp_atom_update == "exact",
        ))
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            t = state.n_clusters
            its.append(it)
            sizes.append(t)
            lps.append(dp_log_posterior(x, state, kappa, bound, use_lik))
            atoms.append(state.atoms[:t].copy())
            weights.append(state.counts[:t] / n)
    return PosteriorTrace("dp", its, np.array(sizes), np.array(lps), atoms, weights,
                          cfg.burn_in, cfg.thin, cfg.seed, MoveStats())
