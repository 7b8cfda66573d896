"""Reversible-jump MCMC for the mixture-of-finite-mixtures posterior.

The chain runs on the marginal likelihood ``prod_i sum_j w_j phi(x_i - theta_j)``
raised to the fractional order ``alpha``, so it targets the fractional
posterior exactly for any ``alpha`` in (0, 1]. Components are kept sorted
by location; the target on that ordered space carries a ``k!`` factor from
the exchangeable uniform atom prior.

Moves per sweep: random-walk Metropolis on each atom, a Dirichlet-proposal
Metropolis step on the weights, one dimension change (split/merge of
adjacent components or birth/death), and a Gibbs draw of the allocations
given the final ``(theta, w)``. The allocations are reported but never fed
back into the other moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln

from ..core import AtomicMixture, Dataset
from ..priors import ConfigError, PriorSpec
from ._kernels import gibbs_assignments, mixture_loglik
from .trace import MoveStats, PosteriorTrace, SamplerConfig

_LOG6 = math.log(6.0)


@dataclass
class MfmState:
    atoms: np.ndarray
    weights: np.ndarray
    assignments: np.ndarray
    log_lik: float
    log_posterior: float

    @property
    def k(self) -> int:
        return self.atoms.size

    @property
    def mixture(self) -> AtomicMixture:
        return AtomicMixture(self.atoms, self.weights)


class MfmTarget:
    """Log density of the (fractional) MFM posterior on ordered components."""

    def __init__(self, x: np.ndarray, prior: PriorSpec, n: int, alpha: Optional[float] = 1.0):
        self.x = np.ascontiguousarray(x, dtype=float)
        self.prior = prior
        self.alpha = alpha
        self.log_pmf = prior.log_pmf_table(n)
        self.cap = self.log_pmf.size
        self.delta = float(prior.dirichlet)
        self.L = float(prior.L)
        self._log_2L = math.log(2 * self.L)

    def log_lik(self, atoms, weights) -> float:
        if self.x.size == 0:
            return 0.0
        return mixture_loglik(self.x, atoms, weights)

    def tempered(self, ll: float) -> float:
        if self.alpha is None:
            return ll
        return self.alpha * ll

    def log_prior(self, atoms, weights) -> float:
        k = atoms.size
        if k > self.cap or np.any(np.abs(atoms) > self.L) or np.any(weights <= 0):
            return -math.inf
        d = self.delta
        log_dir = gammaln(k * d) - k * gammaln(d)
        if d != 1.0:
            log_dir += (d - 1.0) * float(np.sum(np.log(weights)))
        return float(self.log_pmf[k - 1] + log_dir + gammaln(k + 1) - k * self._log_2L)

    def log_post(self, atoms, weights, ll: float) -> float:
        return self.log_prior(atoms, weights) + self.tempered(ll)


def split_component(atoms, weights, j: int, u1: float, u2: float, scale: float = 1.0):
    """Split component ``j`` into two adjacent components.

    Weight ``w`` becomes ``(w u1, w (1-u1))``; the locations move apart by
    ``u2 * scale * sqrt(w2/w1)`` and ``u2 * scale * sqrt(w1/w2)`` so that the
    weighted mean is preserved. Returns ``(atoms, weights, adjacent)``
    where ``adjacent`` is False when the new pair would straddle another atom.
    """
    w, th = weights[j], atoms[j]
    w1, w2 = w * u1, w * (1.0 - u1)
    t1 = th - u2 * scale * math.sqrt(w2 / w1)
    t2 = th + u2 * scale * math.sqrt(w1 / w2)
    adjacent = (j == 0 or atoms[j - 1] < t1) and (j == atoms.size - 1 or t2 < atoms[j + 1])
    new_atoms = np.concatenate((atoms[:j], [t1, t2], atoms[j + 1:]))
    new_weights = np.concatenate((weights[:j], [w1, w2], weights[j + 1:]))
    return new_atoms, new_weights, adjacent


def merge_components(atoms, weights, j: int, scale: float = 1.0):
    """Merge components ``j`` and ``j+1``; inverse of :func:`split_component`.

    Returns ``(atoms, weights, u1, u2)`` where ``(u1, u2)`` are the split
    variables that would regenerate the pair.
    """
    w1, w2 = weights[j], weights[j + 1]
    t1, t2 = atoms[j], atoms[j + 1]
    w = w1 + w2
    th = (w1 * t1 + w2 * t2) / w
    u1 = w1 / w
    u2 = (t2 - t1) * math.sqrt(w1 * w2) / (scale * w)
    new_atoms = np.concatenate((atoms[:j], [th], atoms[j + 2:]))
    new_weights = np.concatenate((weights[:j], [w], weights[j + 2:]))
    return new_atoms, new_weights, u1, u2


def _log_beta22(u: float) -> float:
    return _LOG6 + math.log(u) + math.log1p(-u)


def split_log_jacobian(w: float, u1: float, scale: float) -> float:
    # |d(w1, w2, t1, t2) / d(w, u1, t, u2)| = scale * w / sqrt(u1 (1 - u1))
    return math.log(scale * w) - 0.5 * (math.log(u1) + math.log1p(-u1))


def _p_up(k: int, cap: int) -> float:
    if k >= cap:
        return 0.0
    return 1.0 if k == 1 else 0.5


def split_log_ratio(lp_small, lp_big, k, cap, w, u1, u2, scale) -> float:
    """log acceptance ratio of a split from ``k`` to ``k+1`` components."""
    return (
        lp_big - lp_small
        + math.log1p(-_p_up(k + 1, cap)) - math.log(_p_up(k, cap))
        - _log_beta22(u1) - _log_beta22(u2)
        + split_log_jacobian(w, u1, scale)
    )


def birth_log_ratio(lp_small, lp_big, k, cap, w_new, L) -> float:
    """log acceptance ratio of a birth from ``k`` to ``k+1`` components."""
    log_beta_1k = math.log(k) + (k - 1) * math.log1p(-w_new)
    return (
        lp_big - lp_small
        + math.log1p(-_p_up(k + 1, cap)) - math.log(k + 1)
        - math.log(_p_up(k, cap)) - log_beta_1k + math.log(2 * L)
        + (k - 1) * math.log1p(-w_new)
    )


def _log_dirichlet(x, conc) -> float:
    return float(gammaln(conc.sum()) - gammaln(conc).sum() + np.sum((conc - 1.0) * np.log(x)))


class _Sweeper:
    def __init__(self, target: MfmTarget, cfg: SamplerConfig, stats: MoveStats):
        self.t = target
        self.cfg = cfg
        self.stats = stats
        n = target.x.size
        self.tau = cfg.weight_concentration or (100.0 + n)

    def _accept(self, move: str, log_ratio: float, rng) -> bool:
        self.stats.proposed[move] += 1
        if self.cfg.record_log_ratios:
            self.stats.log_ratios.append((move, log_ratio))
        u = rng.random()
        if math.isnan(log_ratio):
            self.stats.overflow += 1
            return False
        if log_ratio >= 0 or u < math.exp(log_ratio):
            self.stats.accepted[move] += 1
            return True
        return False

    def sweep(self, s: MfmState, rng) -> MfmState:
        t, cfg = self.t, self.cfg
        atoms, weights = s.atoms.copy(), s.weights.copy()
        ll, lp = s.log_lik, s.log_posterior
        n = t.x.size

        # atoms, one at a time
        alpha = 1.0 if t.alpha is None else t.alpha
        steps = cfg.atom_step / np.sqrt(1.0 + alpha * n * weights)
        noise = rng.standard_normal(atoms.size)
        for j in range(atoms.size):
            prop = atoms.copy()
            prop[j] += steps[j] * noise[j]
            if abs(prop[j]) > t.L:
                self.stats.proposed["atom"] += 1
                self.stats.invalid["atom"] += 1
                rng.random()
                continue
            ll_new = t.log_lik(prop, weights)
            lp_new = t.log_post(prop, weights, ll_new)
            if self._accept("atom", lp_new - lp, rng):
                atoms, ll, lp = prop, ll_new, lp_new
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]

        # weights
        if atoms.size > 1:
            conc = self.tau * weights + 1.0
            prop_w = rng.dirichlet(conc)
            if np.all(prop_w > 0):
                ll_new = t.log_lik(atoms, prop_w)
                lp_new = t.log_post(atoms, prop_w, ll_new)
                log_ratio = (lp_new - lp + _log_dirichlet(weights, self.tau * prop_w + 1.0)
                             - _log_dirichlet(prop_w, conc))
                if self._accept("weights", log_ratio, rng):
                    weights, ll, lp = prop_w, ll_new, lp_new
            else:
                self.stats.invalid["weights"] += 1
                rng.random()

        # dimension change
        if t.cap > 1:
            if rng.random() < cfg.split_merge_prob:
                atoms, weights, ll, lp = self._split_merge(atoms, weights, ll, lp, rng)
            else:
                atoms, weights, ll, lp = self._birth_death(atoms, weights, ll, lp, rng)

        z = s.assignments
        if n:
            z = np.empty(n, dtype=np.int64)
            gibbs_assignments(t.x, atoms, weights, rng.random(n), z)
        return MfmState(atoms, weights, z, ll, lp)

    def _split_merge(self, atoms, weights, ll, lp, rng):
        t, scale = self.t, self.cfg.split_scale
        k = atoms.size
        if rng.random() < _p_up(k, t.cap):
            j = int(rng.integers(k))
            u1, u2 = rng.beta(2.0, 2.0), rng.beta(2.0, 2.0)
            new_a, new_w, adjacent = split_component(atoms, weights, j, u1, u2, scale)
            if not adjacent or np.any(np.abs(new_a) > t.L):
                self.stats.proposed["split"] += 1
                self.stats.invalid["split"] += 1
                rng.random()
                return atoms, weights, ll, lp
            ll_new = t.log_lik(new_a, new_w)
            lp_new = t.log_post(new_a, new_w, ll_new)
            log_ratio = split_log_ratio(lp, lp_new, k, t.cap, weights[j], u1, u2, scale)
            if self._accept("split", log_ratio, rng):
                if self.cfg.audit:
                    back_a, back_w, _, _ = merge_components(new_a, new_w, j, scale)
                    if not (np.allclose(back_a, atoms, rtol=0, atol=1e-10)
                            and np.allclose(back_w, weights, rtol=0, atol=1e-10)):
                        self.stats.audit_failures += 1
                return new_a, new_w, ll_new, lp_new
            return atoms, weights, ll, lp

        j = int(rng.integers(k - 1))
        new_a, new_w, u1, u2 = merge_components(atoms, weights, j, scale)
        if not 0 < u2 < 1:
            self.stats.proposed["merge"] += 1
            self.stats.invalid["merge"] += 1
            rng.random()
            return atoms, weights, ll, lp
        ll_new = t.log_lik(new_a, new_w)
        lp_new = t.log_post(new_a, new_w, ll_new)
        log_ratio = -split_log_ratio(lp_new, lp, k - 1, t.cap, new_w[j], u1, u2, scale)
        if self._accept("merge", log_ratio, rng):
            return new_a, new_w, ll_new, lp_new
        return atoms, weights, ll, lp

    def _birth_death(self, atoms, weights, ll, lp, rng):
        t = self.t
        k = atoms.size
        if rng.random() < _p_up(k, t.cap):
            w_new = rng.beta(1.0, k)
            th_new = rng.uniform(-t.L, t.L)
            if not 0 < w_new < 1:
                self.stats.proposed["birth"] += 1
                self.stats.invalid["birth"] += 1
                rng.random()
                return atoms, weights, ll, lp
            pos = int(np.searchsorted(atoms, th_new))
            new_a = np.insert(atoms, pos, th_new)
            new_w = np.insert(weights * (1.0 - w_new), pos, w_new)
            ll_new = t.log_lik(new_a, new_w)
            lp_new = t.log_post(new_a, new_w, ll_new)
            log_ratio = birth_log_ratio(lp, lp_new, k, t.cap, w_new, t.L)
            if self._accept("birth", log_ratio, rng):
                return new_a, new_w, ll_new, lp_new
            return atoms, weights, ll, lp

        j = int(rng.integers(k))
        w_old = weights[j]
        new_a = np.delete(atoms, j)
        new_w = np.delete(weights, j) / (1.0 - w_old)
        ll_new = t.log_lik(new_a, new_w)
        lp_new = t.log_post(new_a, new_w, ll_new)
        log_ratio = -birth_log_ratio(lp_new, lp, k - 1, t.cap, w_old, t.L)
        if self._accept("death", log_ratio, rng):
            return new_a, new_w, ll_new, lp_new
        return atoms, weights, ll, lp


def _observations(data) -> np.ndarray:
    if data is None:
        return np.empty(0)
    if isinstance(data, Dataset):
        return np.asarray(data.observations, dtype=float)
    return np.asarray(data, dtype=float).ravel()


def initial_state(target: MfmTarget, k: int) -> MfmState:
    """Equal weights with atoms at the data quantiles (evenly spread without data)."""
    k = max(1, min(k, target.cap))
    probs = (np.arange(k) + 0.5) / k
    if target.x.size:
        atoms = np.quantile(target.x, probs)
    else:
        atoms = -target.L + 2 * target.L * probs
    atoms = np.sort(np.clip(atoms, -target.L, target.L))
    atoms = atoms + 1e-9 * np.arange(k)  # keep the order strict
    atoms = np.clip(atoms, -target.L, target.L)
    weights = np.full(k, 1.0 / k)
    ll = target.log_lik(atoms, weights)
    z = np.zeros(target.x.size, dtype=np.int64)
    return MfmState(atoms, weights, z, ll, target.log_post(atoms, weights, ll))


def rjmcmc_step(state: MfmState, data, prior: PriorSpec, cfg: SamplerConfig, rng,
                n: Optional[int] = None, stats: Optional[MoveStats] = None) -> MfmState:
    """One full sweep of the sampler (see module docstring)."""
    x = _observations(data)
    target = MfmTarget(x, prior, n if n is not None else max(x.size, 1), cfg.alpha)
    return _Sweeper(target, cfg, stats or MoveStats()).sweep(state, rng)


def run_mfm(data, prior: PriorSpec, cfg: SamplerConfig, n: Optional[int] = None,
            init: Optional[MfmState] = None) -> PosteriorTrace:
    """Run a chain and return the thinned post-burn-in trace.

    ``n`` is the sample size used by the prior's schedules; it defaults to
    the number of observations and is required for prior-only runs.
    """
    x = _observations(data)
    if n is None:
        if x.size == 0:
            raise ConfigError("prior-only runs need an explicit sample size n")
        n = x.size
    target = MfmTarget(x, prior, n, cfg.alpha)
    stats = MoveStats()
    sweeper = _Sweeper(target, cfg, stats)
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        init_k = cfg.init_k if cfg.init_k is not None else 1
        state = initial_state(target, init_k)
    else:
        state = init

    its, sizes, lps, atoms, weights = [], [], [], [], []
    for it in range(1, cfg.iterations + 1):
        state = sweeper.sweep(state, rng)
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            its.append(it)
            sizes.append(state.k)
            lps.append(state.log_posterior)
            atoms.append(state.atoms.copy())
            weights.append(state.weights.copy())
    return PosteriorTrace("mfm", its, np.array(sizes), np.array(lps), atoms, weights,
                          cfg.burn_in, cfg.thin, cfg.seed, stats)
