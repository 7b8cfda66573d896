"""Priors on mixing distributions: MFM variants, spike-and-slab and the DP.

Hyperparameter schedules depend on the sample size ``n``. A schedule is
written as a string: ``"default"`` (the n-decaying form tied to ``A`` and
``kbar_n``), ``"1/n"``, ``"1/(n log n)"``, ``"const:<x>"`` or a bare number.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .core import DEFAULT_L

FAMILIES = ("poisson", "geometric", "binomial", "spike-slab")
PMF_UNDERFLOW = 1e-300
K_CAP_FACTOR = 10


class ConfigError(ValueError):
    """A prior or sampler configuration is invalid."""


class PmfUnderflowWarning(RuntimeWarning):
    pass


def kbar(n: int) -> int:
    """Default upper bound ``floor(log n / log log n)`` on the number of components, at least 1."""
    if n < 3:
        return 1
    loglog = math.log(math.log(n))
    if loglog <= 0:
        return 1
    return max(1, math.floor(math.log(n) / loglog))


def evaluate_schedule(schedule, n: int, default: Optional[float] = None) -> float:
    """Evaluate an n-dependent hyperparameter schedule."""
    if isinstance(schedule, (int, float)):
        return float(schedule)
    s = str(schedule).strip().replace(" ", "")
    if s == "default":
        if default is None:
            raise ConfigError("no default schedule available")
        return default
    if s == "1/n":
        return 1.0 / n
    if s in ("1/(nlogn)", "1/(n*log(n))", "1/(nlog(n))"):
        return 1.0 / (n * math.log(n))
    if s.startswith("const:"):
        s = s[len("const:"):]
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"unknown schedule {schedule!r}") from None


@dataclass
class PriorSpec:
    """Prior on ``(k, w, theta)``.

    ``k`` follows ``family``; given ``k`` the weights are symmetric
    Dirichlet(``dirichlet``) and the atoms are i.i.d. uniform on ``[-L, L]``.
    ``rate`` is the schedule of the family's parameter: lambda_n for the
    Poisson, p_n for the geometric, binomial and spike-and-slab families.
    """

    family: str = "poisson"
    rate: object = "default"
    a: float = 1.0
    A: float = 4.0
    dirichlet: float = 1.0
    L: float = DEFAULT_L
    kappa: float = 0.5
    b: float = 1.0
    k_cap: Optional[int] = None
    kbar_override: Optional[int] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if not self.a > 0 or not self.A > 0:
            raise ConfigError("a and A must be positive")
        if not self.dirichlet > 0:
            raise ConfigError("Dirichlet concentration must be positive")
        if not self.L > 0:
            raise ConfigError("L must be positive")

    def kbar(self, n: int) -> int:
        return self.kbar_override if self.kbar_override is not None else kbar(n)

    def cap(self, n: int) -> int:
        if self.family in ("binomial", "spike-slab"):
            return self.kbar(n)
        return self.k_cap if self.k_cap is not None else K_CAP_FACTOR * self.kbar(n)

    def parameter(self, n: int) -> float:
        """lambda_n (Poisson) or p_n (other families)."""
        decay = self.A * self.kbar(n) * math.log(max(n, 2))
        if self.family == "poisson":
            default = self.a * math.exp(-decay)
        elif self.family == "geometric":
            default = 1.0 - self.a * math.exp(-decay)
        else:
            default = self.a * math.exp(-2 * decay)
        value = evaluate_schedule(self.rate, n, default)
        if self.family == "poisson":
            if not value > 0:
                raise ConfigError("lambda_n must be positive")
        elif not 0 <= value <= 1:
            raise ConfigError(f"p_n={value} is not a probability")
        return value

    def log_pmf(self, n: int, k: int) -> float:
        """Untruncated ``log Pi(k)``; ``-inf`` off the support."""
        if k < 1:
            return -math.inf
        par = self.parameter(n)
        if self.family == "poisson":
            return -par + (k - 1) * math.log(par) - math.lgamma(k)
        if self.family == "geometric":
            if par == 0:
                return -math.inf
            if k == 1:
                return math.log(par)
            log_q = self._log_geometric_failure(n, par)
            if log_q == -math.inf:
                return -math.inf
            return (k - 1) * log_q + math.log(par)
        trials = self.kbar(n) - 1
        if k - 1 > trials:
            return -math.inf
        return float(stats.binom.logpmf(k - 1, trials, par))

    def _log_geometric_failure(self, n: int, par: float) -> float:
        # default schedule: 1 - p_n underflows in floats, so take its log directly
        if self.rate == "default":
            return math.log(self.a) - self.A * self.kbar(n) * math.log(max(n, 2))
        return math.log1p(-par) if par < 1 else -math.inf

    def log_pmf_table(self, n: int) -> np.ndarray:
        """``log Pi(k)`` for ``k = 1..cap(n)``, renormalized over that support."""
        cap = self.cap(n)
        table = np.array([self.log_pmf(n, k) for k in range(1, cap + 1)])
        finite = np.isfinite(table)
        if not finite.any():
            raise ConfigError("prior on k puts no mass on the truncated support")
        top = table[finite].max()
        table = table - (top + math.log(np.exp(table[finite] - top).sum()))
        return table

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PriorSpec":
        data = dict(data)
        if "lambda" in data:
            data["rate"] = data.pop("lambda")
        if "p" in data:
            data["rate"] = data.pop("p")
        if "kbar" in data:
            data["kbar_override"] = data.pop("kbar")
        if isinstance(data.get("dirichlet"), (list, tuple)):
            conc = set(float(c) for c in data["dirichlet"])
            if len(conc) != 1:
                raise ConfigError("only symmetric Dirichlet weight priors are supported")
            data["dirichlet"] = conc.pop()
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown prior fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "PriorSpec":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ConfigError(str(exc)) from exc


def mfm_vary(L: float = DEFAULT_L) -> PriorSpec:
    return PriorSpec(family="poisson", rate="1/n", L=L)


def mfm_const(L: float = DEFAULT_L) -> PriorSpec:
    return PriorSpec(family="poisson", rate="const:0.01", L=L)


@dataclass
class DpPriorSpec:
    kappa: object = "1/(n log n)"
    L: float = DEFAULT_L

    def concentration(self, n: int) -> float:
        value = evaluate_schedule(self.kappa, n)
        if not value > 0:
            raise ConfigError("DP concentration must be positive")
        return value

    @classmethod
    def from_dict(cls, data: dict) -> "DpPriorSpec":
        unknown = set(data) - {"kappa", "L", "family"}
        if unknown:
            raise ConfigError(f"unknown DP prior fields: {sorted(unknown)}")
        return cls(kappa=data.get("kappa", "1/(n log n)"), L=data.get("L", DEFAULT_L))


def k_prior_pmf(spec: PriorSpec, n: int, k: int, truncated: bool = False) -> float:
    """``Pi(k)`` for sample size ``n``.

    Values below 1e-300 are returned as 0 with a :class:`PmfUnderflowWarning`.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if truncated:
        table = spec.log_pmf_table(n)
        lp = table[k - 1] if k <= table.size else -math.inf
    else:
        lp = spec.log_pmf(n, k)
    if lp == -math.inf:
        return 0.0
    value = math.exp(lp)
    if value < PMF_UNDERFLOW:
        warnings.warn(f"Pi(k={k}) underflows at n={n}", PmfUnderflowWarning)
        return 0.0
    return value


@dataclass
class AssumptionReport:
    ratio_ok: bool
    lower_ok: bool
    max_ratio_margin: float
    max_lower_margin: float
    c1: float
    c2: float
    c3: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.ratio_ok and self.lower_ok


def validate_assumption_p1(
    spec: PriorSpec, n_grid: Sequence[int], k_grid: Optional[Sequence[int]] = None
) -> AssumptionReport:
    """Numerically check the two conditions on the prior of ``k``.

    Ratio condition: ``Pi(k+1)/Pi(k) <= c1 exp(-A kbar_n log n)`` with
    ``c1 = a``. Lower bound: ``Pi(k) >= c2 exp(-c3 kbar_n log n k)`` for
    ``k <= kbar_n`` with ``c2 = exp(-a)`` and ``c3 = A + 1 + max(0, -log a)``
    (the extra unit absorbs the factorial term of the Poisson pmf).
    Margins are on the log scale; positive means violated.
    """
    if not n_grid:
        raise ValueError("n_grid must be nonempty")
    c1 = spec.a
    c2 = math.exp(-spec.a)
    c3 = spec.A + 1.0 + max(0.0, -math.log(spec.a))
    ratio_margin = -math.inf
    lower_margin = -math.inf
    violations = []
    tol = 1e-9
    for n in n_grid:
        kb = spec.kbar(n)
        logn = math.log(n)
        ks = k_grid if k_grid is not None else range(1, kb + 1)
        for k in ks:
            lp_k = spec.log_pmf(n, k)
            lp_next = spec.log_pmf(n, k + 1)
            if lp_k > -math.inf:
                margin = (lp_next - lp_k) - (math.log(c1) - spec.A * kb * logn)
                ratio_margin = max(ratio_margin, margin)
                if margin > tol:
                    violations.append(("ratio", n, k, margin))
            if k <= kb:
                margin = (math.log(c2) - c3 * kb * logn * k) - lp_k
                lower_margin = max(lower_margin, margin)
                if margin > tol:
                    violations.append(("lower", n, k, margin))
    return AssumptionReport(
        ratio_ok=not any(v[0] == "ratio" for v in violations),
        lower_ok=not any(v[0] == "lower" for v in violations),
        max_ratio_margin=ratio_margin,
        max_lower_margin=lower_margin,
        c1=c1, c2=c2, c3=c3,
        violations=violations,
    )


@dataclass
class SpikeSlabDraws:
    k: np.ndarray
    weights: np.ndarray  # (draws, kbar), zero where the slab is off

    def k_pmf(self) -> np.ndarray:
        counts = np.bincount(self.k, minlength=self.weights.shape[1] + 1)
        return counts[1:] / self.k.size


def spike_slab_induced_law(
    spec: PriorSpec, n: int, seed: int, draws: int, p: Optional[float] = None
) -> SpikeSlabDraws:
    """Draw unnormalized spike-and-slab weights and normalize.

    The first weight is always a Gamma(kappa, b) slab; the others are zero
    with probability ``1 - p_n``. ``k`` is the number of nonzero weights.
    """
    if draws < 1:
        raise ValueError("draws must be positive")
    kb = spec.kbar(n)
    p_n = spec.parameter(n) if p is None else p
    rng = np.random.default_rng(seed)
    slab = rng.gamma(spec.kappa, 1.0 / spec.b, size=(draws, kb))
    on = np.ones((draws, kb), dtype=bool)
    on[:, 1:] = rng.random((draws, kb - 1)) < p_n
    raw = np.where(on, slab, 0.0)
    weights = raw / raw.sum(axis=1, keepdims=True)
    return SpikeSlabDraws(on.sum(axis=1), weights)


@dataclass
class SmallBallReport:
    probability: float
    std_error: float
    bound: float
    passed: bool


def dirichlet_small_ball_check(
    kappa: Sequence[float], w0: Sequence[float], eta: float, draws: int = 100_000, seed: int = 0
) -> SmallBallReport:
    """Monte Carlo check of ``P(|w - w0|_1 <= 2 eta) >= eta^(2(k-1)) prod kappa_j``.

    Passes unless the estimate falls more than five standard errors below
    the bound.
    """
    kappa = np.asarray(kappa, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    k = kappa.size
    if w0.size != k:
        raise ValueError("kappa and w0 differ in length")
    if np.any(kappa <= 0) or np.any(kappa > 1):
        raise ValueError("concentrations must lie in (0, 1]")
    if not 0 < eta <= 1.0 / k:
        raise ValueError("eta must lie in (0, 1/k]")
    bound = eta ** (2 * (k - 1)) * float(np.prod(kappa))
    if k == 1:
        return SmallBallReport(1.0, 0.0, bound, True)
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(kappa, size=draws)
    hits = np.abs(w - w0).sum(axis=1) <= 2 * eta
    p_hat = hits.mean()
    se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / draws) / draws)
    return SmallBallReport(float(p_hat), se, bound, p_hat + 5 * se >= bound)


def _check_rate_args(k_star, kbar_n, n):
    if k_star < 1 or kbar_n < 1:
        raise ValueError("k_star and kbar_n must be positive")
    if k_star > kbar_n:
        raise ValueError("k_star exceeds kbar_n")
    if n < 3:
        raise ValueError("n must be at least 3")


def rate_exact(k_star: int, kbar_n: int, n: float) -> float:
    """``k*^((3k*-1)/(2k*-1)) (kbar_n log n / n)^(1/(4k*-2))``."""
    _check_rate_args(k_star, kbar_n, n)
    base = kbar_n * math.log(n) / n
    return k_star ** ((3 * k_star - 1) / (2 * k_star - 1)) * base ** (1 / (4 * k_star - 2))


def rate_adaptive(k_star: int, k0: int, gamma: float, kbar_n: int, n: float) -> float:
    """Rate under ``k0`` (gamma, omega)-separation of the truth."""
    _check_rate_args(k_star, kbar_n, n)
    if not 1 <= k0 <= k_star:
        raise ValueError("need 1 <= k0 <= k_star")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = 2 * (k_star - k0) + 1
    base = kbar_n * math.log(n) / n
    return (
        k_star ** ((3 * k_star - 2 * k0 + 2) / d)
        * gamma ** (-(2 * k0 - 2) / d)
        * base ** (1 / (4 * (k_star - k0) + 2))
    )


def rate_higher_order(n: float) -> float:
    """``log log n / log n``."""
    if n < 3:
        raise ValueError("n must be at least 3")
    return math.log(math.log(n)) / math.log(n)


def crp_log_pmf(n: int, kappa: float) -> np.ndarray:
    """``log P(T_n = t)`` for ``t = 1..n`` under CRP(kappa).

    Uses unsigned Stirling numbers of the first kind:
    ``P(T_n=t) = |s(n,t)| kappa^t Gamma(kappa) / Gamma(kappa+n)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    # log |s(i, t)| via the recurrence |s(i+1,t)| = i |s(i,t)| + |s(i,t-1)|
    logs = np.full(n + 1, -np.inf)
    logs[0] = 0.0
    for i in range(n):
        with np.errstate(divide="ignore"):
            stay = logs + (math.log(i) if i > 0 else -np.inf)
        shift = np.concatenate(([-np.inf], logs[:-1]))
        logs = np.logaddexp(stay, shift)
    t = np.arange(1, n + 1)
    return logs[1:] + t * math.log(kappa) + gammaln(kappa) - gammaln(kappa + n)
