"""Simulation harness: estimator comparison by W1 error, posterior-of-k tables, rate tables.

Seeds are derived per cell. The data seed depends on ``(plan seed, case, n,
replicate)`` only, so every method in a cell sees the same sample; each
method gets its own chain seed. Result CSVs are written row by row and are
bit-identical for identical plans; wall-clock times go to a separate
``*.timing.csv`` file so they do not break that property.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import DEFAULT_L, AtomicMixture, sample
from .metrics import wasserstein
from .moments import fit_mixture_from_moments, median_denoised_estimator
from .priors import ConfigError, DpPriorSpec, PriorSpec, kbar, rate_adaptive, rate_exact, rate_higher_order
from .samplers.dp import run_dp
from .samplers.em import em_map
from .samplers.mfm import run_mfm
from .samplers.trace import SamplerConfig, derive_seed, posterior_summaries

METHODS = ("mfm_vary", "mfm_const", "map_exact", "map_over", "dp_vary", "dp_const", "moments")
K_METHODS = ("mfm_vary", "mfm_const", "dp_vary", "dp_const")
K_TRUTH = AtomicMixture([-2.0, 0.0, 2.0], [1 / 3, 1 / 3, 1 / 3])
K_GRID = (50, 100, 250, 1000, 2500)
K_COLUMNS = 10
EM_RESTARTS = 10

RESULT_FIELDS = ["case", "method", "n", "replicate", "w1_error", "k_mode", "estimate_json", "error"]
TIMING_FIELDS = ["case", "method", "n", "replicate", "wall_ms"]

_TRUTHS = {
    1: ([-3.0, -1.0, 1.0, 3.0], [0.25, 0.25, 0.25, 0.25]),
    2: ([-1.5, -1.0, 1.0, 3.0], [0.25, 0.25, 0.25, 0.25]),
    3: ([-3.0, -1.0, 1.0, 3.0], [0.4, 0.1, 0.25, 0.25]),
    4: ([-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0], [1 / 7] * 7),
}


def builtin_truth(case) -> AtomicMixture:
    """The four simulation truths; ``case`` is 1..4 or ``"case1"``..``"case4"``."""
    key = case
    if isinstance(case, str):
        key = case.lower().removeprefix("case")
    try:
        atoms, weights = _TRUTHS[int(key)]
    except (KeyError, ValueError, TypeError):
        raise ConfigError(f"unknown case {case!r}; expected 1..4") from None
    return AtomicMixture(atoms, weights)


@dataclass
class ExperimentPlan:
    """Grid of sample sizes x replicates x methods for one truth.

    ``case`` is ``"case1"``..``"case4"`` or ``"custom"`` together with ``truth``.
    """

    case: str = "case1"
    n_grid: Tuple[int, ...] = (250, 500, 750, 1000, 1250, 1500, 1750, 2000)
    replicates: int = 20
    methods: Tuple[str, ...] = ("mfm_vary", "map_exact")
    seed: int = 0
    truth: Optional[AtomicMixture] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig.desk)

    def __post_init__(self):
        self.case = str(self.case).lower()
        if self.case.isdigit():
            self.case = f"case{self.case}"
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.methods = tuple(self.methods)
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid must hold positive sample sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if isinstance(self.replicates, bool) or int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigError("replicates must be a positive integer")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ConfigError(f"unknown or missing methods: {sorted(unknown)}")
        if self.case == "custom":
            if self.truth is None:
                raise ConfigError("a custom case needs a truth")
        else:
            self.truth = builtin_truth(self.case)

    @classmethod
    def from_dict(cls, data: dict, paper_scale: bool = False) -> "ExperimentPlan":
        data = dict(data)
        known = {"case", "n_grid", "replicates", "methods", "seed", "truth", "sampler"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown plan fields: {sorted(unknown)}")
        truth = data.get("truth")
        if truth is not None and not isinstance(truth, AtomicMixture):
            try:
                data["truth"] = AtomicMixture.from_dict(truth)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad truth: {exc}") from None
        factory = SamplerConfig.paper_scale if paper_scale else SamplerConfig.desk
        sampler = data.get("sampler") or {}
        if not isinstance(sampler, SamplerConfig):
            unknown = set(sampler) - set(SamplerConfig.__dataclass_fields__)
            if unknown:
                raise ConfigError(f"unknown sampler fields: {sorted(unknown)}")
            data["sampler"] = factory(**sampler)
        return cls(**data)

    @classmethod
    def from_json(cls, path, paper_scale: bool = False) -> "ExperimentPlan":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"plan is not valid JSON: {exc}") from None
        return cls.from_dict(data, paper_scale)


@dataclass
class ResultRow:
    case: str
    method: str
    n: int
    replicate: int
    w1_error: float
    k_mode: int
    wall_ms: int
    estimate: Optional[AtomicMixture] = None
    error: str = ""

    def csv_record(self) -> dict:
        return {
            "case": self.case,
            "method": self.method,
            "n": self.n,
            "replicate": self.replicate,
            "w1_error": repr(float(self.w1_error)),
            "k_mode": self.k_mode,
            "estimate_json": self.estimate.to_json() if self.estimate is not None else "",
            "error": self.error,
        }

    def timing_record(self) -> dict:
        return {"case": self.case, "method": self.method, "n": self.n,
                "replicate": self.replicate, "wall_ms": self.wall_ms}


def data_seed(seed: int, case: str, n: int, replicate: int) -> int:
    return derive_seed(seed, case, "data", n, replicate)


def method_seed(seed: int, case: str, method: str, n: int, replicate: int) -> int:
    return derive_seed(seed, case, method, n, replicate)


def _with_seed(cfg: SamplerConfig, seed: int) -> SamplerConfig:
    return SamplerConfig(**{**cfg.to_dict(), "seed": seed})


def mfm_prior(method: str, L: float = DEFAULT_L) -> PriorSpec:
    rate = {"mfm_vary": "1/n", "mfm_const": "const:0.01"}[method]
    return PriorSpec(family="poisson", rate=rate, L=L)


def dp_prior(method: str, L: float = DEFAULT_L) -> DpPriorSpec:
    kappa = {"dp_vary": "1/(n log n)", "dp_const": "const:0.01"}[method]
    return DpPriorSpec(kappa=kappa, L=L)


def fit_method(method: str, x: np.ndarray, k_star: int, cfg: SamplerConfig,
               seed: int) -> Tuple[AtomicMixture, int, Optional[Dict[int, float]]]:
    """Point estimate, its size and (for Bayesian methods) the posterior size pmf."""
    if method in ("mfm_vary", "mfm_const"):
        summary = posterior_summaries(run_mfm(x, mfm_prior(method), _with_seed(cfg, seed)))
        return summary.modal_mixture, summary.mode, summary.pmf
    if method in ("dp_vary", "dp_const"):
        summary = posterior_summaries(run_dp(x, dp_prior(method), _with_seed(cfg, seed)))
        return summary.modal_mixture, summary.mode, summary.pmf
    if method in ("map_exact", "map_over"):
        k = k_star if method == "map_exact" else 2 * k_star
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = em_map(x, k, n_restarts=EM_RESTARTS, seed=seed)
        return res.mixture, res.mixture.k, None
    if method == "moments":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est = median_denoised_estimator(x, k_star)
            nu = fit_mixture_from_moments(est, k_star)
        return nu, nu.k, None
    raise ConfigError(f"unknown method {method!r}")


class _CsvSink:
    """Append-and-flush CSV writer (header written on open)."""

    def __init__(self, path, fields):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.DictWriter(self._fh, fieldnames=fields, lineterminator="\n")
        self._writer.writeheader()
        self._fh.flush()

    def write(self, record: dict) -> None:
        self._writer.writerow(record)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def timing_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".timing.csv")


def run_experiment(plan: ExperimentPlan, out=None, progress=None) -> List[ResultRow]:
    """Run every (n, replicate, method) cell of ``plan``.

    A failing method yields a row with ``w1_error = nan`` and the error
    message; the run continues. With ``out`` set, rows are appended to
    that CSV as they finish.
    """
    truth = plan.truth
    sink = _CsvSink(out, RESULT_FIELDS) if out is not None else None
    timing = _CsvSink(timing_path(out), TIMING_FIELDS) if out is not None else None
    rows = []
    try:
        for n in plan.n_grid:
            for rep in range(plan.replicates):
                x = sample(truth, n, data_seed(plan.seed, plan.case, n, rep)).observations
                for method in plan.methods:
                    t0 = time.perf_counter()
                    try:
                        nu, k_mode, _ = fit_method(
                            method, x, truth.k, plan.sampler,
                            method_seed(plan.seed, plan.case, method, n, rep))
                        row = ResultRow(plan.case, method, n, rep, wasserstein(nu, truth, 1), k_mode, 0, nu)
                    except Exception as exc:  # recorded, run continues
                        row = ResultRow(plan.case, method, n, rep, math.nan, 0, 0, None,
                                        f"{type(exc).__name__}: {exc}")
                    row.wall_ms = int(round(1000 * (time.perf_counter() - t0)))
                    rows.append(row)
                    if sink is not None:
                        sink.write(row.csv_record())
                        timing.write(row.timing_record())
                    if progress is not None:
                        progress(row)
    finally:
        if sink is not None:
            sink.close()
            timing.close()
    return rows


def read_results(path) -> List[dict]:
    """Rows of a result CSV with numeric fields parsed."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            row["n"] = int(row["n"])
            row["replicate"] = int(row["replicate"])
            row["w1_error"] = float(row["w1_error"])
            row["k_mode"] = int(row["k_mode"])
            out.append(row)
    return out


def mean_errors(rows: Iterable) -> Dict[Tuple[str, int], float]:
    """Mean finite ``w1_error`` per (method, n)."""
    acc: Dict[Tuple[str, int], List[float]] = {}
    for r in rows:
        get = r.get if isinstance(r, dict) else lambda k, r=r: getattr(r, k)
        err = float(get("w1_error"))
        if math.isfinite(err):
            acc.setdefault((get("method"), int(get("n"))), []).append(err)
    return {key: float(np.mean(v)) for key, v in sorted(acc.items())}


def k_columns(max_size: int = K_COLUMNS) -> List[str]:
    return [f"k{i}" for i in range(1, max_size)] + [f"k{max_size}+"]


@dataclass
class KRow:
    method: str
    n: int
    replicate: int
    pmf: np.ndarray
    mode: int
    error: str = ""

    def csv_record(self) -> dict:
        rec = {"method": self.method, "n": self.n, "replicate": self.replicate, "mode": self.mode}
        rec.update({c: repr(float(p)) for c, p in zip(k_columns(self.pmf.size), self.pmf)})
        rec["error"] = self.error
        return rec


def run_k_experiment(
    n_grid: Sequence[int] = K_GRID,
    methods: Sequence[str] = K_METHODS,
    replicates: int = 5,
    seed: int = 0,
    sampler: Optional[SamplerConfig] = None,
    truth: AtomicMixture = K_TRUTH,
    out=None,
    progress=None,
) -> List[KRow]:
    """Posterior pmf of ``k`` (MFM) or ``T_n`` (DP) per (method, n, replicate).

    Hyperparameters: Poisson mean ``1/n`` or ``0.01`` for the MFM prior,
    concentration ``1/(n log n)`` or ``0.01`` for the DP.
    """
    unknown = set(methods) - set(K_METHODS)
    if unknown:
        raise ConfigError(f"methods without a size posterior: {sorted(unknown)}")
    if replicates < 1:
        raise ConfigError("replicates must be positive")
    sampler = sampler or SamplerConfig.desk()
    fields = ["method", "n", "replicate", "mode"] + k_columns() + ["error"]
    sink = _CsvSink(out, fields) if out is not None else None
    rows = []
    try:
        for n in n_grid:
            for rep in range(replicates):
                x = sample(truth, n, data_seed(seed, "kexp", n, rep)).observations
                for method in methods:
                    try:
                        _, mode, pmf = fit_method(method, x, truth.k, sampler,
                                                  method_seed(seed, "kexp", method, n, rep))
                        vec = np.zeros(K_COLUMNS)
                        for s, p in pmf.items():
                            vec[min(s, K_COLUMNS) - 1] += p
                        row = KRow(method, n, rep, vec, mode)
                    except Exception as exc:  # recorded, run continues
                        row = KRow(method, n, rep, np.full(K_COLUMNS, math.nan), 0,
                                   f"{type(exc).__name__}: {exc}")
                    rows.append(row)
                    if sink is not None:
                        sink.write(row.csv_record())
                    if progress is not None:
                        progress(row)
    finally:
        if sink is not None:
            sink.close()
    return rows


def rates_table(
    k_star_grid: Sequence[int] = (1, 2, 3, 4),
    k0: int = 1,
    gamma: float = 1.0,
    n_grid: Sequence[int] = (250, 500, 1000, 2000, 10_000, 100_000, 1_000_000),
    experiment_csv=None,
    out=None,
) -> List[dict]:
    """Rate calculators on a grid of ``n``, optionally next to mean empirical W1 errors.

    Columns: ``n``, ``kbar``, ``higher_order``, ``exact_k{k}``, ``adaptive_k{k}``
    for each ``k`` in ``k_star_grid``, and ``w1_{method}`` when
    ``experiment_csv`` is given (blank where that ``n`` was not run).
    """
    if any(k < 1 for k in k_star_grid) or any(n < 3 for n in n_grid):
        raise ConfigError("need k* >= 1 and n >= 3")
    means, methods = {}, []
    if experiment_csv is not None:
        means = mean_errors(read_results(experiment_csv))
        methods = sorted({m for m, _ in means})
    rows = []
    for n in n_grid:
        kb = kbar(n)
        row = {"n": n, "kbar": kb, "higher_order": rate_higher_order(n)}
        for k in k_star_grid:
            row[f"exact_k{k}"] = rate_exact(k, kb, n) if k <= kb else ""
        for k in k_star_grid:
            row[f"adaptive_k{k}"] = rate_adaptive(k, k0, gamma, kb, n) if k0 <= k <= kb else ""
        for m in methods:
            row[f"w1_{m}"] = means.get((m, n), "")
        rows.append(row)
    if out is not None:
        sink = _CsvSink(out, list(rows[0]))
        for row in rows:
            sink.write({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
        sink.close()
    return rows
