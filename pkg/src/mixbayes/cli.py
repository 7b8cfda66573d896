"""Command-line entry point ``mixbayes``.

Exit codes: 0 on success, 2 on configuration errors, 3 when some
experiment cells failed (their rows carry the error message).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .core import AtomicMixture, Dataset, sample
from .experiments import (
    K_GRID,
    K_METHODS,
    ExperimentPlan,
    builtin_truth,
    rates_table,
    run_experiment,
    run_k_experiment,
)
from .metrics import wasserstein
from .moments import fit_mixture_from_moments, median_denoised_estimator
from .priors import ConfigError, DpPriorSpec, PriorSpec
from .samplers.dp import run_dp
from .samplers.em import em_map
from .samplers.mfm import run_mfm
from .samplers.trace import SamplerConfig, posterior_summaries

EXIT_CONFIG = 2
EXIT_PARTIAL = 3

FIT_METHODS = ("mfm", "mfm_vary", "mfm_const", "dp", "dp_vary", "dp_const", "map", "moments")
_PRESETS = {
    "mfm_vary": {"family": "poisson", "rate": "1/n"},
    "mfm_const": {"family": "poisson", "rate": "const:0.01"},
    "dp_vary": {"kappa": "1/(n log n)"},
    "dp_const": {"kappa": "const:0.01"},
}


def _int_list(text: str):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from None


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def _sampler(overrides: dict, paper_scale: bool, seed=None) -> SamplerConfig:
    factory = SamplerConfig.paper_scale if paper_scale else SamplerConfig.desk
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(SamplerConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown sampler fields: {sorted(unknown)}")
    if seed is not None:
        overrides["seed"] = seed
    return factory(**overrides)


class _Group(click.Group):
    """Maps configuration errors to exit code 2."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ConfigError, FileNotFoundError) as exc:
            click.echo(f"config error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """Bayesian estimation of Gaussian location mixtures."""


@main.command()
@click.option("--case", "case", default=None, help="Built-in truth 1..4.")
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), default=None,
              help="JSON mixing measure {\"atoms\": [...], \"weights\": [...]}.")
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output directory or .txt path.")
def gen(case, truth_path, n, seed, out):
    """Draw a synthetic dataset (plain text plus a JSON sidecar)."""
    if (case is None) == (truth_path is None):
        raise ConfigError("give exactly one of --case and --truth")
    if case is not None:
        truth, label = builtin_truth(case), f"case{str(case).lower().removeprefix('case')}"
    else:
        truth, label = AtomicMixture.from_dict(_read_json(truth_path)), "custom"
    out = Path(out)
    path = out if out.suffix == ".txt" else out / f"{label}_n{n}_seed{seed}.txt"
    sample(truth, n, seed).save(path)
    click.echo(str(path))


@main.command()
@click.option("--method", type=click.Choice(FIT_METHODS), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Prior JSON; may carry \"sampler\" and \"k\" entries.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Trace CSV for samplers, estimate JSON for map/moments.")
@click.option("--estimate", "estimate_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the point estimate as JSON (samplers).")
@click.option("--seed", type=int, default=None)
@click.option("--paper-scale", is_flag=True, help="105,000 iterations, burn-in 5,000, thin 100.")
def fit(method, data_path, config_path, out, estimate_path, seed, paper_scale):
    """Fit one method to a dataset."""
    data = Dataset.load(data_path)
    config = _read_json(config_path) if config_path else {}
    sampler_cfg = config.pop("sampler", {})
    k = config.pop("k", None)
    if method in ("map", "moments"):
        if k is None:
            raise ConfigError(f"method {method!r} needs \"k\" in the config")
        L = float(config.get("L", 6.0))
        if method == "map":
            nu = em_map(data, int(k), dirichlet=_symmetric(config.get("dirichlet", 1.0)), bound=L,
                        n_restarts=int(config.get("restarts", 10)),
                        seed=seed if seed is not None else 0).mixture
        else:
            est = median_denoised_estimator(data, int(k), config.get("eta"))
            nu = fit_mixture_from_moments(est, int(k), L)
        Path(out).write_text(nu.to_json())
        click.echo(nu.to_json())
        return
    cfg = _sampler(sampler_cfg, paper_scale, seed)
    base = method.split("_")[0]
    prior_dict = {**_PRESETS.get(method, {}), **config}
    if base == "mfm":
        trace = run_mfm(data, PriorSpec.from_dict(prior_dict), cfg)
    else:
        prior_dict.pop("family", None)
        trace = run_dp(data, DpPriorSpec.from_dict(prior_dict), cfg)
    trace.to_csv(out)
    summary = posterior_summaries(trace)
    if estimate_path:
        Path(estimate_path).write_text(summary.modal_mixture.to_json())
    pmf = ", ".join(f"{s}: {p:.3f}" for s, p in summary.pmf.items())
    click.echo(f"mode {summary.mode}; pmf {{{pmf}}}")


def _symmetric(value) -> float:
    if isinstance(value, (list, tuple)):
        if len(set(value)) != 1:
            raise ConfigError("only symmetric Dirichlet weight priors are supported")
        return float(value[0])
    return float(value)


@main.command(name="eval")
@click.option("--estimate", "estimate_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--q", type=click.FloatRange(min=1.0), default=1.0, show_default=True)
def evaluate(estimate_path, truth_path, q):
    """Print W_q between two mixing measures stored as JSON."""
    try:
        est = AtomicMixture.from_dict(_read_json(estimate_path))
        truth_data = _read_json(truth_path)
        truth = AtomicMixture.from_dict(truth_data.get("truth", truth_data))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad mixture JSON: {exc}") from None
    click.echo(repr(wasserstein(est, truth, q)))


@main.command()
@click.option("--plan", "plan_path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--paper-scale", is_flag=True)
@click.option("--quiet", is_flag=True)
def experiment(plan_path, out, paper_scale, quiet):
    """Run an experiment plan and write one CSV row per cell."""
    plan = ExperimentPlan.from_json(plan_path, paper_scale)
    progress = None if quiet else (lambda r: click.echo(
        f"{r.method} n={r.n} rep={r.replicate} w1={r.w1_error:.4f}{' ERROR ' + r.error if r.error else ''}",
        err=True))
    rows = run_experiment(plan, out, progress)
    if any(r.error for r in rows):
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--n-grid", default=",".join(map(str, K_GRID)), show_default=True)
@click.option("--methods", default=",".join(K_METHODS), show_default=True)
@click.option("--replicates", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--paper-scale", is_flag=True)
@click.option("--quiet", is_flag=True)
def kexp(out, n_grid, methods, replicates, seed, paper_scale, quiet):
    """Posterior of the number of components on the (-2, 0, 2) truth."""
    progress = None if quiet else (lambda r: click.echo(
        f"{r.method} n={r.n} rep={r.replicate} mode={r.mode}", err=True))
    rows = run_k_experiment(_int_list(n_grid), tuple(m for m in methods.split(",") if m),
                            replicates, seed, _sampler({}, paper_scale), out=out, progress=progress)
    if any(r.error for r in rows):
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--k-star", default="1,2,3,4", show_default=True)
@click.option("--k0", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--n-grid", default="250,500,1000,2000,10000,100000,1000000", show_default=True)
@click.option("--experiment", "experiment_csv", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Result CSV whose mean W1 errors are added as columns.")
def rates(out, k_star, k0, gamma, n_grid, experiment_csv):
    """Tabulate the contraction-rate formulas on a grid of n."""
    rows = rates_table(_int_list(k_star), k0, gamma, _int_list(n_grid), experiment_csv, out)
    click.echo(f"{len(rows)} rows -> {out}")


if __name__ == "__main__":  # pragma: no cover
    main()
