"""Posterior samplers (MFM reversible jump, DP Neal-8) and the EM baseline."""

from .dp import DpState, dp_log_posterior, initial_dp_state, neal8_step, run_dp
from .em import EmptyComponentWarning, EmResult, em_log_posterior, em_map
from .mfm import (
    MfmState,
    MfmTarget,
    initial_state,
    merge_components,
    rjmcmc_step,
    run_mfm,
    split_component,
)
from .trace import (
    MoveStats,
    PosteriorSummary,
    PosteriorTrace,
    SamplerConfig,
    derive_seed,
    posterior_summaries,
)

__all__ = [
    "DpState", "dp_log_posterior", "initial_dp_state", "neal8_step", "run_dp",
    "EmptyComponentWarning", "EmResult", "em_log_posterior", "em_map",
    "MfmState", "MfmTarget", "initial_state", "merge_components", "rjmcmc_step",
    "run_mfm", "split_component",
    "MoveStats", "PosteriorSummary", "PosteriorTrace", "SamplerConfig",
    "derive_seed", "posterior_summaries",
]
