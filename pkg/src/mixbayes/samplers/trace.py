"""Sampler configuration, posterior traces and their summaries."""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..core import AtomicMixture
from ..metrics import wasserstein
from ..priors import ConfigError


def derive_seed(*parts) -> int:
    """64-bit seed from an ordered tuple of labels (blake2b of their repr)."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class SamplerConfig:
    """Chain length, tempering and proposal settings.

    ``alpha`` is the fractional order: every acceptance ratio uses
    ``alpha * log-likelihood``. ``split_merge_prob`` is the probability
    that the dimension-changing move of a sweep is a split/merge rather
    than a birth/death.
    """

    iterations: int = 21_000
    burn_in: int = 1_000
    thin: int = 20
    alpha: Optional[float] = 1.0
    seed: int = 0
    split_merge_prob: float = 0.5
    split_scale: float = 1.0
    atom_step: float = 2.0
    weight_concentration: Optional[float] = None
    init_k: Optional[int] = None
    record_log_ratios: bool = False
    audit: bool = False
    # DP sampler
    m_aux: int = 3
    dp_atom_step: float = 0.5
    dp_atom_update: str = "exact"
    init_clusters: int = 10

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ConfigError("thin must be positive")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0 <= self.split_merge_prob <= 1:
            raise ConfigError("split_merge_prob must be a probability")
        if self.m_aux < 1:
            raise ConfigError("m_aux must be positive")
        if self.dp_atom_update not in ("exact", "rw"):
            raise ConfigError("dp_atom_update must be 'exact' or 'rw'")

    @property
    def n_saved(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    @classmethod
    def desk(cls, **kw) -> "SamplerConfig":
        return cls(**kw)

    @classmethod
    def paper_scale(cls, **kw) -> "SamplerConfig":
        kw = {"iterations": 105_000, "burn_in": 5_000, "thin": 100, **kw}
        return cls(**kw)

    @classmethod
    def from_dict(cls, data: dict) -> "SamplerConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown sampler fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MoveStats:
    proposed: Counter = field(default_factory=Counter)
    accepted: Counter = field(default_factory=Counter)
    invalid: Counter = field(default_factory=Counter)
    overflow: int = 0
    audit_failures: int = 0
    log_ratios: List[tuple] = field(default_factory=list)

    def acceptance_rate(self, move: str) -> float:
        p = self.proposed[move]
        return self.accepted[move] / p if p else float("nan")


@dataclass
class PosteriorTrace:
    """Thinned post-burn-in states of a chain.

    For the MFM sampler ``sizes`` holds ``k``; for the DP sampler it holds
    the number of clusters ``T_n`` and the mixtures are the empirical
    cluster-frequency measures.
    """

    kind: str
    iterations: List[int]
    sizes: np.ndarray
    log_post: np.ndarray
    atoms: List[np.ndarray]
    weights: List[np.ndarray]
    burn_in: int
    thin: int
    seed: int
    stats: MoveStats = field(default_factory=MoveStats)

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def states(self) -> List[AtomicMixture]:
        return [AtomicMixture(a, w) for a, w in zip(self.atoms, self.weights)]

    def mixture(self, i: int) -> AtomicMixture:
        return AtomicMixture(self.atoms[i], self.weights[i])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "k_or_T", "log_post", "atoms_json", "weights_json"])
            for it, s, lp, a, w in zip(self.iterations, self.sizes, self.log_post, self.atoms, self.weights):
                writer.writerow([
                    it, int(s), repr(float(lp)),
                    json.dumps([float(v) for v in a]), json.dumps([float(v) for v in w]),
                ])

    @classmethod
    def from_csv(cls, path, kind: str = "mfm") -> "PosteriorTrace":
        its, sizes, lps, atoms, weights = [], [], [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                its.append(int(row["iter"]))
                sizes.append(int(row["k_or_T"]))
                lps.append(float(row["log_post"]))
                atoms.append(np.array(json.loads(row["atoms_json"])))
                weights.append(np.array(json.loads(row["weights_json"])))
        thin = its[1] - its[0] if len(its) > 1 else 1
        burn = its[0] - thin if its else 0
        return cls(kind, its, np.array(sizes), np.array(lps), atoms, weights, burn, thin, 0)


@dataclass
class PosteriorSummary:
    pmf: Dict[int, float]
    mode: int
    modal_mixture: AtomicMixture
    mean_w1: Optional[float] = None

    def pmf_vector(self, max_size: int = 10) -> np.ndarray:
        """Probabilities of sizes ``1..max_size-1`` and ``>= max_size``."""
        out = np.zeros(max_size)
        for s, p in self.pmf.items():
            out[min(s, max_size) - 1] += p
        return out


def posterior_summaries(
    trace: PosteriorTrace, reference: Optional[AtomicMixture] = None
) -> PosteriorSummary:
    """Posterior pmf of the size, its mode and the modal mixture.

    The modal mixture is the saved state with the highest log posterior
    among states whose size equals the posterior mode (ties go to the
    smaller size).
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    counts = Counter(int(s) for s in trace.sizes)
    total = sum(counts.values())
    pmf = {s: counts[s] / total for s in sorted(counts)}
    mode = max(sorted(counts), key=lambda s: counts[s])
    idx = np.flatnonzero(trace.sizes == mode)
    best = idx[np.argmax(trace.log_post[idx])]
    modal = trace.mixture(best)
    mean_w1 = None
    if reference is not None:
        mean_w1 = float(np.mean([wasserstein(m, reference, 1) for m in trace.states]))
    return PosteriorSummary(pmf, mode, modal, mean_w1)
