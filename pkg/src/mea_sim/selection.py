"""Switched-element selection, training over resampled users, and the T-test stopping rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InvalidArgument
from .geometry import angular_distance_deg
from .network import Scene
from .propagation import N_MEA_ELEMENTS, MeaConfig


@dataclass(frozen=True)
class SelectionCandidate:
    element_idx: int
    s_ue: int
    r_total: float


@dataclass(frozen=True)
class TrainingRecord:
    counts: np.ndarray  # (4, rounds)
    chosen: int
    truth: int

    @property
    def rounds(self) -> int:
        return self.counts.shape[1]

    @property
    def correct(self) -> bool:
        return self.chosen == self.truth


@dataclass(frozen=True)
class TTestOutcome:
    rounds_needed: Optional[int]  # None: not reached within max_rounds
    final_t: float
    p_value: float
    alpha: float

    @property
    def reached(self) -> bool:
        return self.rounds_needed is not None


class WelchResult(NamedTuple):
    statistic: float
    df: float


def evaluate_candidates(scene: Scene, mea: MeaConfig) -> list[SelectionCandidate]:
    """Score each element alone: served-UE count and total throughput."""
    out = []
    for i, pattern in enumerate(mea.elements):
        res = scene.evaluate(pattern)
        out.append(SelectionCandidate(i, res.served, res.total_bps))
    return out


def served_counts(scene: Scene, mea: MeaConfig) -> np.ndarray:
    return np.array([scene.served(p) for p in mea.elements])


def _argmax_first(values: Sequence[float]) -> int:
    return int(np.argmax(np.asarray(values, dtype=float)))


def select_centralized(candidates: Sequence[SelectionCandidate]) -> int:
    """Element with the highest total throughput; lowest index on ties."""
    _check_candidates(candidates)
    return candidates[_argmax_first([c.r_total for c in candidates])].element_idx


def select_distributed(candidates: Sequence[SelectionCandidate]) -> int:
    """Element serving the most UEs; lowest index on ties."""
    _check_candidates(candidates)
    return candidates[_argmax_first([c.s_ue for c in candidates])].element_idx


def _check_candidates(candidates):
    if len(candidates) != N_MEA_ELEMENTS:
        raise InvalidArgument(f"expected {N_MEA_ELEMENTS} candidates, got {len(candidates)}")


def truth_element_by_angle(scene: Scene, mea: MeaConfig) -> int:
    """Element whose boresight is closest to the SCBS-to-hotspot-centre bearing."""
    off = angular_distance_deg(np.array(mea.boresights), scene.hotspot_bearing_deg)
    return int(np.argmin(off))


def run_training(scene: Scene, mea: MeaConfig, k: int, rng: np.random.Generator) -> TrainingRecord:
    """``k`` rounds, each with a fresh UE drop; pick the best mean served count.

    Round ``j`` only depends on the first ``j`` draws from ``rng``, so a longer
    run on the same seed extends a shorter one.
    """
    if k < 1:
        raise InvalidArgument(f"rounds must be >= 1, got {k}")
    counts = np.column_stack([served_counts(scene.resample_ues(rng), mea) for _ in range(k)])
    return TrainingRecord(counts, chosen_from_counts(counts), truth_element_by_angle(scene, mea))


def chosen_from_counts(counts: np.ndarray) -> int:
    return _argmax_first(counts.mean(axis=1))


def welch_t(sample_a, sample_b) -> WelchResult:
    """Unequal-variance two-sample t statistic and Welch-Satterthwaite df.

    Two zero-variance samples give +inf, 0 or -inf depending on the sign of
    the mean difference (df is then NaN).
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InvalidArgument("Welch t needs at least two values per sample")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    if va + vb == 0:
        return WelchResult(math.copysign(math.inf, diff) if diff else 0.0, math.nan)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return WelchResult(diff / math.sqrt(va + vb), df)


def one_sided_p(result: WelchResult) -> float:
    """P(T > t) under the null."""
    t, df = result
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    if math.isnan(df):
        return 0.5
    return float(stats.t.sf(t, df))


def compare_leader(counts: np.ndarray, mode: str = "runner_up") -> WelchResult:
    """Welch t of the element with the highest running mean against the rest.

    ``mode`` ``"runner_up"`` compares against the second-best element,
    ``"pooled"`` against all other elements' samples together.
    """
    means = counts.mean(axis=1)
    best = _argmax_first(means)
    if mode == "runner_up":
        rest = means.copy()
        rest[best] = -np.inf
        other = counts[_argmax_first(rest)]
    elif mode == "pooled":
        other = np.delete(counts, best, axis=0).ravel()
    else:
        raise InvalidArgument(f"unknown T-test mode {mode!r}")
    return welch_t(counts[best], other)


def rounds_to_significance(scene: Scene, mea: MeaConfig, rng: np.random.Generator,
                           alpha: float = 0.05, max_rounds: int = 100,
                           mode: str = "runner_up") -> TTestOutcome:
    """Add training rounds until the leading element beats the rest at level ``alpha``."""
    if max_rounds < 2:
        raise InvalidArgument(f"max_rounds must be >= 2, got {max_rounds}")
    if not 0 < alpha < 1:
        raise InvalidArgument(f"alpha must be in (0, 1), got {alpha}")
    cols = []
    res, p = WelchResult(0.0, math.nan), 1.0
    for k in range(1, max_rounds + 1):
        cols.append(served_counts(scene.resample_ues(rng), mea))
        if k < 2:
            continue
        res = compare_leader(np.column_stack(cols), mode)
        p = one_sided_p(res)
        if p < alpha:
            return TTestOutcome(k, res.statistic, p, alpha)
    return TTestOutcome(None, res.statistic, p, alpha)
