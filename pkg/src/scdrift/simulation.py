"""Post-hoc selective classification on a temporal stream.

The monthly loop, for months ``i = 2..N`` (1-based position in the stream):

1. calibrate a threshold on the *unlabeled* pool of uncertainty scores from
   earlier months, aiming to reject ``T = i * rho`` pool samples;
2. abstain on every sample of month ``i`` the threshold selects;
3. score the retained samples (F1, positive class = malware);
4. append the month's scores to the pool.

Two threshold routines exist. ``cutoff`` takes the T-th largest pool value
``c`` and rejects ``u > c``. ``band`` folds the T largest pool values into
``[lo, hi]`` starting from ``lo = 1.0, hi = 0.0`` and rejects ``lo <= u <= hi``.
Both operate on canonical uncertainty (higher = more uncertain).

``T = i * rho`` is measured against a pool holding only ``i - 1`` months, so
early months target more than ``rho`` rejections; when ``T`` exceeds the pool
it is capped at the pool size and the cap is recorded on the month.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    NoDefinedMonths,
    QuotaExceedsPool,
    TooFewMonths,
    UnknownRejectedId,
)
from .scorers import OrientationRegistry, uncertainties
from .stream import MonthBatch, TemporalStream

logger = logging.getLogger(__name__)

METHOD_ALIASES = {
    "cutoff": "cutoff",
    "single-cutoff": "cutoff",
    "ood": "cutoff",
    "band": "band",
    "softmax": "band",
}

DEFAULT_COVERAGE_GRID: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 21))
DEFAULT_RHO_SWEEP: tuple[int, ...] = tuple(range(100, 1501, 100))


@dataclass(frozen=True)
class RejectionConfig:
    quota_rho: int
    method: str = "cutoff"
    score_name: str = "msp_u"
    coverage_grid: tuple[float, ...] = DEFAULT_COVERAGE_GRID
    window: int | None = None  # months kept in the pool; None = all

    def __post_init__(self) -> None:
        if self.quota_rho < 1:
            raise ValueError("quota_rho must be >= 1")
        if self.method not in METHOD_ALIASES:
            raise ValueError(f"unknown rejection method {self.method!r}")
        object.__setattr__(self, "method", METHOD_ALIASES[self.method])
        grid = tuple(float(c) for c in self.coverage_grid)
        if any(not 0.0 < c <= 1.0 for c in grid) or list(grid) != sorted(set(grid)):
            raise ValueError("coverage_grid must be strictly ascending within (0, 1]")
        object.__setattr__(self, "coverage_grid", grid)
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class MonthOutcome:
    month_index: int
    position: int  # 1-based position in the stream
    n_samples: int
    pool_size: int
    requested_quota: int
    applied_quota: int
    threshold_low: float | None
    threshold_high: float | None
    rejections: int
    retained_count: int
    retained_f1: float | None
    baseline_f1: float | None
    rejected_ids: tuple[str, ...] = field(default=(), repr=False)

    @property
    def capped(self) -> bool:
        return self.applied_quota < self.requested_quota

    @property
    def realized_fraction(self) -> float | None:
        return self.rejections / self.n_samples if self.n_samples else None


@dataclass(frozen=True)
class SimulationTrace:
    config: RejectionConfig
    months: tuple[MonthOutcome, ...]

    def __len__(self) -> int:
        return len(self.months)

    @property
    def rejections(self) -> list[int]:
        return [m.rejections for m in self.months]

    @property
    def retained_f1(self) -> list[float | None]:
        return [m.retained_f1 for m in self.months]

    @property
    def baseline_f1(self) -> list[float | None]:
        return [m.baseline_f1 for m in self.months]


# -- threshold subroutines --------------------------------------------------


def ood_threshold(pool: Sequence[float], T: int) -> float:
    """Cut-off such that the T largest pool scores are rejected by ``u > c``.

    With ties at the cut-off fewer than T pool values lie strictly above it.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if T > len(pool):
        raise QuotaExceedsPool(f"quota {T} exceeds pool of {len(pool)}")
    ordered = np.sort(np.asarray(pool, dtype=float))[::-1]
    return float(ordered[T - 1])


def softmax_thresholds(pool: Sequence[float], T: int) -> tuple[float, float]:
    """Band ``(lo, hi)`` spanned by the T most uncertain pool scores.

    ``T = 0`` yields the empty band ``(1.0, 0.0)``. For T >= 1 the band is the
    min and max of the top T, so scores outside [0, 1] are not clipped.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if T > len(pool):
        raise QuotaExceedsPool(f"quota {T} exceeds pool of {len(pool)}")
    if T == 0:
        return 1.0, 0.0
    top = np.sort(np.asarray(pool, dtype=float))[::-1][:T]
    return float(top[-1]), float(top[0])


# -- F1 ---------------------------------------------------------------------


def _f1(y_true: np.ndarray, y_pred: np.ndarray) -> float | None:
    if len(y_true) == 0:
        return None
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    if tp + fp + fn == 0:
        return None
    return 2 * tp / (2 * tp + fp + fn)


def _fnr(y_true: np.ndarray, y_pred: np.ndarray) -> float | None:
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    if tp + fn == 0:
        return None
    return fn / (tp + fn)


def _labels(batch: MonthBatch) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.fromiter((r.y_true for r in batch.records), dtype=np.int8, count=len(batch))
    y_pred = np.fromiter((r.y_pred for r in batch.records), dtype=np.int8, count=len(batch))
    return y_true, y_pred


def monthly_f1(batch: MonthBatch, rejected: Iterable[str] = ()) -> float | None:
    """F1 over the non-rejected records; ``None`` when undefined.

    Undefined means nothing was retained, or the retained set has no true
    positives, false positives or false negatives.
    """
    rejected = set(rejected)
    unknown = rejected - set(batch.sample_ids)
    if unknown:
        raise UnknownRejectedId(f"ids not in month {batch.month_index}: {sorted(unknown)}")
    keep = np.array([r.sample_id not in rejected for r in batch.records], dtype=bool)
    y_true, y_pred = _labels(batch)
    return _f1(y_true[keep], y_pred[keep])


def monthly_fnr(batch: MonthBatch) -> float | None:
    return _fnr(*_labels(batch))


# -- the protocol -----------------------------------------------------------


def _simulate(
    stream: TemporalStream,
    cfg: RejectionConfig,
    registry: OrientationRegistry | None,
    quota_for: Callable[[int, int], int],
) -> SimulationTrace:
    if len(stream.batches) < 2:
        raise TooFewMonths(f"need >= 2 months, stream has {len(stream.batches)}")
    scores = [uncertainties(b.records, cfg.score_name, registry) for b in stream.batches]
    history = [scores[0]]
    months = []

    for pos in range(2, len(stream.batches) + 1):
        batch = stream.batches[pos - 1]
        current = scores[pos - 1]
        recent = history if cfg.window is None else history[-cfg.window:]
        pool = np.concatenate(recent)
        requested = quota_for(pos, len(pool))
        applied = min(requested, len(pool))

        lo = hi = None
        if cfg.method == "cutoff":
            if applied >= 1:
                lo = ood_threshold(pool, applied)
                mask = current > lo
            else:
                mask = np.zeros(len(current), dtype=bool)
        else:
            lo, hi = softmax_thresholds(pool, applied)
            mask = (lo <= current) & (current <= hi)

        y_true, y_pred = _labels(batch)
        keep = ~mask
        months.append(
            MonthOutcome(
                month_index=batch.month_index,
                position=pos,
                n_samples=len(batch),
                pool_size=len(pool),
                requested_quota=requested,
                applied_quota=applied,
                threshold_low=lo,
                threshold_high=hi,
                rejections=int(mask.sum()),
                retained_count=int(keep.sum()),
                retained_f1=_f1(y_true[keep], y_pred[keep]),
                baseline_f1=_f1(y_true, y_pred),
                rejected_ids=tuple(
                    r.sample_id for r, m in zip(batch.records, mask.tolist()) if m
                ),
            )
        )
        history.append(current)
    return SimulationTrace(cfg, tuple(months))


def run_posthoc_simulation(
    stream: TemporalStream,
    cfg: RejectionConfig,
    registry: OrientationRegistry | None = None,
) -> SimulationTrace:
    """Run the monthly abstention loop with quota ``T = i * rho``."""
    rho = cfg.quota_rho
    trace = _simulate(stream, cfg, registry, lambda pos, _pool: pos * rho)
    capped = [m.month_index for m in trace.months if m.capped]
    if capped:
        logger.warning(
            "rho=%d: quota capped at pool size in month(s) %s", rho, capped
        )
    return trace


def _pool_fraction_quota(coverage: float) -> Callable[[int, int], int]:
    # exact decimal arithmetic so e.g. (1 - 0.95) * 100 is 5, not 5.000000000000004
    reject = 1 - Fraction(repr(coverage))

    def quota(_pos: int, pool_size: int) -> int:
        return math.ceil(reject * pool_size)

    return quota


# -- SC-derived metrics -----------------------------------------------------


def _defined_pairs(trace: SimulationTrace) -> list[tuple[float, float]]:
    return [
        (m.retained_f1, m.baseline_f1)
        for m in trace.months
        if m.retained_f1 is not None and m.baseline_f1 is not None
    ]


def benefit_fraction(trace: SimulationTrace) -> float:
    """Percentage of months where abstention strictly improves F1.

    Months with an undefined F1 on either side are left out entirely.
    """
    pairs = _defined_pairs(trace)
    if not pairs:
        raise NoDefinedMonths("no month has both F1 values defined")
    return 100.0 * sum(after > before for after, before in pairs) / len(pairs)


def rejection_bias(trace: SimulationTrace, rho: int | None = None) -> float:
    if not trace.months:
        raise EmptyInput("empty trace")
    rho = trace.config.quota_rho if rho is None else rho
    return float(np.mean([r - rho for r in trace.rejections]))


def rejection_volatility(trace: SimulationTrace) -> float:
    if not trace.months:
        raise EmptyInput("empty trace")
    return float(np.std(trace.rejections))


@dataclass(frozen=True)
class F1RiskCurve:
    coverage: tuple[float, ...]
    mean_f1: tuple[float, ...]

    @property
    def risk(self) -> tuple[float, ...]:
        return tuple(1.0 - f for f in self.mean_f1)

    @property
    def area(self) -> float:
        """Trapezoid area under ``1 - F1(c)`` normalised by the coverage span, x100."""
        span = self.coverage[-1] - self.coverage[0]
        return 100.0 * float(np.trapezoid(self.risk, self.coverage)) / span


def f1_risk_curve(
    stream: TemporalStream,
    cfg: RejectionConfig,
    registry: OrientationRegistry | None = None,
) -> F1RiskCurve:
    """Mean retained F1 at each target coverage of ``cfg.coverage_grid``.

    At coverage ``c`` the monthly quota is ``ceil((1 - c) * |pool|)``.
    """
    grid = cfg.coverage_grid
    if len(grid) < 2 or grid[-1] != 1.0:
        raise ValueError("coverage grid needs >= 2 points and must end at 1.0")
    means = []
    for c in grid:
        trace = _simulate(stream, cfg, registry, _pool_fraction_quota(c))
        defined = [f for f in trace.retained_f1 if f is not None]
        if not defined:
            raise NoDefinedMonths(f"no month has a defined retained F1 at coverage {c}")
        means.append(float(np.mean(defined)))
    return F1RiskCurve(grid, tuple(means))


def aurc_f1_star(
    stream: TemporalStream,
    cfg: RejectionConfig,
    registry: OrientationRegistry | None = None,
) -> float:
    return f1_risk_curve(stream, cfg, registry).area


def summarize(trace: SimulationTrace) -> dict[str, float | None]:
    try:
        bf = benefit_fraction(trace)
    except NoDefinedMonths:
        bf = None
    return {
        "bf_star": bf,
        "delta_rej": rejection_bias(trace),
        "sigma_rej": rejection_volatility(trace),
    }
