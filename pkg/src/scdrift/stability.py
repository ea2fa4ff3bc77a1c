"""Temporal stability of monthly performance and Pareto comparison of methods."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AllUndefined, EmptyInput, TooFewPoints, UndefinedPillar


@dataclass(frozen=True)
class MonthlySeries:
    """Per-month values in stream order; ``None`` marks an undefined month."""

    values: tuple[float | None, ...]
    label: str = "f1"

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def defined(self) -> list[float]:
        return [v for v in self.values if v is not None]


def _as_series(series: MonthlySeries | Sequence[float | None]) -> MonthlySeries:
    return series if isinstance(series, MonthlySeries) else MonthlySeries(tuple(series))


def f1_volatility(series: MonthlySeries | Sequence[float | None]) -> float:
    """Population standard deviation over the defined months."""
    values = _as_series(series).defined
    if not values:
        raise AllUndefined("series has no defined values")
    return float(np.std(values))


def mann_kendall_tau(
    series: MonthlySeries | Sequence[float | None], variant: str = "a"
) -> float:
    """Mann-Kendall rank correlation of the series against time.

    ``S = sum_{i<j} sgn(x_j - x_i)`` over defined months. Variant ``"a"``
    divides by ``n(n-1)/2``; ``"b"`` uses the tie-corrected denominator
    ``sqrt((n0 - n1) * n0)`` where ``n1`` counts tied value pairs (time has no
    ties). A constant series has tau-b 0 by convention.
    """
    x = np.asarray(_as_series(series).defined, dtype=float)
    n = len(x)
    if n < 2:
        raise TooFewPoints(f"need >= 2 defined values, got {n}")
    diffs = x[None, :] - x[:, None]
    s = int(np.sign(diffs[np.triu_indices(n, k=1)]).sum())
    n0 = n * (n - 1) // 2
    if variant == "a":
        return s / n0
    if variant == "b":
        _, counts = np.unique(x, return_counts=True)
        n1 = int(sum(t * (t - 1) // 2 for t in counts.tolist()))
        denom = math.sqrt((n0 - n1) * n0)
        return s / denom if denom > 0 else 0.0
    raise ValueError(f"unknown tau variant {variant!r}")


@dataclass(frozen=True)
class PillarVector:
    method_id: str
    f1_mean: float
    f1_volatility: float
    aurc: float
    tau: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau outside [-1, 1]: {self.tau}")

    def oriented(self) -> tuple[float, float, float, float]:
        """Pillars flipped so that larger is better on every axis."""
        return (self.f1_mean, -self.f1_volatility, -self.aurc, self.tau)


def aggregate_pillars(
    per_dataset: Iterable[Sequence[float | None]], method_id: str
) -> PillarVector:
    """Average (f1_mean, f1_volatility, aurc, tau) rows across datasets.

    An undefined pillar on any dataset makes the method unrankable.
    """
    rows = [tuple(r) for r in per_dataset]
    if not rows:
        raise EmptyInput(f"{method_id}: no per-dataset rows")
    for row in rows:
        if len(row) != 4:
            raise ValueError("each row must hold exactly four pillars")
        if any(v is None or not math.isfinite(v) for v in row):
            raise UndefinedPillar(f"{method_id}: undefined pillar value in {row}")
    means = np.mean(np.asarray(rows, dtype=float), axis=0)
    return PillarVector(method_id, *(float(m) for m in means))


def dominates(a: PillarVector, b: PillarVector) -> bool:
    """True if ``a`` is at least as good as ``b`` everywhere and better somewhere."""
    va, vb = a.oriented(), b.oriented()
    return all(x >= y for x, y in zip(va, vb)) and any(x > y for x, y in zip(va, vb))


def pareto_front(entries: Sequence[PillarVector]) -> list[tuple[str, bool]]:
    """Flag each entry as non-dominated (True) or dominated (False), input order."""
    return [
        (e.method_id, not any(dominates(o, e) for j, o in enumerate(entries) if j != i))
        for i, e in enumerate(entries)
    ]
