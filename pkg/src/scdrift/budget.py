"""Label-budget sample selection.

* :func:`select_uncertain` - the monthly active-learning query: the B most
  uncertain records of a batch.
* :func:`stratk_sample` - label-ratio preserving random subsample of the
  initial training pool.
* :func:`uncertainty_fold_sample` - per-fold top-uncertainty subsample of the
  initial pool, given uncertainties from externally trained fold models.

Random draws use numpy's PCG64 generator seeded with the recorded seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import BadFoldAssignment, BudgetExceedsPool, FoldTooSmall
from .scorers import OrientationRegistry, uncertainties
from .stream import MonthBatch

DEFAULT_FOLDS = 6


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[str, ...]
    scheme: str  # "top-uncertain" | "stratk" | "uncertainty-folds"
    budget: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(set(self.selected_ids)) != len(self.selected_ids):
            raise ValueError("selection contains duplicate ids")


def _top_indices(values: Sequence[float], k: int) -> list[int]:
    """Indices of the k largest values; ties go to the earlier index."""
    order = np.argsort(-np.asarray(values, dtype=float), kind="stable")
    return order[:k].tolist()


def select_uncertain(
    batch: MonthBatch,
    score_name: str,
    budget: int,
    registry: OrientationRegistry | None = None,
) -> SelectionResult:
    if budget < 1:
        raise ValueError("budget must be positive")
    u = uncertainties(batch.records, score_name, registry)
    chosen = _top_indices(u, budget)
    ids = tuple(batch.records[i].sample_id for i in chosen)
    return SelectionResult(ids, "top-uncertain", budget)


def largest_remainder(total: int, weights: Mapping[int, int]) -> dict[int, int]:
    """Apportion ``total`` seats across classes proportionally to ``weights``.

    Leftover seats go to the largest fractional remainders; ties prefer the
    larger class, then the higher class label.
    """
    size = sum(weights.values())
    quotas = {k: Fraction(total * w, size) for k, w in weights.items()}
    seats = {k: math.floor(q) for k, q in quotas.items()}
    leftover = total - sum(seats.values())
    ranking = sorted(
        weights, key=lambda k: (quotas[k] - seats[k], weights[k], k), reverse=True
    )
    for k in ranking[:leftover]:
        seats[k] += 1
    return seats


def stratk_sample(
    pool: Sequence[tuple[str, int]], budget: int, seed: int
) -> SelectionResult:
    """Stratified draw of ``budget`` ids preserving the pool's label ratio.

    Selected ids are returned in pool order.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if budget > len(pool):
        raise BudgetExceedsPool(f"budget {budget} exceeds pool of {len(pool)}")
    by_class: dict[int, list[int]] = {}
    for idx, (_, label) in enumerate(pool):
        by_class.setdefault(int(label), []).append(idx)
    counts = largest_remainder(budget, {k: len(v) for k, v in by_class.items()})

    rng = np.random.Generator(np.random.PCG64(seed))
    chosen: list[int] = []
    for label in sorted(by_class):
        members = by_class[label]
        picks = rng.choice(len(members), size=counts[label], replace=False)
        chosen.extend(members[i] for i in picks.tolist())
    ids = tuple(pool[i][0] for i in sorted(chosen))
    return SelectionResult(ids, "stratk", budget, seed)


def assign_folds(
    sample_ids: Sequence[str], k: int, labels: Sequence[int] | None = None
) -> dict[str, int]:
    """Partition ids into k folds.

    Without labels: contiguous blocks in input order, earlier folds one larger
    when the split is uneven. With labels: each class is dealt round-robin so
    every fold keeps roughly the pool's label ratio.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if labels is None:
        blocks = np.array_split(np.arange(len(sample_ids)), k)
        return {sample_ids[i]: f for f, block in enumerate(blocks) for i in block.tolist()}
    if len(labels) != len(sample_ids):
        raise ValueError("labels and sample_ids differ in length")
    assignment: dict[str, int] = {}
    dealt = 0
    for label in sorted(set(labels)):
        for sid, lab in zip(sample_ids, labels):
            if lab == label:
                assignment[sid] = dealt % k
                dealt += 1
    return assignment


def fold_shares(budget: int, k: int) -> list[int]:
    base, extra = divmod(budget, k)
    return [base + (1 if f < extra else 0) for f in range(k)]


def uncertainty_fold_sample(
    pool: Sequence[tuple[str, float]],
    budget: int,
    k: int = DEFAULT_FOLDS,
    fold_assignment: Mapping[str, int] | None = None,
) -> SelectionResult:
    """Take the most uncertain ``budget / k`` ids from each fold, concatenated in fold order.

    ``pool`` holds each id's uncertainty as scored by the model that did not
    see its fold. Uneven splits give the extra share to the lowest folds.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = [sid for sid, _ in pool]
    if len(set(ids)) != len(ids):
        raise BadFoldAssignment("pool contains duplicate ids")
    if fold_assignment is None:
        fold_assignment = assign_folds(ids, k)
    if set(fold_assignment) != set(ids):
        raise BadFoldAssignment("fold assignment does not cover exactly the pool ids")

    folds: list[list[int]] = [[] for _ in range(k)]
    for idx, sid in enumerate(ids):
        f = fold_assignment[sid]
        if not isinstance(f, (int, np.integer)) or not 0 <= f < k:
            raise BadFoldAssignment(f"{sid!r} assigned to invalid fold {f!r}")
        folds[f].append(idx)

    selected: list[str] = []
    for f, (members, share) in enumerate(zip(folds, fold_shares(budget, k))):
        if len(members) < share:
            raise FoldTooSmall(f"fold {f} has {len(members)} ids, needs {share}")
        scores = [pool[i][1] for i in members]
        selected.extend(ids[members[j]] for j in _top_indices(scores, share))
    return SelectionResult(tuple(selected), "uncertainty-folds", budget)
