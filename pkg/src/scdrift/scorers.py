"""Native confidence and uncertainty functions for binary malware classifiers.

Three scorers are computed here:

* ``msp_u``    uncertainty from the maximum softmax probability,
               ``1 - |max(p, 1-p) - 0.5| / 0.5``.
* ``margin``   signed distance to a linear decision boundary, ``(w.x + b) / ||w||``.
               The stored score is its magnitude (a confidence).
* ``cade_ood`` centroid-distance deviation in latent space, normalised per class
               by a scaled median absolute deviation; the minimum over classes.

Any other score (for instance a contrastive pseudo-loss produced by an external
model) is consumed as-is from the stream. Downstream code never looks at raw
scores directly; it goes through :func:`to_uncertainty` with the registered
:class:`ScoreOrientation`, so that "higher means more uncertain" everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    DegenerateMad,
    DimensionMismatch,
    MissingScore,
    OutOfRange,
    UnknownScoreName,
)
from .stream import EmbeddingTable, SampleRecord, TemporalStream

MAD_SCALE = 1.4826
OOD_THRESHOLD = 3.5


def msp_uncertainty(prob_positive):
    """Binary max-softmax uncertainty; 1 at p=0.5, 0 at p in {0, 1}.

    Accepts a scalar or an array-like and returns the same shape.
    """
    p = np.asarray(prob_positive, dtype=float)
    if np.any(~np.isfinite(p)) or np.any((p < 0.0) | (p > 1.0)):
        raise OutOfRange(f"probability outside [0, 1]: {prob_positive!r}")
    kappa = np.maximum(p, 1.0 - p)
    u = 1.0 - np.abs(kappa - 0.5) / 0.5
    return float(u) if u.ndim == 0 else u


@dataclass(frozen=True)
class Hyperplane:
    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite 1-d vector")
        if not np.linalg.norm(w) > 0:
            raise ValueError("weights must have non-zero norm")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))


def margin_confidence(h: Hyperplane, x: Sequence[float]) -> float:
    """Signed Euclidean distance from ``x`` to the hyperplane ``w.x + b = 0``."""
    x = np.asarray(x, dtype=float)
    if x.shape != h.weights.shape:
        raise DimensionMismatch(f"x has shape {x.shape}, weights {h.weights.shape}")
    return float((h.weights @ x + h.bias) / np.linalg.norm(h.weights))


@dataclass(frozen=True)
class CadeClassStats:
    class_label: int
    centroid: np.ndarray
    median_distance: float
    mad: float

    def __post_init__(self) -> None:
        if not self.mad > 0:
            raise DegenerateMad(f"class {self.class_label}: MAD must be positive")
        if self.median_distance < 0:
            raise ValueError("median_distance must be non-negative")


def fit_cade_stats(
    embeddings: EmbeddingTable,
    labeled_ids: Iterable[tuple[str, int]],
    mad_scale: float = MAD_SCALE,
) -> list[CadeClassStats]:
    """Per-class centroid, median centroid distance and scaled MAD.

    Returns one entry per class, ordered by class label.
    """
    members: dict[int, list[np.ndarray]] = {}
    for sid, label in labeled_ids:
        members.setdefault(int(label), []).append(embeddings.vector(sid))

    stats = []
    for label in sorted(members):
        points = np.vstack(members[label])
        if len(points) < 2:
            raise ClassTooSmall(f"class {label} has {len(points)} sample(s), need >= 2")
        centroid = points.mean(axis=0)
        dists = np.linalg.norm(points - centroid, axis=1)
        med = float(np.median(dists))
        mad = mad_scale * float(np.median(np.abs(dists - med)))
        if mad <= 0:
            raise DegenerateMad(
                f"class {label}: all {len(points)} centroid distances are identical"
            )
        stats.append(CadeClassStats(label, centroid, med, mad))
    return stats


def cade_ood_score(x_embedding: Sequence[float], stats: Sequence[CadeClassStats]) -> float:
    """Minimum over classes of ``|d(x, centroid) - median| / MAD``."""
    if not stats:
        raise ValueError("stats must be non-empty")
    x = np.asarray(x_embedding, dtype=float)
    best = math.inf
    for s in stats:
        if x.shape != s.centroid.shape:
            raise DimensionMismatch(f"embedding has shape {x.shape}, centroid {s.centroid.shape}")
        d = float(np.linalg.norm(x - s.centroid))
        best = min(best, abs(d - s.median_distance) / s.mad)
    return best


def is_ood(score: float, threshold: float = OOD_THRESHOLD) -> bool:
    return score > threshold


# -- orientation ------------------------------------------------------------


@dataclass(frozen=True)
class ScoreOrientation:
    name: str
    higher_means_more_uncertain: bool


DEFAULT_ORIENTATIONS: dict[str, bool] = {
    "msp_u": True,
    "cade_ood": True,
    "margin": False,
}


class OrientationRegistry:
    """Maps score names to orientations. Unregistered names are an error."""

    def __init__(self, entries: Mapping[str, bool] | None = None) -> None:
        self._entries: dict[str, bool] = dict(DEFAULT_ORIENTATIONS)
        if entries:
            self._entries.update(entries)

    def register(self, name: str, higher_means_more_uncertain: bool) -> None:
        self._entries[name] = bool(higher_means_more_uncertain)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def get(self, name: str) -> ScoreOrientation:
        if name not in self._entries:
            raise UnknownScoreName(f"no orientation registered for score {name!r}")
        return ScoreOrientation(name, self._entries[name])

    def names(self) -> list[str]:
        return sorted(self._entries)


def to_uncertainty(score, orientation: ScoreOrientation):
    """Canonical uncertainty: identity or negation depending on orientation."""
    if orientation.higher_means_more_uncertain:
        return score
    return -score if np.ndim(score) == 0 else -np.asarray(score, dtype=float)


def uncertainties(
    records: Iterable[SampleRecord],
    score_name: str,
    registry: OrientationRegistry | None = None,
) -> np.ndarray:
    """Canonical uncertainty for every record, raising MissingScore on gaps."""
    orient = (registry or OrientationRegistry()).get(score_name)
    values = []
    for rec in records:
        try:
            values.append(rec.scores[score_name])
        except KeyError:
            raise MissingScore(
                f"sample {rec.sample_id!r} (month {rec.month_index}) lacks score {score_name!r}"
            ) from None
    return np.asarray(to_uncertainty(np.asarray(values, dtype=float), orient), dtype=float)


# -- attaching computed scores to a stream ----------------------------------


def parse_scorer_spec(spec: str) -> tuple[str, str]:
    """``"msp_u"`` -> ("msp_u", "msp_u"); ``"external:hcc"`` -> ("external", "hcc")."""
    kind, _, column = spec.partition(":")
    if kind == "external":
        if not column:
            raise UnknownScoreName("external scorer needs a column: 'external:<column>'")
        return kind, column
    if kind not in ("msp_u", "margin", "cade_ood") or column:
        raise UnknownScoreName(f"unknown scorer {spec!r}")
    return kind, kind


def _embedding_key(rec: SampleRecord) -> str:
    return rec.embedding_id or rec.sample_id


def attach_scores(
    stream: TemporalStream,
    scorer: str,
    *,
    embeddings: EmbeddingTable | None = None,
    hyperplane: Hyperplane | None = None,
    cade_stats: Sequence[CadeClassStats] | None = None,
) -> TemporalStream:
    """Compute ``scorer`` for every record and store it under its canonical name."""
    kind, column = parse_scorer_spec(scorer)
    if kind == "external":
        for rec in stream.records():
            if column not in rec.scores:
                raise MissingScore(f"sample {rec.sample_id!r} lacks external score {column!r}")
        return stream

    if kind == "msp_u":
        def fn(rec: SampleRecord) -> SampleRecord:
            if rec.prob_positive is None:
                raise MissingScore(f"sample {rec.sample_id!r} has no prob_positive")
            return rec.with_scores(msp_u=msp_uncertainty(rec.prob_positive))
        return stream.map_records(fn)

    if embeddings is None:
        raise MissingScore(f"scorer {kind!r} needs an embedding table")

    def vec(rec: SampleRecord) -> np.ndarray:
        try:
            return embeddings.vector(_embedding_key(rec))
        except KeyError:
            raise MissingScore(f"no embedding for sample {rec.sample_id!r}") from None

    if kind == "margin":
        if hyperplane is None:
            raise MissingScore("margin scorer needs a hyperplane")
        return stream.map_records(
            lambda r: r.with_scores(margin=abs(margin_confidence(hyperplane, vec(r))))
        )

    if not cade_stats:
        raise MissingScore("cade_ood scorer needs fitted class statistics")
    return stream.map_records(lambda r: r.with_scores(cade_ood=cade_ood_score(vec(r), cade_stats)))
