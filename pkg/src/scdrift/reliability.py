"""Ranking-quality metrics: risk-coverage curves, AURC and AUROC."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, SingleClassInput


@dataclass(frozen=True)
class RCCurve:
    """Selective risk at every coverage prefix, most confident sample first.

    ``aurc`` is the discrete estimator ``mean_k risk(k)``; multiply by 100 for
    the table convention.
    """

    coverage: np.ndarray
    risk: np.ndarray
    aurc: float
    n: int

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.coverage.tolist(), self.risk.tolist()))


def rc_curve(uncertainty: Sequence[float], correct: Sequence[bool]) -> RCCurve:
    """Build the risk-coverage curve under 0/1 error.

    Samples are sorted by ascending uncertainty with a stable sort, so equal
    uncertainties keep their input order. For prefix size ``k`` the risk is
    ``errors_in_prefix / k`` and coverage is ``k / n``.
    """
    u = np.asarray(uncertainty, dtype=float)
    ok = np.asarray(correct, dtype=bool)
    if u.shape != ok.shape or u.ndim != 1:
        raise ValueError("uncertainty and correct must be 1-d and equally long")
    n = len(u)
    if n == 0:
        raise EmptyInput("rc_curve needs at least one sample")
    order = np.argsort(u, kind="stable")
    errors = np.cumsum(~ok[order])
    k = np.arange(1, n + 1)
    risk = errors / k
    coverage = k / n
    # fsum: correctly rounded, so the value does not depend on summation order
    aurc_value = math.fsum(risk.tolist()) / n
    return RCCurve(coverage, risk, aurc_value, n)


def aurc(curve: RCCurve) -> float:
    return curve.aurc


def auroc(scores: Sequence[float], y_true: Sequence[int]) -> float:
    """Mann-Whitney AUROC with mid-rank tie handling (0.5 credit per tied pair)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(y_true)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and y_true must be 1-d and equally long")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("AUROC needs at least one positive and one negative")
    ranks = rankdata(s, method="average")
    u_stat = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))
