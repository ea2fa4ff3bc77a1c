from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scdrift.errors import (
    ClassTooSmall,
    DegenerateMad,
    DimensionMismatch,
    MissingScore,
    OutOfRange,
    UnknownScoreName,
)
from scdrift.scorers import (
    MAD_SCALE,
    CadeClassStats,
    Hyperplane,
    OrientationRegistry,
    ScoreOrientation,
    attach_scores,
    cade_ood_score,
    fit_cade_stats,
    is_ood,
    margin_confidence,
    msp_uncertainty,
    parse_scorer_spec,
    to_uncertainty,
    uncertainties,
)
from scdrift.stream import EmbeddingTable, MonthBatch, SampleRecord, TemporalStream


def _table(points: dict[str, tuple[float, ...]]) -> EmbeddingTable:
    dim = len(next(iter(points.values())))
    return EmbeddingTable(dim, {k: np.asarray(v, dtype=float) for k, v in points.items()})


# -- msp --------------------------------------------------------------------


@pytest.mark.parametrize("p, expected", [(0.5, 1.0), (1.0, 0.0), (0.0, 0.0), (0.75, 0.5)])
def test_msp_fixtures(p, expected):
    assert msp_uncertainty(p) == pytest.approx(expected, abs=1e-12)


@given(st.floats(0.0, 1.0))
def test_msp_symmetric_and_bounded(p):
    u = msp_uncertainty(p)
    assert 0.0 <= u <= 1.0
    assert u == pytest.approx(msp_uncertainty(1.0 - p), abs=1e-12)


def test_msp_vectorised_and_range_check():
    np.testing.assert_allclose(msp_uncertainty([0.5, 0.75, 1.0]), [1.0, 0.5, 0.0])
    for bad in (-0.1, 1.01, float("nan")):
        with pytest.raises(OutOfRange):
            msp_uncertainty(bad)


# -- margin -----------------------------------------------------------------


@pytest.mark.parametrize(
    "b, x, expected",
    [(0.0, (0.0, 0.0), 0.0), (0.0, (1.0, 0.0), 0.6), (-5.0, (1.0, 0.0), -0.4)],
)
def test_margin_fixtures(b, x, expected):
    assert margin_confidence(Hyperplane(np.array([3.0, 4.0]), b), x) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=50)
@given(
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.floats(-10, 10),
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.floats(0.1, 100),
)
def test_margin_scale_invariant(w, b, x, c):
    if np.linalg.norm(w) < 1e-3:
        return
    d1 = margin_confidence(Hyperplane(np.array(w), b), x)
    d2 = margin_confidence(Hyperplane(c * np.array(w), c * b), x)
    assert d1 == pytest.approx(d2, rel=1e-9, abs=1e-9)


def test_margin_errors():
    with pytest.raises(DimensionMismatch):
        margin_confidence(Hyperplane(np.array([1.0, 0.0]), 0.0), (1.0,))
    with pytest.raises(ValueError):
        Hyperplane(np.zeros(2), 1.0)


# -- CADE -------------------------------------------------------------------


def test_cade_two_points_degenerate():
    table = _table({"a": (0, 0), "b": (2, 0)})
    with pytest.raises(DegenerateMad):
        fit_cade_stats(table, [("a", 1), ("b", 1)])


def test_cade_square_degenerate():
    table = _table({"a": (0, 0), "b": (2, 0), "c": (0, 2), "d": (2, 2)})
    with pytest.raises(DegenerateMad):
        fit_cade_stats(table, [(k, 0) for k in "abcd"])


def test_cade_triangle_matches_brute_force():
    pts = {"a": (0.0, 0.0), "b": (4.0, 0.0), "c": (0.0, 2.0)}
    (stats,) = fit_cade_stats(_table(pts), [(k, 1) for k in pts])
    # independent recomputation in plain Python
    cx = sum(p[0] for p in pts.values()) / 3
    cy = sum(p[1] for p in pts.values()) / 3
    dists = sorted(math.hypot(p[0] - cx, p[1] - cy) for p in pts.values())
    med = dists[1]
    devs = sorted(abs(d - med) for d in dists)
    np.testing.assert_allclose(stats.centroid, [4 / 3, 2 / 3], atol=1e-12)
    assert stats.median_distance == pytest.approx(med, abs=1e-12)
    assert stats.median_distance == pytest.approx(math.sqrt(32) / 3, abs=1e-12)
    assert stats.mad == pytest.approx(MAD_SCALE * devs[1], abs=1e-12)


def test_cade_class_too_small():
    with pytest.raises(ClassTooSmall):
        fit_cade_stats(_table({"a": (0, 0), "b": (4, 0), "c": (0, 2), "d": (5, 5)}),
                       [("a", 0), ("b", 0), ("c", 0), ("d", 1)])


def test_cade_score_fixtures():
    single = CadeClassStats(0, np.array([0.0]), 2.0, 0.5)
    assert cade_ood_score([3.0], [single]) == pytest.approx(2.0, abs=1e-12)
    assert not is_ood(cade_ood_score([3.0], [single]))
    assert cade_ood_score([2.0], [single]) == 0.0

    a = CadeClassStats(0, np.array([0.0]), 2.0, 0.5)     # d = 4 -> |4 - 2| / 0.5 = 4.0
    b = CadeClassStats(1, np.array([10.0]), 2.4, 1.0)    # d = 6 -> |6 - 2.4| / 1 = 3.6
    kappa = cade_ood_score([4.0], [a, b])
    assert kappa == pytest.approx(3.6, abs=1e-12)
    assert is_ood(kappa)
    assert not is_ood(3.5)


def test_cade_score_dimension_check():
    stats = [CadeClassStats(0, np.array([0.0, 0.0]), 1.0, 1.0)]
    with pytest.raises(DimensionMismatch):
        cade_ood_score([1.0], stats)


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False))
def test_cade_fit_ignores_member_order(rnd):
    rng = np.random.default_rng(rnd.randint(0, 10**6))
    pts = {f"s{i}": tuple(rng.normal(size=3)) for i in range(9)}
    labels = [(k, i % 2) for i, k in enumerate(pts)]
    shuffled = labels[:]
    rnd.shuffle(shuffled)
    for s1, s2 in zip(fit_cade_stats(_table(pts), labels), fit_cade_stats(_table(pts), shuffled)):
        np.testing.assert_allclose(s1.centroid, s2.centroid, atol=1e-12)
        assert s1.median_distance == pytest.approx(s2.median_distance, abs=1e-12)
        assert s1.mad == pytest.approx(s2.mad, abs=1e-12)


# -- orientation ------------------------------------------------------------


def test_to_uncertainty_orientation():
    up = ScoreOrientation("x", True)
    down = ScoreOrientation("m", False)
    assert to_uncertainty(0.3, up) == 0.3
    assert to_uncertainty(0.3, down) == -0.3
    np.testing.assert_array_equal(to_uncertainty(np.array([1.0, 2.0]), down), [-1.0, -2.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20))
def test_lower_orientation_reverses_order(values):
    u = to_uncertainty(np.array(values), ScoreOrientation("m", False))
    for i in range(len(values)):
        for j in range(len(values)):
            if values[i] < values[j]:
                assert u[i] > u[j]


def test_registry_defaults_and_unknown():
    reg = OrientationRegistry()
    assert reg.get("margin").higher_means_more_uncertain is False
    assert reg.get("msp_u").higher_means_more_uncertain is True
    with pytest.raises(UnknownScoreName):
        reg.get("hcc")
    reg.register("hcc", True)
    assert "hcc" in reg.names()


def test_parse_scorer_spec():
    assert parse_scorer_spec("msp_u") == ("msp_u", "msp_u")
    assert parse_scorer_spec("external:hcc") == ("external", "hcc")
    for bad in ("external:", "softmax", "margin:x"):
        with pytest.raises(UnknownScoreName):
            parse_scorer_spec(bad)


# -- attaching to a stream --------------------------------------------------


def _two_record_stream() -> TemporalStream:
    recs = (
        SampleRecord("a", 0, 1, 1, 0.9),
        SampleRecord("b", 0, 0, 1, 0.6, embedding_id="emb-b"),
    )
    return TemporalStream("t", (MonthBatch(0, recs),))


def test_attach_msp_and_margin():
    s = _two_record_stream()
    scored = attach_scores(s, "msp_u")
    assert [r.scores["msp_u"] for r in scored.records()] == pytest.approx([0.2, 0.8])

    table = _table({"a": (1.0, 0.0), "emb-b": (-1.0, 0.0)})
    h = Hyperplane(np.array([3.0, 4.0]), 0.0)
    scored = attach_scores(s, "margin", embeddings=table, hyperplane=h)
    assert [r.scores["margin"] for r in scored.records()] == pytest.approx([0.6, 0.6])
    # margin is a confidence, so canonical uncertainty is its negation
    np.testing.assert_allclose(uncertainties(scored.records(), "margin"), [-0.6, -0.6])


def test_attach_requirements():
    s = _two_record_stream()
    with pytest.raises(MissingScore):
        attach_scores(s, "margin")
    with pytest.raises(MissingScore):
        attach_scores(s, "external:hcc")
    with pytest.raises(MissingScore):
        uncertainties(s.records(), "msp_u")
    table = _table({"a": (1.0, 0.0)})
    with pytest.raises(MissingScore):
        attach_scores(s, "margin", embeddings=table, hyperplane=Hyperplane(np.ones(2), 0.0))
