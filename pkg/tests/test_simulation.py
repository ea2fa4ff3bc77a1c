from __future__ import annotations

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_stream
from scdrift.errors import (
    MissingScore,
    NoDefinedMonths,
    QuotaExceedsPool,
    TooFewMonths,
    UnknownRejectedId,
)
from scdrift.scorers import OrientationRegistry
from scdrift.simulation import (
    F1RiskCurve,
    MonthOutcome,
    RejectionConfig,
    SimulationTrace,
    aurc_f1_star,
    benefit_fraction,
    f1_risk_curve,
    monthly_f1,
    ood_threshold,
    rejection_bias,
    rejection_volatility,
    run_posthoc_simulation,
    softmax_thresholds,
    summarize,
    _pool_fraction_quota,
)
from scdrift.stream import MonthBatch, SampleRecord

REG = OrientationRegistry({"u": True})


def _trace(rejections, retained=None, baseline=None, rho=1) -> SimulationTrace:
    n = len(rejections)
    retained = retained or [None] * n
    baseline = baseline or [None] * n
    months = tuple(
        MonthOutcome(i, i + 2, 1000, 1000, rho, rho, None, None, r, 1000 - r, a, b)
        for i, (r, a, b) in enumerate(zip(rejections, retained, baseline))
    )
    return SimulationTrace(RejectionConfig(rho, score_name="u"), months)


# -- threshold subroutines --------------------------------------------------


def test_ood_threshold_fixtures():
    assert ood_threshold([0.9, 0.7, 0.5, 0.3], 2) == 0.7
    assert ood_threshold([0.9, 0.7, 0.5, 0.3], 4) == 0.3
    pool = [0.5, 0.5, 0.5]
    c = ood_threshold(pool, 1)
    assert c == 0.5 and sum(v > c for v in pool) == 0
    with pytest.raises(QuotaExceedsPool):
        ood_threshold([0.1], 2)


def test_softmax_threshold_fixtures():
    assert softmax_thresholds([0.2, 0.9, 0.6, 0.4], 2) == (0.6, 0.9)
    assert softmax_thresholds([0.2, 0.9, 0.6, 0.4], 0) == (1.0, 0.0)
    assert softmax_thresholds([0.2, 0.9, 0.6, 0.4], 4) == (0.2, 0.9)
    # unbounded scores are not clipped to the unit interval
    assert softmax_thresholds([5.0, 2.0, 7.5], 2) == (5.0, 7.5)
    assert softmax_thresholds([-0.3, -0.1, -0.2], 1) == (-0.1, -0.1)
    with pytest.raises(QuotaExceedsPool):
        softmax_thresholds([0.1], 2)


# -- the protocol -----------------------------------------------------------


def test_hand_trace_single_cutoff():
    s = make_stream([[0.9, 0.1, 0.2], [0.95, 0.05, 0.5]])
    (m2,) = run_posthoc_simulation(s, RejectionConfig(1, "cutoff", "u"), REG).months
    assert (m2.applied_quota, m2.pool_size, m2.threshold_low) == (2, 3, 0.2)
    assert m2.rejections == 2
    assert set(m2.rejected_ids) == {"m1-0", "m1-2"}


def test_band_trace():
    s = make_stream([[0.2, 0.9, 0.6, 0.4], [0.1, 0.6, 0.75, 0.95]])
    (m2,) = run_posthoc_simulation(s, RejectionConfig(1, "band", "u"), REG).months
    assert (m2.threshold_low, m2.threshold_high) == (0.6, 0.9)
    assert m2.rejected_ids == ("m1-1", "m1-2")


@pytest.mark.parametrize("method", ["cutoff", "band"])
def test_identical_scores(method):
    s = make_stream([[0.4] * 5, [0.4] * 5, [0.4] * 5])
    trace = run_posthoc_simulation(s, RejectionConfig(1, method, "u"), REG)
    if method == "cutoff":
        assert trace.rejections == [0, 0]
    else:
        # a band collapsed onto the shared value covers every sample
        assert trace.rejections == [5, 5]


def test_saturation_rejects_everything(caplog):
    s = make_stream([
        [(0.1, 1, 1), (0.2, 0, 0), (0.3, 1, 1)],
        [(0.4, 1, 1), (0.5, 0, 1), (0.6, 1, 0)],
    ])
    with caplog.at_level(logging.WARNING, logger="scdrift.simulation"):
        (m2,) = run_posthoc_simulation(s, RejectionConfig(3, "cutoff", "u"), REG).months
    assert m2.requested_quota == 6 and m2.applied_quota == 3 and m2.capped
    assert m2.threshold_low == 0.1
    assert m2.rejections == 3
    assert m2.retained_f1 is None
    assert m2.baseline_f1 == pytest.approx(2 / 4)
    assert "capped" in caplog.text


def test_protocol_errors():
    with pytest.raises(TooFewMonths):
        run_posthoc_simulation(make_stream([[0.1]]), RejectionConfig(1, score_name="u"), REG)
    with pytest.raises(MissingScore):
        run_posthoc_simulation(make_stream([[0.1], [0.2]]), RejectionConfig(1, score_name="v"),
                               OrientationRegistry({"v": True}))
    with pytest.raises(ValueError):
        RejectionConfig(0)
    with pytest.raises(ValueError):
        RejectionConfig(1, "mystery")
    assert RejectionConfig(1, "ood").method == "cutoff"
    assert RejectionConfig(1, "softmax").method == "band"


def test_window_limits_pool():
    s = make_stream([[0.1] * 3, [0.2] * 4, [0.3] * 5, [0.4] * 2])
    full = run_posthoc_simulation(s, RejectionConfig(1, score_name="u"), REG)
    assert [m.pool_size for m in full.months] == [3, 7, 12]
    win = run_posthoc_simulation(s, RejectionConfig(1, score_name="u", window=1), REG)
    assert [m.pool_size for m in win.months] == [3, 4, 5]


month_rows = st.lists(
    st.tuples(st.integers(0, 9).map(lambda v: v / 10), st.integers(0, 1), st.integers(0, 1)),
    min_size=1,
    max_size=8,
)


@settings(max_examples=80, deadline=None)
@given(st.lists(month_rows, min_size=2, max_size=5), st.integers(1, 6), st.sampled_from(["cutoff", "band"]))
def test_protocol_invariants(months, rho, method):
    s = make_stream(months)
    trace = run_posthoc_simulation(s, RejectionConfig(rho, method, "u"), REG)
    sizes = [len(m) for m in months]
    for k, m in enumerate(trace.months):
        assert m.pool_size == sum(sizes[: k + 1])
        assert m.requested_quota == (k + 2) * rho
        assert m.applied_quota == min(m.requested_quota, m.pool_size)
        assert 0 <= m.rejections <= m.n_samples
        assert m.retained_count + m.rejections == m.n_samples
        scores = np.array([r[0] for r in months[k + 1]])
        if method == "cutoff":
            assert m.rejections == int(np.sum(scores > m.threshold_low))
        else:
            lo, hi = m.threshold_low, m.threshold_high
            assert m.rejections == int(np.sum((lo <= scores) & (scores <= hi)))
    assert run_posthoc_simulation(s, RejectionConfig(rho, method, "u"), REG) == trace


@settings(max_examples=50, deadline=None)
@given(st.lists(month_rows, min_size=2, max_size=5), st.integers(1, 5), st.sampled_from(["cutoff", "band"]))
def test_rejections_grow_with_rho(months, rho, method):
    s = make_stream(months)
    lo = run_posthoc_simulation(s, RejectionConfig(rho, method, "u"), REG).rejections
    hi = run_posthoc_simulation(s, RejectionConfig(rho + 1, method, "u"), REG).rejections
    assert all(a <= b for a, b in zip(lo, hi))


# -- monthly F1 ------------------------------------------------------------


def test_monthly_f1():
    batch = MonthBatch(0, (
        SampleRecord("a", 0, 1, 1), SampleRecord("b", 0, 1, 0), SampleRecord("c", 0, 0, 0),
    ))
    assert monthly_f1(batch) == pytest.approx(2 / 3, abs=1e-12)
    assert monthly_f1(batch, {"b"}) == 1.0
    assert monthly_f1(batch, {"a", "b"}) is None
    assert monthly_f1(batch, {"a", "b", "c"}) is None
    with pytest.raises(UnknownRejectedId):
        monthly_f1(batch, {"zz"})


# -- derived metrics --------------------------------------------------------


def test_benefit_fraction_fixtures():
    t = _trace([0] * 4, retained=[0.9, 0.8, 0.5, 0.5], baseline=[0.8, 0.8, 0.4, 0.6])
    assert benefit_fraction(t) == pytest.approx(50.0, abs=1e-12)
    same = _trace([0] * 3, retained=[0.5] * 3, baseline=[0.5] * 3)
    assert benefit_fraction(same) == 0.0
    better = _trace([0] * 2, retained=[0.6, 0.7], baseline=[0.5, 0.5])
    assert benefit_fraction(better) == 100.0


def test_benefit_fraction_skips_undefined_months():
    t = _trace([0] * 3, retained=[0.9, None, 0.1], baseline=[0.5, 0.5, None])
    assert benefit_fraction(t) == 100.0
    with pytest.raises(NoDefinedMonths):
        benefit_fraction(_trace([0], retained=[None], baseline=[0.5]))
    assert summarize(_trace([0], retained=[None], baseline=[0.5]))["bf_star"] is None


def test_rejection_bias_and_volatility():
    assert rejection_bias(_trace([450, 350, 400], rho=400)) == pytest.approx(0.0, abs=1e-12)
    assert rejection_bias(_trace([900, 900], rho=400)) == pytest.approx(500.0, abs=1e-12)
    assert rejection_bias(_trace([7, 7, 7], rho=7)) == 0.0
    assert rejection_volatility(_trace([0, 100])) == pytest.approx(50.0, abs=1e-12)
    assert rejection_volatility(_trace([3, 3, 3])) == 0.0
    assert rejection_volatility(_trace([42])) == 0.0


# -- AURC[F1]* -------------------------------------------------------------


def _mixed_stream():
    rng = np.random.default_rng(3)
    months = []
    for _ in range(4):
        rows = []
        for _ in range(30):
            yt = int(rng.random() < 0.4)
            wrong = rng.random() < 0.2
            yp = 1 - yt if wrong else yt
            rows.append((float(rng.random()), yt, yp))
        months.append(rows)
    return make_stream(months)


def test_full_coverage_equals_baseline():
    s = _mixed_stream()
    curve = f1_risk_curve(s, RejectionConfig(1, score_name="u"), REG)
    baseline = [monthly_f1(b) for b in s.batches[1:]]
    assert curve.coverage[-1] == 1.0
    assert curve.mean_f1[-1] == pytest.approx(np.mean([f for f in baseline if f is not None]))
    assert len(curve.coverage) == 20 and curve.coverage[0] == 0.05


def test_quota_uses_exact_pool_fraction():
    # float arithmetic would give ceil(1.0000000000000009) = 2 here
    assert _pool_fraction_quota(0.95)(2, 20) == 1
    assert _pool_fraction_quota(0.05)(2, 20) == 19
    assert _pool_fraction_quota(1.0)(2, 20) == 0
    assert _pool_fraction_quota(0.5)(2, 3) == 2


def test_undefined_coverage_point_raises():
    # positives carry the top scores, so low coverage strips every positive
    months = [[(0.1 * i, i % 2, i % 2) for i in range(10)] for _ in range(3)]
    with pytest.raises(NoDefinedMonths):
        f1_risk_curve(make_stream(months), RejectionConfig(1, score_name="u"), REG)


def test_constant_f1_area():
    assert F1RiskCurve((0.05, 0.5, 1.0), (0.8, 0.8, 0.8)).area == pytest.approx(20.0, abs=1e-12)
    assert F1RiskCurve((0.05, 1.0), (1.0, 1.0)).area == 0.0


def test_perfect_stream_has_zero_area():
    months = [[(0.1 * i, i % 2, i % 2) for i in range(10)] for _ in range(3)]
    cfg = RejectionConfig(1, score_name="u", coverage_grid=(0.5, 0.75, 1.0))
    assert aurc_f1_star(make_stream(months), cfg, REG) == 0.0


def test_oracle_beats_null_on_small_stream():
    rng = np.random.default_rng(11)
    oracle_months, null_months = [], []
    for _ in range(6):
        o_rows, n_rows = [], []
        for _ in range(80):
            yt = int(rng.random() < 0.3)
            wrong = bool(rng.random() < 0.15)
            yp = 1 - yt if wrong else yt
            o_rows.append((0.9 + 0.1 * rng.random() if wrong else 0.9 * rng.random(), yt, yp))
            n_rows.append((float(rng.random()), yt, yp))
        oracle_months.append(o_rows)
        null_months.append(n_rows)
    cfg = RejectionConfig(1, score_name="u")
    assert aurc_f1_star(make_stream(oracle_months), cfg, REG) < aurc_f1_star(make_stream(null_months), cfg, REG)


def test_grid_validation():
    with pytest.raises(ValueError):
        RejectionConfig(1, coverage_grid=(0.5, 0.2))
    with pytest.raises(ValueError):
        f1_risk_curve(_mixed_stream(), RejectionConfig(1, score_name="u", coverage_grid=(0.5,)), REG)
