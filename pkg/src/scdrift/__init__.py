"""Reliability and stability evaluation of selective classifiers on drifting streams."""

from .reliability import RCCurve, auroc, rc_curve
from .scorers import (
    CadeClassStats,
    Hyperplane,
    OrientationRegistry,
    ScoreOrientation,
    cade_ood_score,
    fit_cade_stats,
    is_ood,
    margin_confidence,
    msp_uncertainty,
    to_uncertainty,
)
from .simulation import (
    RejectionConfig,
    SimulationTrace,
    aurc_f1_star,
    benefit_fraction,
    monthly_f1,
    ood_threshold,
    rejection_bias,
    rejection_volatility,
    run_posthoc_simulation,
    softmax_thresholds,
)
from .stability import (
    MonthlySeries,
    PillarVector,
    aggregate_pillars,
    f1_volatility,
    mann_kendall_tau,
    pareto_front,
)
from .stream import (
    EmbeddingTable,
    MonthBatch,
    SampleRecord,
    TemporalStream,
    parse_embeddings,
    parse_stream,
    validate_stream,
)

__version__ = "0.1.0"
