"""End-to-end evaluation: scores -> reliability -> simulation -> stability -> report."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig
from .errors import (
    AllUndefined,
    EvaluationError,
    MissingScore,
    NoDefinedMonths,
    SingleClassInput,
    TooFewPoints,
    UndefinedPillar,
)
from .reliability import RCCurve, auroc, rc_curve
from .report import (
    MetricsReport,
    render_rc_svg,
    render_summary_json,
    render_table,
    render_table_json,
    render_temporal_svg,
    render_trace_csv,
)
from .scorers import (
    CadeClassStats,
    Hyperplane,
    OrientationRegistry,
    attach_scores,
    fit_cade_stats,
    parse_scorer_spec,
    uncertainties,
)
from .simulation import (
    RejectionConfig,
    SimulationTrace,
    aurc_f1_star,
    monthly_f1,
    monthly_fnr,
    run_posthoc_simulation,
    summarize,
)
from .stability import aggregate_pillars, f1_volatility, mann_kendall_tau, pareto_front
from .stream import EmbeddingTable, TemporalStream, read_embeddings, read_stream, validate_stream

logger = logging.getLogger(__name__)


class CombinationFailed(EvaluationError):
    """Wraps an input error with the (stream, score, rho) combination it came from."""


def read_hyperplane(path: str | Path) -> Hyperplane:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return Hyperplane(np.asarray(obj["weights"], dtype=float), float(obj["bias"]))


def read_labels(path: str | Path) -> list[tuple[str, int]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return [(row["sample_id"], int(row["label"])) for row in csv.DictReader(fh)]


@dataclass
class ScoringContext:
    registry: OrientationRegistry
    embeddings: EmbeddingTable | None = None
    hyperplane: Hyperplane | None = None
    cade_stats: Sequence[CadeClassStats] | None = None

    @classmethod
    def from_config(cls, cfg: RunConfig) -> ScoringContext:
        registry = OrientationRegistry(cfg.orientations)
        for spec in cfg.scores:
            kind, column = parse_scorer_spec(spec)
            if kind == "external" and column not in registry:
                registry.register(column, True)
        ctx = cls(registry)
        if cfg.embeddings is not None:
            ctx.embeddings = read_embeddings(cfg.embeddings)
        if cfg.hyperplane is not None:
            ctx.hyperplane = read_hyperplane(cfg.hyperplane)
        if cfg.cade_train is not None:
            if ctx.embeddings is None:
                raise EvaluationError("cade_train requires an embeddings file")
            ctx.cade_stats = fit_cade_stats(ctx.embeddings, read_labels(cfg.cade_train))
        return ctx


def ensure_score(stream: TemporalStream, spec: str, ctx: ScoringContext) -> tuple[TemporalStream, str]:
    """Make sure every record carries the score; compute it when absent."""
    kind, column = parse_scorer_spec(spec)
    if validate_stream(stream, {column}).passed:
        return stream, column
    if kind == "external":
        report = validate_stream(stream, {column})
        raise MissingScore(
            f"stream {stream.dataset_name!r}: column {column!r} missing for "
            f"{len(report.missing)} record(s), first {report.missing[0][1]!r}"
        )
    scored = attach_scores(
        stream,
        spec,
        embeddings=ctx.embeddings,
        hyperplane=ctx.hyperplane,
        cade_stats=ctx.cade_stats,
    )
    return scored, column


def _mean_percent(values) -> float | None:
    defined = [v for v in values if v is not None]
    return 100.0 * float(np.mean(defined)) if defined else None


@dataclass(frozen=True)
class StreamMetrics:
    """Metrics that do not depend on the rejection quota."""

    monthly_f1: tuple[float | None, ...]
    f1_mean: float | None
    fnr_mean: float | None
    auroc: float | None
    curve: RCCurve
    aurc_f1_star: float | None
    sigma_f1: float | None
    tau: float | None


def stream_metrics(
    stream: TemporalStream,
    score_name: str,
    sc_method: str,
    coverage_grid: Sequence[float],
    registry: OrientationRegistry,
    window: int | None = None,
    tau_variant: str = "a",
) -> StreamMetrics:
    records = list(stream.records())
    f1_series = tuple(monthly_f1(b) for b in stream.batches)
    fnr_series = [monthly_fnr(b) for b in stream.batches]

    probs = [r.prob_positive for r in records]
    auc = None
    if all(p is not None for p in probs):
        try:
            auc = auroc(probs, [r.y_true for r in records])
        except SingleClassInput:
            auc = None

    curve = rc_curve(uncertainties(records, score_name, registry), [r.correct for r in records])

    cov_cfg = RejectionConfig(1, sc_method, score_name, tuple(coverage_grid), window)
    try:
        f1_star = aurc_f1_star(stream, cov_cfg, registry)
    except NoDefinedMonths as exc:
        logger.warning("%s/%s: AURC[F1]* undefined (%s)", stream.dataset_name, score_name, exc)
        f1_star = None

    try:
        sigma = 100.0 * f1_volatility(f1_series)
    except AllUndefined:
        sigma = None
    try:
        tau = mann_kendall_tau(f1_series, tau_variant)
    except TooFewPoints:
        tau = None

    return StreamMetrics(
        monthly_f1=f1_series,
        f1_mean=_mean_percent(f1_series),
        fnr_mean=_mean_percent(fnr_series),
        auroc=auc,
        curve=curve,
        aurc_f1_star=f1_star,
        sigma_f1=sigma,
        tau=tau,
    )


@dataclass
class EvaluationResult:
    reports: list[MetricsReport]
    traces: dict[tuple[str, str, int], SimulationTrace]
    curves: dict[tuple[str, str], RCCurve]
    summaries: dict[tuple[str, str, int], dict[str, object]]


def _assign_pareto(reports: list[MetricsReport]) -> list[MetricsReport]:
    """Flag non-dominated (method, score) pairs using pillars averaged over datasets."""
    groups: dict[tuple[str, str], dict[str, MetricsReport]] = {}
    for rep in reports:
        groups.setdefault((rep.method_id, rep.score_name), {})[rep.dataset_name] = rep
    datasets = {frozenset(g) for g in groups.values()}
    if len(datasets) != 1:
        logger.warning("methods cover different datasets; Pareto flags left undefined")
        return reports

    vectors, rankable = [], []
    for key, by_ds in sorted(groups.items()):
        rows = [
            (r.f1_mean, r.sigma_f1, r.aurc, r.tau) for _, r in sorted(by_ds.items())
        ]
        try:
            vectors.append(aggregate_pillars(rows, f"{key[0]}/{key[1]}"))
            rankable.append(key)
        except UndefinedPillar as exc:
            logger.warning("unrankable: %s", exc)
    flags = dict(zip(rankable, (flag for _, flag in pareto_front(vectors))))
    return [replace(r, pareto_flag=flags.get((r.method_id, r.score_name))) for r in reports]


def run_evaluation(cfg: RunConfig) -> EvaluationResult:
    """Evaluate every (stream, score, rho) combination; deterministic given ``cfg``."""
    cfg.check()
    ctx = ScoringContext.from_config(cfg)
    reports: list[MetricsReport] = []
    traces: dict[tuple[str, str, int], SimulationTrace] = {}
    curves: dict[tuple[str, str], RCCurve] = {}
    summaries: dict[tuple[str, str, int], dict[str, object]] = {}

    for path in cfg.streams:
        base = read_stream(path, cfg.stream_format)
        for spec in cfg.scores:
            where = f"stream={base.dataset_name} score={spec}"
            try:
                stream, score = ensure_score(base, spec, ctx)
                sm = stream_metrics(
                    stream, score, cfg.sc_method, cfg.coverage_grid,
                    ctx.registry, cfg.window, cfg.tau_variant,
                )
            except EvaluationError as exc:
                raise CombinationFailed(f"{where}: {exc}") from exc
            curves[(stream.dataset_name, score)] = sm.curve
            for rho in cfg.rhos:
                try:
                    rej_cfg = RejectionConfig(rho, cfg.sc_method, score, cfg.coverage_grid, cfg.window)
                    trace = run_posthoc_simulation(stream, rej_cfg, ctx.registry)
                except EvaluationError as exc:
                    raise CombinationFailed(f"{where} rho={rho}: {exc}") from exc
                traces[(stream.dataset_name, score, rho)] = trace
                summary = summarize(trace)
                summaries[(stream.dataset_name, score, rho)] = {
                    "dataset": stream.dataset_name,
                    "score": score,
                    "method": rej_cfg.method,
                    "rho": rho,
                    **summary,
                    "aurc_f1_star": sm.aurc_f1_star,
                }
                reports.append(
                    MetricsReport(
                        method_id=cfg.method_id,
                        dataset_name=stream.dataset_name,
                        score_name=score,
                        sc_method=rej_cfg.method,
                        rho=rho,
                        monthly_budget=cfg.monthly_budget,
                        initial_budget=cfg.initial_budget,
                        f1_mean=sm.f1_mean,
                        fnr_mean=sm.fnr_mean,
                        auroc=sm.auroc,
                        aurc=sm.curve.aurc,
                        aurc_f1_star=sm.aurc_f1_star,
                        sigma_f1=sm.sigma_f1,
                        tau=sm.tau,
                        bf_star=summary["bf_star"],
                        delta_rej=summary["delta_rej"],
                        sigma_rej=summary["sigma_rej"],
                    )
                )
    reports.sort(key=MetricsReport.sort_key)
    return EvaluationResult(_assign_pareto(reports), traces, curves, summaries)


def write_outputs(result: EvaluationResult, out_dir: str | Path, formats: Sequence[str]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def put(name: str, text: str) -> None:
        p = out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        written.append(p)

    if "csv" in formats:
        put("metrics.csv", render_table(result.reports))
    if "json" in formats:
        put("metrics.json", render_table_json(result.reports))
    for (ds, score, rho), trace in sorted(result.traces.items()):
        stem = f"{ds}__{score}__rho{rho}"
        if "csv" in formats:
            put(f"traces/{stem}.csv", render_trace_csv(trace))
        if "json" in formats:
            put(f"traces/{stem}.json", render_summary_json(result.summaries[(ds, score, rho)]))
        if "svg" in formats:
            p = out / "plots" / f"{stem}__temporal.svg"
            p.parent.mkdir(parents=True, exist_ok=True)
            written.append(render_temporal_svg(trace, rho, p, title=f"{ds} / {score}"))
    if "svg" in formats:
        for (ds, score), curve in sorted(result.curves.items()):
            p = out / "plots" / f"{ds}__{score}__rc.svg"
            p.parent.mkdir(parents=True, exist_ok=True)
            written.append(render_rc_svg(curve, p, title=f"{ds} / {score}"))
    return written


def evaluate(cfg: RunConfig, write: bool = True) -> list[MetricsReport]:
    result = run_evaluation(cfg)
    if write:
        write_outputs(result, cfg.out_dir, cfg.formats)
    return result.reports
