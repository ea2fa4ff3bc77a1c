"""Command-line interface.

Subcommands: score, rc-curve, simulate, evaluate, pareto, sample.
Exit codes: 0 success, 1 input error, 2 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .budget import (
    DEFAULT_FOLDS,
    assign_folds,
    select_uncertain,
    stratk_sample,
    uncertainty_fold_sample,
)
from .config import RunConfig, load_config, with_overrides
from .errors import EvaluationError, InvariantViolation, UndefinedPillar
from .evaluate import ScoringContext, ensure_score, evaluate
from .reliability import rc_curve
from .report import (
    render_rc_csv,
    render_rc_svg,
    render_summary_json,
    render_temporal_svg,
    render_trace_csv,
)
from .scorers import OrientationRegistry, parse_scorer_spec, uncertainties
from .simulation import (
    DEFAULT_COVERAGE_GRID,
    RejectionConfig,
    aurc_f1_star,
    run_posthoc_simulation,
    summarize,
)
from .stability import aggregate_pillars, pareto_front
from .stream import dump_stream, read_stream

logger = logging.getLogger("scdrift")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="flat key=value run configuration")
    p.add_argument("--out", type=Path, help="output directory (or file for 'score')")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _registry(spec_names: Sequence[str], lower: Sequence[str] = ()) -> OrientationRegistry:
    reg = OrientationRegistry()
    for spec in spec_names:
        kind, column = parse_scorer_spec(spec)
        if kind == "external" and column not in reg:
            reg.register(column, True)
    for name in lower:
        reg.register(name, False)
    return reg


def _scored_stream(args: argparse.Namespace):
    stream = read_stream(args.stream)
    reg = _registry([args.score], args.lower_is_uncertain)
    stream, column = ensure_score(stream, args.score, ScoringContext(reg))
    return stream, column, reg


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="scdrift",
        description="Reliability and stability evaluation of selective classifiers under drift.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def score_arg(p: argparse.ArgumentParser) -> None:
        p.add_argument("--score", default="msp_u",
                       help="msp_u | margin | cade_ood | external:<column> (default msp_u)")
        p.add_argument("--lower-is-uncertain", action="append", default=[], metavar="NAME",
                       help="register a score where lower values mean more uncertain")

    p = sub.add_parser("score", parents=[common], help="compute scores into a stream")
    p.add_argument("stream", type=Path)
    p.add_argument("--scorer", action="append", required=True,
                   help="msp_u | margin | cade_ood (repeatable)")
    p.add_argument("--embeddings", type=Path)
    p.add_argument("--hyperplane", type=Path, help='JSON {"weights": [...], "bias": b}')
    p.add_argument("--cade-train", type=Path, help="CSV sample_id,label of training embeddings")

    p = sub.add_parser("rc-curve", parents=[common], help="risk-coverage curve and AURC")
    p.add_argument("stream", type=Path)
    score_arg(p)
    p.add_argument("--svg", type=Path, help="also render the curve to this SVG file")

    p = sub.add_parser("simulate", parents=[common], help="post-hoc selective classification")
    p.add_argument("stream", type=Path)
    score_arg(p)
    p.add_argument("--rho", type=int, required=True, help="monthly rejection quota")
    p.add_argument("--method", choices=("cutoff", "band"), default="cutoff")
    p.add_argument("--window", type=int, help="calibration pool window in months (default: all)")
    p.add_argument("--no-aurc-f1", action="store_true", help="skip the coverage sweep")

    p = sub.add_parser("evaluate", parents=[common], help="full metrics table from a config")
    p.add_argument("streams", type=Path, nargs="*", help="streams (override config 'stream')")
    p.add_argument("--rho", type=int, action="append", help="override rho list (repeatable)")
    p.add_argument("--score", action="append", help="override scores (repeatable)")
    p.add_argument("--method", choices=("cutoff", "band"))

    p = sub.add_parser("pareto", parents=[common], help="Pareto flags from per-dataset pillars")
    p.add_argument("pillars", type=Path, help="CSV method_id,dataset,f1,sigma_f1,aurc,tau")

    p = sub.add_parser("sample", parents=[common], help="label-budget sample selection")
    p.add_argument("stream", type=Path)
    p.add_argument("--scheme", choices=("stratk", "uncertainty-folds", "top"), required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--k", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--month", type=int, help="month index for --scheme top (default: first)")
    p.add_argument("--stratify-folds", action="store_true",
                   help="deal folds per class instead of contiguous blocks")
    score_arg(p)
    return parser


# -- subcommands ------------------------------------------------------------


def cmd_score(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        streams=(args.stream,),
        scores=tuple(args.scorer),
        embeddings=args.embeddings,
        hyperplane=args.hyperplane,
        cade_train=args.cade_train,
    ).check()
    ctx = ScoringContext.from_config(cfg)
    stream = read_stream(args.stream)
    for spec in args.scorer:
        stream, _ = ensure_score(stream, spec, ctx)
    text = dump_stream(stream, "jsonl" if args.format == "json" else "csv")
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_rc_curve(args: argparse.Namespace) -> int:
    stream, column, reg = _scored_stream(args)
    records = list(stream.records())
    curve = rc_curve(uncertainties(records, column, reg), [r.correct for r in records])
    if args.format == "json":
        text = json.dumps(
            {"aurc": round(curve.aurc, 6), "aurc_x100": round(100 * curve.aurc, 6), "n": curve.n}
        ) + "\n"
    else:
        text = render_rc_csv(curve)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"rc.{'json' if args.format == 'json' else 'csv'}").write_text(text, encoding="utf-8")
        render_rc_svg(curve, args.out / "rc.svg", title=f"{stream.dataset_name} / {column}")
    else:
        sys.stdout.write(text)
    if args.svg:
        render_rc_svg(curve, args.svg, title=f"{stream.dataset_name} / {column}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    stream, column, reg = _scored_stream(args)
    cfg = RejectionConfig(args.rho, args.method, column, DEFAULT_COVERAGE_GRID, args.window)
    trace = run_posthoc_simulation(stream, cfg, reg)
    summary: dict[str, object] = {"score": column, "method": cfg.method, "rho": args.rho}
    summary.update(summarize(trace))
    if not args.no_aurc_f1:
        summary["aurc_f1_star"] = aurc_f1_star(stream, cfg, reg)
    csv_text = render_trace_csv(trace)
    json_text = render_summary_json(summary)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "trace.csv").write_text(csv_text, encoding="utf-8")
        (args.out / "summary.json").write_text(json_text, encoding="utf-8")
        render_temporal_svg(trace, args.rho, args.out / "temporal.svg",
                            title=f"{stream.dataset_name} / {column}")
    elif args.format == "json":
        sys.stdout.write(json_text)
    else:
        sys.stdout.write(csv_text)
        sys.stderr.write(json_text)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.streams:
        cfg = RunConfig(streams=tuple(args.streams))
    else:
        raise EvaluationError("evaluate needs --config or at least one stream")
    cfg = with_overrides(
        cfg,
        streams=tuple(args.streams) or None,
        out_dir=args.out,
        seed=args.seed,
        rhos=tuple(args.rho) if args.rho else None,
        scores=tuple(args.score) if args.score else None,
        sc_method=args.method,
        formats=(args.format, "svg") if args.format else None,
    )
    reports = evaluate(cfg)
    print(f"wrote {len(reports)} report(s) to {cfg.out_dir}")
    return 0


def cmd_pareto(args: argparse.Namespace) -> int:
    rows: dict[str, list[tuple[float | None, ...]]] = {}
    with args.pillars.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"method_id", "dataset", "f1", "sigma_f1", "aurc", "tau"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise EvaluationError(f"pillar CSV needs columns {sorted(needed)}")
        for line, row in enumerate(reader, start=2):
            try:
                vals = tuple(
                    None if row[c].strip() == "" else float(row[c])
                    for c in ("f1", "sigma_f1", "aurc", "tau")
                )
            except ValueError:
                raise EvaluationError(f"line {line}: non-numeric pillar value") from None
            rows.setdefault(row["method_id"], []).append(vals)

    vectors, unrankable = [], []
    for method in sorted(rows):
        try:
            vectors.append(aggregate_pillars(rows[method], method))
        except UndefinedPillar:
            unrankable.append(method)
    flags = dict(pareto_front(vectors))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method_id", "non_dominated"])
    for method in sorted(rows):
        writer.writerow([method, "" if method in unrankable else str(flags[method]).lower()])
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "pareto.csv").write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.scheme == "top":
        scored, column, reg = _scored_stream(args)
        month = scored.batches[0].month_index if args.month is None else args.month
        matches = [b for b in scored.batches if b.month_index == month]
        if not matches:
            raise EvaluationError(f"no month {month} in stream")
        result = select_uncertain(matches[0], column, args.budget, reg)
    elif args.scheme == "stratk":
        pool = [(r.sample_id, r.y_true) for r in read_stream(args.stream).records()]
        result = stratk_sample(pool, args.budget, seed)
    else:
        scored, column, reg = _scored_stream(args)
        records = list(scored.records())
        u = uncertainties(records, column, reg)
        pool = list(zip((r.sample_id for r in records), u.tolist()))
        ids = [sid for sid, _ in pool]
        if len(set(ids)) != len(ids):
            raise EvaluationError("sample ids repeat across months; fold sampling needs unique ids")
        folds = assign_folds(ids, args.k, [r.y_true for r in records] if args.stratify_folds else None)
        result = uncertainty_fold_sample(pool, args.budget, args.k, folds)
    text = "".join(f"{sid}\n" for sid in result.selected_ids)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "selected.txt").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "score": cmd_score,
    "rc-curve": cmd_rc_curve,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "pareto": cmd_pareto,
    "sample": cmd_sample,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; that is an input error here
        return 1 if exc.code == 2 else int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (EvaluationError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
