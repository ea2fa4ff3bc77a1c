"""Metric tables, per-month trace CSVs, and SVG plots.

Every float is written with six decimals and plots are built from plain
strings, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from .reliability import RCCurve
from .simulation import SimulationTrace

FLOAT_FMT = "{:.6f}"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FMT.format(value)
    return str(value)


def round6(value):
    return None if value is None else round(float(value), 6)


@dataclass(frozen=True)
class MetricsReport:
    """One row of the results table: baseline, reliability and stability pillars.

    Percent-valued fields: f1_mean, fnr_mean, sigma_f1 (percentage points),
    bf_star. ``aurc`` is raw in [0, 1]; ``aurc_x100`` is the table scale.
    """

    method_id: str
    dataset_name: str
    score_name: str
    sc_method: str
    rho: int
    monthly_budget: int | None
    initial_budget: int | None
    # baseline
    f1_mean: float | None
    fnr_mean: float | None
    auroc: float | None
    # reliability
    aurc: float
    aurc_f1_star: float | None
    # stability
    sigma_f1: float | None
    tau: float | None
    bf_star: float | None
    delta_rej: float
    sigma_rej: float
    pareto_flag: bool | None = None

    def __post_init__(self) -> None:
        for name in ("f1_mean", "fnr_mean", "bf_star"):
            v = getattr(self, name)
            if v is not None and not -1e-9 <= v <= 100 + 1e-9:
                raise ValueError(f"{name}={v} outside [0, 100]")
        if self.auroc is not None and not 0.0 <= self.auroc <= 1.0:
            raise ValueError(f"auroc={self.auroc} outside [0, 1]")
        if self.tau is not None and not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau={self.tau} outside [-1, 1]")

    @property
    def aurc_x100(self) -> float:
        return 100.0 * self.aurc

    def sort_key(self) -> tuple:
        return (self.method_id, self.dataset_name, self.rho, self.score_name, self.sc_method)

    def as_row(self) -> dict[str, object]:
        row = asdict(self)
        row["aurc_x100"] = self.aurc_x100
        return {col: row[attr] for col, attr in TABLE_COLUMNS}


# (column header, attribute) in table order: identity, baseline, reliability, stability
TABLE_COLUMNS: tuple[tuple[str, str], ...] = (
    ("method_id", "method_id"),
    ("dataset", "dataset_name"),
    ("score", "score_name"),
    ("sc_method", "sc_method"),
    ("monthly_budget", "monthly_budget"),
    ("initial_budget", "initial_budget"),
    ("rho", "rho"),
    ("f1", "f1_mean"),
    ("fnr", "fnr_mean"),
    ("auroc", "auroc"),
    ("aurc", "aurc"),
    ("aurc_x100", "aurc_x100"),
    ("aurc_f1_star", "aurc_f1_star"),
    ("sigma_f1", "sigma_f1"),
    ("tau", "tau"),
    ("bf_star", "bf_star"),
    ("delta_rej", "delta_rej"),
    ("sigma_rej", "sigma_rej"),
    ("pareto", "pareto_flag"),
)


def render_table(reports: Iterable[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([col for col, _ in TABLE_COLUMNS])
    for rep in reports:
        writer.writerow([fmt(v) for v in rep.as_row().values()])
    return buf.getvalue()


def render_table_json(reports: Iterable[MetricsReport]) -> str:
    rows = []
    for rep in reports:
        row = rep.as_row()
        rows.append({k: round6(v) if isinstance(v, float) else v for k, v in row.items()})
    return json.dumps(rows, indent=2) + "\n"


def parse_table(text: str) -> list[MetricsReport]:
    """Inverse of :func:`render_table` (floats come back rounded to 6 decimals)."""
    types = {f.name: f.type for f in fields(MetricsReport)}
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        kwargs: dict[str, object] = {}
        for col, attr in TABLE_COLUMNS:
            if attr not in types:
                continue
            raw = row[col]
            kind = types[attr]
            if raw == "":
                kwargs[attr] = None
            elif "bool" in kind:
                kwargs[attr] = raw == "true"
            elif "int" in kind:
                kwargs[attr] = int(raw)
            elif "float" in kind:
                kwargs[attr] = float(raw)
            else:
                kwargs[attr] = raw
        if row.get("aurc_x100"):
            # the x100 column carries two more significant digits
            kwargs["aurc"] = float(row["aurc_x100"]) / 100.0
        out.append(MetricsReport(**kwargs))
    return out


# -- simulation traces ------------------------------------------------------

TRACE_COLUMNS = (
    "month",
    "threshold_low",
    "threshold_high",
    "rejections",
    "retained_f1",
    "baseline_f1",
    "n_samples",
    "retained_count",
    "requested_quota",
    "applied_quota",
    "realized_fraction",
)


def render_trace_csv(trace: SimulationTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for m in trace.months:
        writer.writerow(
            [
                m.month_index,
                fmt(m.threshold_low),
                fmt(m.threshold_high),
                m.rejections,
                fmt(m.retained_f1),
                fmt(m.baseline_f1),
                m.n_samples,
                m.retained_count,
                m.requested_quota,
                m.applied_quota,
                fmt(m.realized_fraction),
            ]
        )
    return buf.getvalue()


def render_summary_json(summary: dict[str, object]) -> str:
    clean = {k: round6(v) if isinstance(v, float) else v for k, v in summary.items()}
    return json.dumps(clean, indent=2) + "\n"


def render_rc_csv(curve: RCCurve) -> str:
    lines = ["coverage,risk"]
    lines += [f"{fmt(c)},{fmt(r)}" for c, r in curve.points]
    lines.append(f"aurc={fmt(curve.aurc)}")
    return "\n".join(lines) + "\n"


# -- SVG --------------------------------------------------------------------

_W, _PANEL_H = 560, 220
_ML, _MR, _MT, _MB = 64, 20, 34, 42
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


class _Panel:
    """Maps data coordinates into one plotting rectangle."""

    def __init__(self, top: float, x_range: tuple[float, float], y_range: tuple[float, float]):
        self.x0, self.x1 = _ML, _W - _MR
        self.y0, self.y1 = top + _MT, top + _PANEL_H - _MB
        self.xr, self.yr = x_range, y_range

    def px(self, x: float) -> float:
        lo, hi = self.xr
        return self.x0 + (x - lo) / ((hi - lo) or 1.0) * (self.x1 - self.x0)

    def py(self, y: float) -> float:
        lo, hi = self.yr
        return self.y1 - (y - lo) / ((hi - lo) or 1.0) * (self.y1 - self.y0)

    def frame(self, title: str, xlabel: str, ylabel: str, xticks, yticks) -> list[str]:
        out = [
            f'<rect x="{self.x0:.2f}" y="{self.y0:.2f}" width="{self.x1 - self.x0:.2f}" '
            f'height="{self.y1 - self.y0:.2f}" fill="none" stroke="#000000"/>',
            f'<text x="{(self.x0 + self.x1) / 2:.2f}" y="{self.y0 - 10:.2f}" '
            f'text-anchor="middle" font-size="13">{escape(title)}</text>',
            f'<text x="{(self.x0 + self.x1) / 2:.2f}" y="{self.y1 + 34:.2f}" '
            f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="{self.x0 - 46:.2f}" y="{(self.y0 + self.y1) / 2:.2f}" text-anchor="middle" '
            f'font-size="12" transform="rotate(-90 {self.x0 - 46:.2f} '
            f'{(self.y0 + self.y1) / 2:.2f})">{escape(ylabel)}</text>',
        ]
        for t, label in xticks:
            x = self.px(t)
            out.append(f'<line x1="{x:.2f}" y1="{self.y1:.2f}" x2="{x:.2f}" y2="{self.y1 + 4:.2f}" stroke="#000000"/>')
            out.append(f'<text x="{x:.2f}" y="{self.y1 + 16:.2f}" text-anchor="middle" font-size="10">{escape(label)}</text>')
        for t, label in yticks:
            y = self.py(t)
            out.append(f'<line x1="{self.x0 - 4:.2f}" y1="{y:.2f}" x2="{self.x0:.2f}" y2="{y:.2f}" stroke="#000000"/>')
            out.append(f'<text x="{self.x0 - 7:.2f}" y="{y + 3:.2f}" text-anchor="end" font-size="10">{escape(label)}</text>')
        return out

    def polylines(self, xs, ys, color: str, dash: bool = False) -> list[str]:
        """One polyline per run of defined points; ``None`` values leave a gap."""
        runs: list[list[tuple[float, float]]] = [[]]
        for x, y in zip(xs, ys):
            if y is None:
                if runs[-1]:
                    runs.append([])
                continue
            runs[-1].append((self.px(x), self.py(y)))
        style = ' stroke-dasharray="6 4"' if dash else ""
        out = []
        for run in runs:
            if not run:
                continue
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in run)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{style}/>')
            if len(run) == 1:
                x, y = run[0]
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{color}"/>')
        return out


def _ticks(lo: float, hi: float, n: int = 4) -> list[tuple[float, str]]:
    step = (hi - lo) / n if hi > lo else 1.0
    return [(lo + i * step, f"{lo + i * step:.2f}".rstrip("0").rstrip(".") or "0") for i in range(n + 1)]


def _month_ticks(months: Sequence[int]) -> list[tuple[float, str]]:
    if not months:
        return []
    stride = max(1, len(months) // 8)
    return [(m, str(m)) for m in months[::stride]]


def _document(height: float, body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{height:.0f}" '
        f'viewBox="0 0 {_W} {height:.0f}" font-family="sans-serif">\n'
        f'<rect width="{_W}" height="{height:.0f}" fill="#ffffff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _legend(x: float, y: float, items: Sequence[tuple[str, str]]) -> list[str]:
    out = []
    for i, (label, color) in enumerate(items):
        yy = y + 14 * i
        out.append(f'<line x1="{x:.2f}" y1="{yy:.2f}" x2="{x + 18:.2f}" y2="{yy:.2f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 22:.2f}" y="{yy + 4:.2f}" font-size="10">{escape(label)}</text>')
    return out


def rc_svg(curve: RCCurve, title: str = "Risk-coverage") -> str:
    panel = _Panel(0, (0.0, 1.0), (0.0, 1.0))
    body = panel.frame(
        f"{title} (AURC = {curve.aurc:.6f})", "coverage", "risk", _ticks(0, 1), _ticks(0, 1)
    )
    body += panel.polylines(curve.coverage.tolist(), curve.risk.tolist(), _COLORS[0])
    return _document(_PANEL_H + 40, body)


def render_rc_svg(curve: RCCurve, path: str | Path, title: str = "Risk-coverage") -> Path:
    path = Path(path)
    path.write_text(rc_svg(curve, title), encoding="utf-8")
    return path


def temporal_svg(trace: SimulationTrace, rho: int | None = None, title: str = "") -> str:
    """Three stacked panels: F1 with/without abstention, rejections vs quota, F1 gain."""
    rho = trace.config.quota_rho if rho is None else rho
    months = [m.month_index for m in trace.months]
    x_range = (months[0], months[-1]) if months else (0, 1)
    if x_range[0] == x_range[1]:
        x_range = (x_range[0] - 1, x_range[1] + 1)
    xt = _month_ticks(months)
    body: list[str] = []

    top = _Panel(0, x_range, (0.0, 1.0))
    body += top.frame(f"{title} F1 after rejection".strip(), "month", "F1", xt, _ticks(0, 1))
    body += top.polylines(months, trace.baseline_f1, _COLORS[1], dash=True)
    body += top.polylines(months, trace.retained_f1, _COLORS[0])
    body += _legend(_W - _MR - 120, _MT + 12, [("with rejection", _COLORS[0]), ("no rejection", _COLORS[1])])

    rej = trace.rejections
    y_hi = max([rho, *rej]) * 1.1 or 1.0
    mid = _Panel(_PANEL_H, x_range, (0.0, y_hi))
    body += mid.frame(f"Monthly rejections (rho = {rho})", "month", "rejections", xt, _ticks(0, y_hi))
    body += mid.polylines(x_range, [rho, rho], "#555555", dash=True)
    body += mid.polylines(months, rej, _COLORS[2])

    delta = [
        None if a is None or b is None else a - b
        for a, b in zip(trace.retained_f1, trace.baseline_f1)
    ]
    span = max([abs(d) for d in delta if d is not None] + [0.0]) * 1.1 or 0.1
    low = _Panel(2 * _PANEL_H, x_range, (-span, span))
    body += low.frame("F1 change from rejection", "month", "delta F1", xt, _ticks(-span, span))
    body += low.polylines(x_range, [0.0, 0.0], "#555555", dash=True)
    body += low.polylines(months, delta, _COLORS[3])
    return _document(3 * _PANEL_H, body)


def render_temporal_svg(
    trace: SimulationTrace, rho: int | None, path: str | Path, title: str = ""
) -> Path:
    path = Path(path)
    path.write_text(temporal_svg(trace, rho, title), encoding="utf-8")
    return path
