"""Temporal prediction streams: records, monthly batches, embeddings, file I/O.

Two line-oriented stream formats are supported.

CSV (header required)::

    sample_id,month_index,y_true,y_pred,prob_positive,score:msp_u,score:cade_ood

An empty cell means "absent". An optional ``embedding_id`` column is accepted.

JSON lines, one object per record::

    {"sample_id": "a", "month_index": 0, "y_true": 1, "y_pred": 1,
     "prob_positive": 0.93, "scores": {"msp_u": 0.14}}

Records must appear in non-decreasing month order. Months that are skipped
between the first and last observed month become empty batches, so batch
position always tracks calendar distance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateSampleId,
    EmptyStream,
    MalformedRecord,
    NonFiniteValue,
    NonMonotoneMonths,
)

CORE_COLUMNS = ("sample_id", "month_index", "y_true", "y_pred", "prob_positive")
SCORE_PREFIX = "score:"


@dataclass(frozen=True)
class SampleRecord:
    """One prediction event."""

    sample_id: str
    month_index: int
    y_true: int
    y_pred: int
    prob_positive: float | None = None
    scores: Mapping[str, float] = field(default_factory=dict)
    embedding_id: str | None = None

    def __post_init__(self) -> None:
        if self.y_true not in (0, 1) or self.y_pred not in (0, 1):
            raise ValueError(f"{self.sample_id}: labels must be 0 or 1")
        if self.month_index < 0:
            raise ValueError(f"{self.sample_id}: negative month_index")
        if self.prob_positive is not None and not 0.0 <= self.prob_positive <= 1.0:
            raise ValueError(f"{self.sample_id}: prob_positive outside [0, 1]")
        for name, value in self.scores.items():
            if not math.isfinite(value):
                raise ValueError(f"{self.sample_id}: score {name!r} is not finite")

    @property
    def correct(self) -> bool:
        return self.y_true == self.y_pred

    def with_scores(self, **scores: float) -> SampleRecord:
        merged = dict(self.scores)
        merged.update(scores)
        return SampleRecord(
            self.sample_id,
            self.month_index,
            self.y_true,
            self.y_pred,
            self.prob_positive,
            merged,
            self.embedding_id,
        )


@dataclass(frozen=True)
class MonthBatch:
    month_index: int
    records: tuple[SampleRecord, ...] = ()

    def __post_init__(self) -> None:
        for rec in self.records:
            if rec.month_index != self.month_index:
                raise ValueError(
                    f"record {rec.sample_id} has month {rec.month_index}, "
                    f"batch is month {self.month_index}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SampleRecord]:
        return iter(self.records)

    @property
    def sample_ids(self) -> list[str]:
        return [r.sample_id for r in self.records]


@dataclass(frozen=True)
class TemporalStream:
    """Ordered monthly batches plus free-form metadata (seed, method, budgets)."""

    dataset_name: str
    batches: tuple[MonthBatch, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.batches:
            raise EmptyStream("stream has no batches")
        months = [b.month_index for b in self.batches]
        if any(b <= a for a, b in zip(months, months[1:])):
            raise ValueError("batch month indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.batches)

    def records(self) -> Iterator[SampleRecord]:
        for batch in self.batches:
            yield from batch.records

    @property
    def n_records(self) -> int:
        return sum(len(b) for b in self.batches)

    @property
    def score_names(self) -> list[str]:
        names: set[str] = set()
        for rec in self.records():
            names.update(rec.scores)
        return sorted(names)

    def map_records(self, fn) -> TemporalStream:
        """Return a new stream with ``fn`` applied to every record."""
        batches = tuple(
            MonthBatch(b.month_index, tuple(fn(r) for r in b.records)) for b in self.batches
        )
        return TemporalStream(self.dataset_name, batches, dict(self.metadata))


def group_records(
    records: Iterable[SampleRecord],
    dataset_name: str = "",
    metadata: Mapping[str, str] | None = None,
) -> TemporalStream:
    """Group records already in month order into a stream, filling month gaps."""
    grouped: dict[int, list[SampleRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.month_index, []).append(rec)
    if not grouped:
        raise EmptyStream("no records")
    lo, hi = min(grouped), max(grouped)
    batches = tuple(MonthBatch(m, tuple(grouped.get(m, ()))) for m in range(lo, hi + 1))
    return TemporalStream(dataset_name, batches, dict(metadata or {}))


# -- parsing ----------------------------------------------------------------


def _lines(source: str | Iterable[str]) -> list[str]:
    if isinstance(source, str):
        return source.splitlines()
    return [line.rstrip("\r\n") for line in source]


def _parse_label(raw: object, name: str, line: int) -> int:
    if isinstance(raw, bool) or raw not in (0, 1, "0", "1"):
        raise MalformedRecord(line, f"{name} must be 0 or 1, got {raw!r}")
    return int(raw)


def _parse_float(raw: object, name: str, line: int) -> float:
    if isinstance(raw, bool):
        raise MalformedRecord(line, f"{name} is not a number: {raw!r}")
    try:
        value = float(raw)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise MalformedRecord(line, f"{name} is not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise MalformedRecord(line, f"{name} is not finite: {raw!r}")
    return value


def _parse_month(raw: object, line: int) -> int:
    if isinstance(raw, bool):
        raise MalformedRecord(line, f"month_index must be an integer, got {raw!r}")
    if isinstance(raw, int):
        value = raw
    else:
        try:
            value = int(str(raw))
        except ValueError:
            raise MalformedRecord(line, f"month_index must be an integer, got {raw!r}") from None
    if value < 0:
        raise MalformedRecord(line, f"month_index must be non-negative, got {value}")
    return value


def _build_record(
    line: int,
    sample_id: object,
    month: object,
    y_true: object,
    y_pred: object,
    prob: object,
    scores: Mapping[str, object],
    embedding_id: object,
) -> SampleRecord:
    if not isinstance(sample_id, str) or not sample_id:
        raise MalformedRecord(line, "sample_id must be a non-empty string")
    prob_value = None if prob is None else _parse_float(prob, "prob_positive", line)
    if prob_value is not None and not 0.0 <= prob_value <= 1.0:
        raise MalformedRecord(line, f"prob_positive outside [0, 1]: {prob_value}")
    parsed_scores = {k: _parse_float(v, f"score:{k}", line) for k, v in scores.items()}
    if embedding_id is not None and not isinstance(embedding_id, str):
        raise MalformedRecord(line, "embedding_id must be a string")
    return SampleRecord(
        sample_id=sample_id,
        month_index=_parse_month(month, line),
        y_true=_parse_label(y_true, "y_true", line),
        y_pred=_parse_label(y_pred, "y_pred", line),
        prob_positive=prob_value,
        scores=parsed_scores,
        embedding_id=embedding_id or None,
    )


def _iter_csv(lines: list[str]) -> Iterator[tuple[int, SampleRecord]]:
    rows = csv.reader(lines)
    header: list[str] | None = None
    for row in rows:
        line = rows.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [h.strip() for h in row]
            missing = [c for c in CORE_COLUMNS if c not in header]
            if missing:
                raise MalformedRecord(line, f"header lacks columns {missing}")
            extra = [
                h for h in header
                if h not in CORE_COLUMNS and h != "embedding_id" and not h.startswith(SCORE_PREFIX)
            ]
            if extra:
                raise MalformedRecord(line, f"unknown columns {extra}")
            if len(set(header)) != len(header):
                raise MalformedRecord(line, "duplicate column names")
            continue
        if len(row) != len(header):
            raise MalformedRecord(line, f"expected {len(header)} cells, got {len(row)}")
        cells = dict(zip(header, row))
        scores = {
            h[len(SCORE_PREFIX):]: cells[h]
            for h in header
            if h.startswith(SCORE_PREFIX) and cells[h] != ""
        }
        yield line, _build_record(
            line,
            cells["sample_id"],
            cells["month_index"],
            cells["y_true"],
            cells["y_pred"],
            cells["prob_positive"] or None,
            scores,
            cells.get("embedding_id") or None,
        )


def _iter_jsonl(lines: list[str]) -> Iterator[tuple[int, SampleRecord]]:
    allowed = set(CORE_COLUMNS) | {"scores", "embedding_id"}
    for line, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedRecord(line, "expected a JSON object")
        unknown = set(obj) - allowed
        if unknown:
            raise MalformedRecord(line, f"unknown keys {sorted(unknown)}")
        for key in ("sample_id", "month_index", "y_true", "y_pred"):
            if key not in obj:
                raise MalformedRecord(line, f"missing key {key!r}")
        scores = obj.get("scores", {})
        if not isinstance(scores, dict):
            raise MalformedRecord(line, "scores must be an object")
        yield line, _build_record(
            line,
            obj["sample_id"],
            obj["month_index"],
            obj["y_true"],
            obj["y_pred"],
            obj.get("prob_positive"),
            scores,
            obj.get("embedding_id"),
        )


def parse_stream(
    source: str | Iterable[str],
    format: str = "csv",
    *,
    dataset_name: str = "",
    metadata: Mapping[str, str] | None = None,
) -> TemporalStream:
    """Parse CSV or JSON-lines text into a validated :class:`TemporalStream`.

    Raises on the first malformed record with its 1-based line number.
    """
    lines = _lines(source)
    if format == "csv":
        parsed = _iter_csv(lines)
    elif format in ("jsonl", "json-lines", "json"):
        parsed = _iter_jsonl(lines)
    else:
        raise ValueError(f"unknown stream format {format!r}")

    records: list[SampleRecord] = []
    seen: set[str] = set()
    current = -1
    for line, rec in parsed:
        if rec.month_index < current:
            raise NonMonotoneMonths(
                line, f"month {rec.month_index} follows month {current}"
            )
        if rec.month_index != current:
            current = rec.month_index
            seen = set()
        if rec.sample_id in seen:
            raise DuplicateSampleId(
                line, f"sample_id {rec.sample_id!r} repeated in month {current}"
            )
        seen.add(rec.sample_id)
        records.append(rec)
    if not records:
        raise EmptyStream("input contains no records")
    return group_records(records, dataset_name, metadata)


def format_for_path(path: str | Path) -> str:
    return "jsonl" if Path(path).suffix.lower() in (".jsonl", ".json", ".ndjson") else "csv"


def read_stream(path: str | Path, format: str | None = None) -> TemporalStream:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        text = fh.read()
    return parse_stream(text, format or format_for_path(path), dataset_name=path.stem)


def dump_stream(stream: TemporalStream, format: str = "csv") -> str:
    """Serialize ``stream`` so that :func:`parse_stream` reproduces every field."""
    records = list(stream.records())
    if format == "csv":
        score_names = stream.score_names
        with_emb = any(r.embedding_id is not None for r in records)
        header = list(CORE_COLUMNS) + (["embedding_id"] if with_emb else [])
        header += [SCORE_PREFIX + s for s in score_names]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            row = [
                r.sample_id,
                r.month_index,
                r.y_true,
                r.y_pred,
                "" if r.prob_positive is None else repr(r.prob_positive),
            ]
            if with_emb:
                row.append(r.embedding_id or "")
            row += ["" if s not in r.scores else repr(float(r.scores[s])) for s in score_names]
            writer.writerow(row)
        return buf.getvalue()
    if format in ("jsonl", "json-lines", "json"):
        out = []
        for r in records:
            obj: dict[str, object] = {
                "sample_id": r.sample_id,
                "month_index": r.month_index,
                "y_true": r.y_true,
                "y_pred": r.y_pred,
            }
            if r.prob_positive is not None:
                obj["prob_positive"] = r.prob_positive
            if r.scores:
                obj["scores"] = {k: float(r.scores[k]) for k in sorted(r.scores)}
            if r.embedding_id is not None:
                obj["embedding_id"] = r.embedding_id
            out.append(json.dumps(obj))
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown stream format {format!r}")


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    required: frozenset[str]
    missing: tuple[tuple[int, str, str], ...]  # (month_index, sample_id, score_name)

    @property
    def passed(self) -> bool:
        return not self.missing

    def summary(self) -> str:
        if self.passed:
            return "ok"
        lines = [f"{len(self.missing)} missing score value(s):"]
        lines += [f"  month {m} sample {sid}: {name}" for m, sid, name in self.missing]
        return "\n".join(lines)


def validate_stream(stream: TemporalStream, required_scores: Iterable[str]) -> ValidationReport:
    required = frozenset(required_scores)
    missing = tuple(
        (rec.month_index, rec.sample_id, name)
        for rec in stream.records()
        for name in sorted(required)
        if name not in rec.scores
    )
    return ValidationReport(required, missing)


# -- embeddings -------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    rows: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        for sid, vec in self.rows.items():
            if vec.shape != (self.dimension,):
                raise DimensionMismatch(f"{sid}: expected {self.dimension} values")
            if not np.all(np.isfinite(vec)):
                raise NonFiniteValue(f"{sid}: non-finite entry")

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, sample_id: object) -> bool:
        return sample_id in self.rows

    def vector(self, sample_id: str) -> np.ndarray:
        try:
            return self.rows[sample_id]
        except KeyError:
            raise KeyError(f"no embedding for sample {sample_id!r}") from None


def parse_embeddings(source: str | Iterable[str]) -> EmbeddingTable:
    """Parse ``dim=<d>`` followed by ``sample_id,v1,...,vd`` rows."""
    dim: int | None = None
    rows: dict[str, np.ndarray] = {}
    for line, text in enumerate(_lines(source), start=1):
        text = text.strip()
        if not text:
            continue
        if dim is None:
            key, _, value = text.partition("=")
            if key.strip() != "dim":
                raise MalformedRecord(line, "first line must be 'dim=<d>'")
            try:
                dim = int(value)
            except ValueError:
                raise MalformedRecord(line, f"bad dimension {value!r}") from None
            if dim <= 0:
                raise MalformedRecord(line, "dimension must be positive")
            continue
        sid, *cells = [c.strip() for c in text.split(",")]
        if not sid:
            raise MalformedRecord(line, "empty sample_id")
        if len(cells) != dim:
            raise DimensionMismatch(f"expected {dim} values, got {len(cells)}", row=line)
        try:
            vec = np.array([float(c) for c in cells], dtype=float)
        except ValueError:
            raise MalformedRecord(line, "non-numeric embedding value") from None
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValue("non-finite embedding value", row=line)
        if sid in rows:
            raise MalformedRecord(line, f"duplicate sample_id {sid!r}")
        rows[sid] = vec
    if dim is None:
        raise EmptyStream("embedding input is empty")
    return EmbeddingTable(dim, rows)


def read_embeddings(path: str | Path) -> EmbeddingTable:
    with Path(path).open(encoding="utf-8") as fh:
        return parse_embeddings(fh.read())


def dump_embeddings(table: EmbeddingTable) -> str:
    out = [f"dim={table.dimension}"]
    for sid, vec in table.rows.items():
        out.append(",".join([sid] + [repr(float(v)) for v in vec]))
    return "\n".join(out) + "\n"
