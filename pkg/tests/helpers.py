"""Small stream builders shared by the tests."""

from __future__ import annotations

from scdrift.stream import MonthBatch, SampleRecord, TemporalStream


def make_stream(months, score_name: str = "u", dataset_name: str = "toy") -> TemporalStream:
    """Build a stream from per-month lists of ``(score, y_true, y_pred)`` triples.

    A bare float is shorthand for a correct negative prediction.
    """
    batches = []
    for m, rows in enumerate(months):
        recs = []
        for i, row in enumerate(rows):
            score, yt, yp = (row, 0, 0) if isinstance(row, (int, float)) else row
            recs.append(
                SampleRecord(f"m{m}-{i}", m, yt, yp, None, {score_name: float(score)})
            )
        batches.append(MonthBatch(m, tuple(recs)))
    return TemporalStream(dataset_name, tuple(batches))
