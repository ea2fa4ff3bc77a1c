"""Synthetic drifting prediction streams for demos and end-to-end checks.

Each month draws labels and flips a drifting fraction of predictions into
errors. Two scores are attached to every record:

* ``oracle`` - errors get uncertainty in the top decile ``[0.9, 1.0)``,
  correct predictions ``[0, 0.9)``; a perfectly ranked confidence function.
* ``null``   - uniform noise, unrelated to correctness.

``prob_positive`` is set so that its max-softmax uncertainty equals the
oracle score, which makes ``msp_u`` usable on the same stream.
"""

from __future__ import annotations

import numpy as np

from .stream import MonthBatch, SampleRecord, TemporalStream


def drift_stream(
    seed: int,
    n_months: int = 24,
    month_size: int = 400,
    positive_rate: float = 0.1,
    error_start: float = 0.04,
    error_end: float = 0.09,
    shift: dict[int, float] | None = None,
    dataset_name: str = "synthetic",
) -> TemporalStream:
    """Build a stream whose error rate rises linearly from start to end.

    ``shift`` maps a month index to an amount added to every score of that
    month (clipped to [0, 1]); it simulates a sudden upward drift in
    uncertainty.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    shift = shift or {}
    error_rates = np.linspace(error_start, error_end, n_months)
    batches = []
    for m in range(n_months):
        y_true = (rng.random(month_size) < positive_rate).astype(int)
        wrong = rng.random(month_size) < error_rates[m]
        y_pred = np.where(wrong, 1 - y_true, y_true)
        oracle = np.where(wrong, rng.uniform(0.9, 1.0, month_size), rng.uniform(0.0, 0.9, month_size))
        null = rng.random(month_size)
        bump = shift.get(m, 0.0)
        oracle = np.clip(oracle + bump, 0.0, 1.0)
        null = np.clip(null + bump, 0.0, 1.0)
        prob = np.where(y_pred == 1, 0.5 + 0.5 * (1.0 - oracle), 0.5 - 0.5 * (1.0 - oracle))
        records = tuple(
            SampleRecord(
                sample_id=f"m{m:02d}-{i:04d}",
                month_index=m,
                y_true=int(y_true[i]),
                y_pred=int(y_pred[i]),
                prob_positive=float(prob[i]),
                scores={"oracle": float(oracle[i]), "null": float(null[i])},
            )
            for i in range(month_size)
        )
        batches.append(MonthBatch(m, records))
    return TemporalStream(dataset_name, tuple(batches), {"seed": str(seed)})
