"""Label-dependent splits of a trace into two populations."""

from __future__ import annotations

import numpy as np

from faithcheck.core import Label, Trace
from faithcheck.harness.worlds import make_rng

# keeps split draws independent of any sampler seeded with the same integer
SPLIT_STREAM = 0x5B11


def split_populations(trace: Trace, positive_label: Label, p: float, seed: int,
                      allow_boundary: bool = False) -> tuple[Trace, Trace]:
    """Send positives to population 1 with probability ``p``, others with ``1 - p``.

    Every record lands in exactly one population and record order is kept.
    ``p`` must lie strictly inside (0, 1) unless ``allow_boundary`` is set.
    """
    lo_ok = p >= 0 if allow_boundary else p > 0
    hi_ok = p <= 1 if allow_boundary else p < 1
    if not (lo_ok and hi_ok):
        raise ValueError(f"p must lie in (0, 1), got {p}")
    u = make_rng(seed, SPLIT_STREAM).random(len(trace))
    positive = np.array([lab == positive_label for lab in trace.labels], dtype=bool)
    first = np.where(positive, u < p, u < 1 - p)
    one = [r for r, f in zip(trace.records, first) if f]
    two = [r for r, f in zip(trace.records, first) if not f]
    meta = {"split_seed": seed, "split_p": p, "positive_label": positive_label}
    return (trace.with_records(one, population=1, **meta),
            trace.with_records(two, population=2, **meta))
