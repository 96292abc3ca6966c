"""Repeated-estimation experiments over a parameter grid."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from faithcheck.core import ExplanationPayload, Trace, TraceRecord
from faithcheck.estimators import Relation, estimate_global, uniqueness
from faithcheck.explainers.anchors import AnchorResult, find_anchors
from faithcheck.harness.worlds import World, WorldSpec, generate_world, make_rng

MEASURES = ("consistency", "sufficiency")


@dataclass(frozen=True)
class SweepRow:
    param: float
    mean: float
    std: float
    uniqueness: float


@dataclass
class SweepResult:
    measure: str
    rows: list[SweepRow]
    repetitions: int
    seed: int
    details: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "mean", "std", "uniqueness"])
        for r in self.rows:
            w.writerow([format(r.param, ".12g"), repr(r.mean), repr(r.std), repr(r.uniqueness)])
        return buf.getvalue()


def _world(source: WorldSpec | World) -> World:
    return source if isinstance(source, World) else generate_world(source)


def _rep_rng(seed: int, point: int, rep: int) -> np.random.Generator:
    return make_rng(seed, point, rep)


def sweep_samples(world: WorldSpec | World, n_grid: Sequence[int], repetitions: int,
                  measures: Sequence[str] = MEASURES, explainer: str | None = None,
                  ) -> dict[str, SweepResult]:
    """Mean and spread of the estimate as a function of the sample size.

    Repetition ``r`` at grid point ``i`` draws from its own generator seeded by
    ``(seed, i, r)``, so results do not depend on evaluation order.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    w = _world(world)
    name = explainer or w.explainers[0]
    seed = w.spec.seed
    acc = {m: [] for m in measures}
    for i, n in enumerate(n_grid):
        ests = {m: [] for m in measures}
        uniq = []
        for r in range(repetitions):
            trace = w.sample(int(n), _rep_rng(seed, i, r))[name]
            uniq.append(uniqueness(trace))
            for m in measures:
                ests[m].append(estimate_global(trace, Relation.parse(m)).estimate)
        for m in measures:
            acc[m].append(SweepRow(float(n), float(np.mean(ests[m])), float(np.std(ests[m])),
                                   float(np.mean(uniq))))
    return {m: SweepResult(m, rows, repetitions, seed) for m, rows in acc.items()}


def first_reaching(result: SweepResult, level: float) -> float | None:
    """Smallest grid parameter whose mean estimate reaches ``level``."""
    for row in result.rows:
        if row.mean >= level:
            return row.param
    return None


def anchor_traces(search: Trace, evaluation: Trace,
                  thresholds: Sequence[float]) -> tuple[dict[float, Trace], dict[float, list[AnchorResult]]]:
    """Re-explain every evaluation record with an anchor at each threshold."""
    records = {t: [] for t in thresholds}
    anchors = {t: [] for t in thresholds}
    for rec in evaluation.records:
        found = find_anchors(rec.instance, rec.prediction, search, list(thresholds))
        for t in thresholds:
            a = found[t]
            anchors[t].append(a)
            records[t].append(TraceRecord(rec.instance, rec.prediction,
                                          ExplanationPayload.from_rule(a.rule)))
    traces = {t: evaluation.with_records(records[t], anchor_threshold=t) for t in thresholds}
    return traces, anchors


def sweep_threshold(source: WorldSpec | World | Trace, thresholds: Sequence[float],
                    search_sample_size: int, eval_size: int = 200, seed: int = 0,
                    explainer: str | None = None) -> dict[str, SweepResult]:
    """Anchor quality across precision thresholds.

    With a world, the search sample and the evaluation records are fresh draws.
    With a trace, its first ``search_sample_size`` records form the search
    sample and the next ``eval_size`` records are explained.  Returned results
    carry the anchors in ``details["anchors"]``.
    """
    ts = list(thresholds)
    if any(not 0 < t <= 1 for t in ts):
        raise ValueError("thresholds must lie in (0, 1]")
    if ts != sorted(ts):
        raise ValueError("thresholds must be ascending")
    if isinstance(source, Trace):
        if len(source) <= search_sample_size:
            raise ValueError("trace too short for the requested search sample")
        search = source.with_records(source.records[:search_sample_size])
        evaluation = source.with_records(
            source.records[search_sample_size:search_sample_size + eval_size])
    else:
        w = _world(source)
        name = explainer or w.explainers[0]
        rng = _rep_rng(seed, 0, 0)
        search = w.sample(search_sample_size, rng)[name]
        evaluation = w.sample(eval_size, rng)[name]
    traces, anchors = anchor_traces(search, evaluation, ts)
    out = {}
    for m in MEASURES:
        rows = []
        for t in ts:
            rep = estimate_global(traces[t], Relation.parse(m))
            rows.append(SweepRow(float(t), rep.estimate, 0.0, rep.uniqueness))
        out[m] = SweepResult(m, rows, 1, seed, {"anchors": anchors, "search": search,
                                                "traces": traces})
    return out
