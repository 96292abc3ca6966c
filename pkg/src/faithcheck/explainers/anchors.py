"""Hyperrectangle anchors found by greedy cut addition, and rule precision.

The search starts from the unconstrained box and repeatedly adds the single
cut that maximises empirical precision on the search sample: a midpoint cut
on a numeric feature (keeping the side ``x`` is on) or a pin of a categorical
feature to ``x``'s value.  The path of boxes does not depend on the
threshold, which only decides where to stop; a higher threshold therefore
always returns a refinement of the lower-threshold anchor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from faithcheck.core import FeatureTable, Instance, Trace
from faithcheck.rules import Bound, Hyperrectangle, ScopedRule, is_numeric


def precision(rule: ScopedRule, label: str, trace: Trace) -> float | None:
    """Share of covered records predicted ``label``; None if the rule covers nothing."""
    if len(trace) == 0:
        raise ValueError("precision needs a nonempty trace")
    covered = rule.mask(trace.table)
    n = int(covered.sum())
    if n == 0:
        return None
    hits = np.asarray(trace.labels, dtype=object)[covered] == label
    return float(hits.sum() / n)


@dataclass(frozen=True)
class AnchorStep:
    feature: str
    side: str  # "lo", "hi" or "eq"
    value: float | str
    precision: float
    coverage: int


@dataclass(frozen=True)
class AnchorResult:
    rule: Hyperrectangle
    precision: float | None
    coverage: int
    reached: bool
    steps: tuple[AnchorStep, ...] = ()

    @property
    def unreachable(self) -> bool:
        return not self.reached


def _candidates(x: Instance, table: FeatureTable, hit: np.ndarray, cov: np.ndarray, pinned: set):
    """Best cut per feature: (same, kept, feature index, value, side)."""
    out = []
    rows = np.flatnonzero(cov)
    for j, name in enumerate(table.schema):
        xv = x.features[j]
        if is_numeric(xv):
            vals = table.numeric[rows, j]
            if np.isnan(vals).any():
                raise ValueError(f"feature {name!r} is numeric in x but categorical in the sample")
            order = np.argsort(vals, kind="stable")
            v, h = vals[order], hit[rows][order].astype(np.int64)
            cut = np.flatnonzero(v[1:] != v[:-1])
            if not len(cut):
                continue
            mids = (v[cut] + v[cut + 1]) / 2
            cum = np.cumsum(h)
            below_n, below_hit = cut + 1, cum[cut]
            above = float(xv) > mids
            kept = np.where(above, len(v) - below_n, below_n)
            same = np.where(above, cum[-1] - below_hit, below_hit)
            # best precision, then larger coverage, then smaller threshold;
            # float prefilter, exact comparison among the near-ties
            prec = same / kept
            near = np.flatnonzero(prec >= prec.max() - 1e-9)
            i = max(near, key=lambda k: (Fraction(int(same[k]), int(kept[k])), int(kept[k]), -k))
            out.append((int(same[i]), int(kept[i]), j, float(mids[i]), "lo" if above[i] else "hi"))
        else:
            if name in pinned:
                continue
            vals = table.categorical[rows, j]
            match = vals == xv
            kept = int(match.sum())
            if kept == 0 or kept == len(rows):
                continue
            out.append((int(hit[rows][match].sum()), kept, j, xv, "eq"))
    return out


def anchor_path(x: Instance, label: str, search_sample: Trace) -> Iterator[AnchorResult]:
    """Yield the greedy sequence of anchors, starting with the unconstrained box.

    The walk ends when no cut can shrink the covered set without emptying it,
    i.e. the box covers only records indistinguishable from ``x`` by cuts.
    """
    if len(search_sample) == 0:
        raise ValueError("anchor search needs a nonempty sample")
    table = search_sample.table
    if len(x.features) != len(table.schema):
        raise ValueError("instance does not match the search sample's schema")
    hit = np.asarray(search_sample.labels, dtype=object) == label
    cov = np.ones(len(table), dtype=bool)
    bounds: dict[str, Bound] = {}
    steps: list[AnchorStep] = []
    same, kept = int(hit.sum()), len(table)
    while True:
        yield AnchorResult(Hyperrectangle(bounds), same / kept if kept else None, kept,
                           False, tuple(steps))
        cands = _candidates(x, table, hit, cov, {n for n, b in bounds.items() if b.eq is not None})
        if not cands:
            return
        same, kept, j, value, side = max(
            cands, key=lambda c: (Fraction(c[0], c[1]), c[1], -c[2]))
        name = table.schema[j]
        old = bounds.get(name, Bound())
        if side == "lo":
            bounds[name] = Bound(lo=value, hi=old.hi)
            cov &= table.numeric[:, j] > value
        elif side == "hi":
            bounds[name] = Bound(lo=old.lo, hi=value)
            cov &= table.numeric[:, j] <= value
        else:
            bounds[name] = Bound(eq=value)
            cov &= table.categorical[:, j] == value
        steps.append(AnchorStep(name, side, value, same / kept, kept))


def find_anchor(x: Instance, label: str, search_sample: Trace, threshold: float) -> AnchorResult:
    """First box on the greedy path whose sample precision reaches ``threshold``.

    If none does, the most precise box on the path is returned with
    ``reached=False`` (earliest such box on ties).
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    best = None
    for result in anchor_path(x, label, search_sample):
        if result.precision is not None and result.precision >= threshold:
            return AnchorResult(result.rule, result.precision, result.coverage, True, result.steps)
        if best is None or (result.precision or 0.0) > (best.precision or 0.0):
            best = result
    return best


def find_anchors(x: Instance, label: str, search_sample: Trace,
                 thresholds: list[float]) -> dict[float, AnchorResult]:
    """``find_anchor`` for several thresholds from a single walk of the greedy path."""
    for t in thresholds:
        if not 0 < t <= 1:
            raise ValueError("thresholds must lie in (0, 1]")
    path = []
    top = max(thresholds)
    for result in anchor_path(x, label, search_sample):
        path.append(result)
        if result.precision is not None and result.precision >= top:
            break
    out = {}
    for t in thresholds:
        hit = next((r for r in path if r.precision is not None and r.precision >= t), None)
        if hit is not None:
            out[t] = AnchorResult(hit.rule, hit.precision, hit.coverage, True, hit.steps)
        else:
            out[t] = max(path, key=lambda r: (r.precision or 0.0, -len(r.steps)))
    return out
