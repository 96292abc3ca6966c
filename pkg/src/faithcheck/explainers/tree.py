"""Axis-aligned decision trees used as surrogate explainers.

Each leaf is an explanation; its rule is the conjunction of the tests on the
root-to-leaf path, so a rule applies to exactly the instances routed to its
leaf.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from faithcheck.core import ExplanationPayload, FeatureTable, Instance
from faithcheck.rules import Bound, Hyperrectangle, is_numeric


@dataclass
class Leaf:
    label: str
    leaf_id: str = ""


@dataclass
class Split:
    feature: str
    left: "Node"
    right: "Node"
    threshold: float | None = None
    category: str | None = None

    def goes_left(self, value: Any) -> bool:
        if self.category is not None:
            return value == self.category
        if not is_numeric(value):
            raise ValueError(f"numeric split on {self.feature!r} met categorical value {value!r}")
        return float(value) <= self.threshold


Node = Leaf | Split


class SurrogateTree:
    """Binary tree over named features; leaves get ids ``leaf-0``, ``leaf-1``, ... left to right."""

    def __init__(self, root: Node, schema: Sequence[str]):
        self.root = root
        self.schema = tuple(schema)
        self.leaves: list[Leaf] = []
        self._rules: dict[str, Hyperrectangle] = {}
        self._number(root, {})

    def _number(self, node: Node, bounds: dict[str, Bound]) -> None:
        if isinstance(node, Leaf):
            node.leaf_id = f"leaf-{len(self.leaves)}"
            self.leaves.append(node)
            self._rules[node.leaf_id] = Hyperrectangle(bounds)
            return
        if node.feature not in self.schema:
            raise ValueError(f"split on unknown feature {node.feature!r}")
        b = bounds.get(node.feature, Bound())
        if node.category is not None:
            left = Bound(eq=node.category, ne=b.ne)
            right = Bound(eq=b.eq, ne=b.ne | {node.category})
        else:
            t = node.threshold
            left = Bound(lo=b.lo, hi=t if b.hi is None else min(b.hi, t))
            right = Bound(lo=t if b.lo is None else max(b.lo, t), hi=b.hi)
        self._number(node.left, {**bounds, node.feature: left})
        self._number(node.right, {**bounds, node.feature: right})

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def route(self, x: Instance) -> Leaf:
        node = self.root
        while isinstance(node, Split):
            node = node.left if node.goes_left(x.feature(node.feature)) else node.right
        return node

    def leaf_rule(self, leaf_id: str) -> Hyperrectangle:
        return self._rules[leaf_id]

    def predict(self, x: Instance) -> str:
        return self.route(x).label

    def leaf_indices(self, table: FeatureTable) -> np.ndarray:
        """Vectorised routing: index into ``self.leaves`` for every row."""
        out = np.empty(len(table), dtype=np.int64)
        position = {id(leaf): i for i, leaf in enumerate(self.leaves)}

        def walk(node, rows):
            if not len(rows):
                return
            if isinstance(node, Leaf):
                out[rows] = position[id(node)]
                return
            j = table.column(node.feature)
            if node.category is not None:
                go = table.categorical[rows, j] == node.category
            else:
                go = table.numeric[rows, j] <= node.threshold
            walk(node.left, rows[go])
            walk(node.right, rows[~go])

        walk(self.root, np.arange(len(table)))
        return out

    def to_json(self) -> dict:
        def enc(node):
            if isinstance(node, Leaf):
                return {"leaf": node.leaf_id, "label": node.label}
            out = {"feature": node.feature, "left": enc(node.left), "right": enc(node.right)}
            if node.category is not None:
                out["category"] = node.category
            else:
                out["threshold"] = node.threshold
            return out

        return {"schema": list(self.schema), "root": enc(self.root)}

    @classmethod
    def from_json(cls, obj: dict) -> "SurrogateTree":
        def dec(o):
            if "leaf" in o:
                return Leaf(o["label"])
            return Split(o["feature"], dec(o["left"]), dec(o["right"]),
                         threshold=o.get("threshold"), category=o.get("category"))

        return cls(dec(obj["root"]), obj["schema"])


def explain_with_tree(tree: SurrogateTree, x: Instance) -> ExplanationPayload:
    leaf = tree.route(x)
    return ExplanationPayload.from_rule(tree.leaf_rule(leaf.leaf_id), key=leaf.leaf_id)


# ----------------------------------------------------------------- fitting

def _gini_sum(counts: np.ndarray) -> np.ndarray:
    """n * Gini impurity for each row of a (rows x labels) count matrix."""
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = n - (counts**2).sum(axis=-1) / n
    return np.where(n > 0, g, 0.0)


def _majority(labels: np.ndarray, names: list[str]) -> str:
    counts = np.bincount(labels, minlength=len(names))
    # names are sorted, so argmax's first-hit rule is the lexicographic tie-break
    return names[int(counts.argmax())]


def _best_split(table: FeatureTable, rows: np.ndarray, y: np.ndarray, L: int):
    """Largest impurity decrease over all features; None if rows cannot be split."""
    parent = _gini_sum(np.bincount(y[rows], minlength=L)[None, :])[0]
    best = None  # (gain, -feature, -threshold_rank, spec)
    for j, name in enumerate(table.schema):
        num = table.numeric[rows, j]
        if not np.isnan(num).any():
            order = np.argsort(num, kind="stable")
            vals, labs = num[order], y[rows][order]
            cum = np.cumsum(np.eye(L, dtype=np.int64)[labs], axis=0)
            cut = np.flatnonzero(vals[1:] != vals[:-1])
            if not len(cut):
                continue
            left = cum[cut]
            right = cum[-1] - left
            gains = parent - _gini_sum(left) - _gini_sum(right)
            # first index of the max is the smallest threshold among ties
            top = float(gains.max())
            i = int(np.flatnonzero(gains >= top - 1e-12)[0])
            thr = float((vals[cut[i]] + vals[cut[i] + 1]) / 2)
            cand = (gains[i], {"feature": name, "threshold": thr})
        else:
            cats = table.categorical[rows, j]
            if any(c is None for c in cats):
                raise ValueError(f"feature {name!r} mixes numeric and categorical values")
            levels = sorted(set(cats))
            if len(levels) < 2:
                continue
            cand = None
            for level in levels:
                go = cats == level
                gl = np.bincount(y[rows][go], minlength=L)
                gr = np.bincount(y[rows][~go], minlength=L)
                g = parent - _gini_sum(gl[None])[0] - _gini_sum(gr[None])[0]
                if cand is None or g > cand[0] + 1e-12:
                    cand = (g, {"feature": name, "category": level})
        if best is None or cand[0] > best[0] + 1e-12:
            best = cand
    return best


def fit_surrogate_tree(samples: Sequence[tuple[Instance, str]], max_leaves: int,
                       schema: Sequence[str] | None = None) -> SurrogateTree:
    """Grow a tree best-first on Gini decrease until ``max_leaves`` or purity.

    The next leaf to split is the one with the largest impurity decrease
    (earliest-created leaf on ties).  Numeric thresholds are midpoints between
    consecutive observed values; categorical splits pin a single level.
    """
    if not samples:
        raise ValueError("cannot fit a tree to an empty sample")
    if max_leaves < 1:
        raise ValueError("max_leaves must be at least 1")
    instances = [x for x, _ in samples]
    schema = tuple(schema or instances[0].schema or [f"x{j}" for j in range(len(instances[0].features))])
    table = FeatureTable(instances, schema)
    names = sorted({str(lab) for _, lab in samples})
    code = {n: i for i, n in enumerate(names)}
    y = np.array([code[str(lab)] for _, lab in samples])
    L = len(names)

    counter = itertools.count()
    nodes: dict[int, dict] = {}
    heap: list = []

    def push(rows, parent, side):
        uid = next(counter)
        nodes[uid] = {"rows": rows, "parent": parent, "side": side, "split": None}
        if len(np.unique(y[rows])) > 1:
            best = _best_split(table, rows, y, L)
            if best is not None:
                nodes[uid]["split"] = best[1]
                heapq.heappush(heap, (-best[0], uid))
        return uid

    root = push(np.arange(len(samples)), None, None)
    n_leaves = 1
    children: dict[int, tuple[int, int]] = {}
    while heap and n_leaves < max_leaves:
        _, uid = heapq.heappop(heap)
        rows, spec = nodes[uid]["rows"], nodes[uid]["split"]
        j = table.column(spec["feature"])
        if "category" in spec:
            go = table.categorical[rows, j] == spec["category"]
        else:
            go = table.numeric[rows, j] <= spec["threshold"]
        children[uid] = (push(rows[go], uid, "left"), push(rows[~go], uid, "right"))
        n_leaves += 1

    def build(uid) -> Node:
        if uid not in children:
            return Leaf(_majority(y[nodes[uid]["rows"]], names))
        spec = nodes[uid]["split"]
        left, right = children[uid]
        return Split(spec["feature"], build(left), build(right),
                     threshold=spec.get("threshold"), category=spec.get("category"))

    return SurrogateTree(build(root), schema)
