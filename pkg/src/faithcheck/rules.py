"""Explicitly scoped rules: regions of instance space with a membership test.

Three variants cover the rule-shaped explanations we handle:

* :class:`Hyperrectangle` -- per-feature bounds ``lo < v <= hi`` plus
  categorical pins (``eq``) and exclusions (``ne``).  Decision-tree paths and
  anchors both land here.
* :class:`TokenSubset` -- a set of ``(position, token)`` requirements, the
  shape of highlighted-text explanations.
* :class:`OpenBall` -- ``dist(x, center) < radius``; counterfactuals and
  tau-ball prototypes.

Every rule offers ``applies(instance)`` for one instance and ``mask(table)``
for a vectorised check over a :class:`~faithcheck.core.FeatureTable`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from faithcheck.core import FeatureTable, Instance

METRICS = ("l2", "linf")


def canonical_number(value: float) -> float:
    """Round to 12 significant digits; -0.0 collapses to 0.0."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numeric feature values")
    rounded = float(format(float(value), ".12g"))
    return 0.0 if rounded == 0 else rounded


def _num(value: float, canonical: bool) -> float:
    return canonical_number(value) if canonical else float(value)


def is_numeric(value: Any) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool)


def mixed_distance(a: Sequence[Any], b: Sequence[Any], metric: str = "l2") -> float:
    """Distance between two feature vectors that may mix numbers and tokens.

    Numeric coordinates contribute their difference; a categorical coordinate
    contributes 1 when the tokens differ and 0 otherwise.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    diffs = []
    for u, v in zip(a, b):
        if is_numeric(u) and is_numeric(v):
            diffs.append(abs(float(u) - float(v)))
        elif is_numeric(u) or is_numeric(v):
            raise ValueError(f"cannot compare numeric and categorical values {u!r}, {v!r}")
        else:
            diffs.append(0.0 if u == v else 1.0)
    if not diffs:
        return 0.0
    if metric == "l2":
        return math.hypot(*diffs)  # no underflow for tiny differences
    return max(diffs)


@dataclass(frozen=True)
class Bound:
    """Constraint on one feature.

    ``lo`` is strict (``v > lo``) and ``hi`` inclusive (``v <= hi``), matching
    the ``<=`` / ``>`` branches of an axis-aligned split.
    """

    lo: float | None = None
    hi: float | None = None
    eq: str | None = None
    ne: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise ValueError(f"empty bound: lo={self.lo} > hi={self.hi}")
        if (self.lo is not None or self.hi is not None) and (self.eq is not None or self.ne):
            raise ValueError("a bound is either numeric (lo/hi) or categorical (eq/ne), not both")
        object.__setattr__(self, "ne", frozenset(self.ne))

    @property
    def numeric(self) -> bool:
        return self.lo is not None or self.hi is not None

    def test(self, value: Any) -> bool:
        if self.numeric:
            if not is_numeric(value):
                raise ValueError(f"numeric bound applied to categorical value {value!r}")
            v = float(value)
            return (self.lo is None or v > self.lo) and (self.hi is None or v <= self.hi)
        if self.eq is not None and value != self.eq:
            return False
        return value not in self.ne

    def to_json(self, canonical: bool = False) -> dict:
        out: dict[str, Any] = {}
        if self.lo is not None:
            out["lo"] = _num(self.lo, canonical)
        if self.hi is not None:
            out["hi"] = _num(self.hi, canonical)
        if self.eq is not None:
            out["eq"] = self.eq
        if self.ne:
            out["ne"] = sorted(self.ne)
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "Bound":
        unknown = set(obj) - {"lo", "hi", "eq", "ne"}
        if unknown:
            raise ValueError(f"unknown bound fields {sorted(unknown)}")
        return cls(lo=obj.get("lo"), hi=obj.get("hi"), eq=obj.get("eq"), ne=frozenset(obj.get("ne", ())))


class ScopedRule:
    """Base class; subclasses are frozen dataclasses."""

    variant: str = ""

    def applies(self, x: "Instance") -> bool:
        raise NotImplementedError

    def mask(self, table: "FeatureTable") -> np.ndarray:
        return np.fromiter((self.applies(x) for x in table.instances), dtype=bool, count=len(table))

    def to_json(self, canonical: bool = False) -> dict:
        """JSON form; ``canonical=True`` rounds numbers for use inside keys."""
        raise NotImplementedError


@dataclass(frozen=True)
class Hyperrectangle(ScopedRule):
    bounds: Mapping[str, Bound] = field(default_factory=dict)
    variant = "hyperrectangle"

    def __post_init__(self):
        items = tuple(sorted(dict(self.bounds).items()))
        object.__setattr__(self, "bounds", _FrozenDict(items))

    def applies(self, x: "Instance") -> bool:
        for name, bound in self.bounds.items():
            if not bound.test(x.feature(name)):
                return False
        return True

    def mask(self, table: "FeatureTable") -> np.ndarray:
        out = np.ones(len(table), dtype=bool)
        for name, bound in self.bounds.items():
            j = table.column(name)
            if bound.numeric:
                col = table.numeric[:, j]
                if np.isnan(col).any():
                    raise ValueError(f"numeric bound on feature {name!r} with categorical values")
                if bound.lo is not None:
                    out &= col > bound.lo
                if bound.hi is not None:
                    out &= col <= bound.hi
            else:
                col = table.categorical[:, j]
                if bound.eq is not None:
                    out &= col == bound.eq
                for token in bound.ne:
                    out &= col != token
        return out

    def constrained_features(self) -> frozenset[str]:
        return frozenset(self.bounds)

    def contains(self, other: "Hyperrectangle") -> bool:
        """True when every point of ``other`` lies in ``self`` (bounds-wise)."""
        for name, b in self.bounds.items():
            ob = other.bounds.get(name)
            if ob is None:
                return False
            if b.numeric:
                if not ob.numeric:
                    return False
                if b.lo is not None and (ob.lo is None or ob.lo < b.lo):
                    return False
                if b.hi is not None and (ob.hi is None or ob.hi > b.hi):
                    return False
            else:
                if b.eq is not None and ob.eq != b.eq:
                    return False
                if ob.eq is not None:
                    if ob.eq in b.ne:
                        return False
                elif not b.ne <= ob.ne:
                    return False
        return True

    def to_json(self, canonical: bool = False) -> dict:
        return {"variant": self.variant,
                "bounds": {k: b.to_json(canonical) for k, b in self.bounds.items()}}


@dataclass(frozen=True)
class TokenSubset(ScopedRule):
    tokens: frozenset[tuple[int, str]] = frozenset()
    variant = "token_subset"

    def __post_init__(self):
        object.__setattr__(self, "tokens", frozenset((int(p), str(t)) for p, t in self.tokens))

    def applies(self, x: "Instance") -> bool:
        for pos, token in self.tokens:
            if pos >= len(x.features):
                raise ValueError(f"token position {pos} outside schema of length {len(x.features)}")
            if x.features[pos] != token:
                return False
        return True

    def mask(self, table: "FeatureTable") -> np.ndarray:
        out = np.ones(len(table), dtype=bool)
        for pos, token in self.tokens:
            if pos >= table.categorical.shape[1]:
                raise ValueError(f"token position {pos} outside schema")
            out &= table.categorical[:, pos] == token
        return out

    def to_json(self, canonical: bool = False) -> dict:
        return {"variant": self.variant, "tokens": [[p, t] for p, t in sorted(self.tokens)]}


@dataclass(frozen=True)
class OpenBall(ScopedRule):
    center: tuple = ()
    radius: float = 1.0
    metric: str = "l2"
    variant = "open_ball"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def distance(self, x: "Instance") -> float:
        if len(x.features) != len(self.center):
            raise ValueError("instance does not match the ball's schema")
        return mixed_distance(x.features, self.center, self.metric)

    def applies(self, x: "Instance") -> bool:
        return self.distance(x) < self.radius

    def mask(self, table: "FeatureTable") -> np.ndarray:
        if table.numeric.shape[1] != len(self.center):
            raise ValueError("table does not match the ball's schema")
        diffs = np.zeros((len(table), len(self.center)))
        for j, c in enumerate(self.center):
            if is_numeric(c):
                col = table.numeric[:, j]
                if np.isnan(col).any():
                    raise ValueError("cannot compare numeric and categorical values")
                diffs[:, j] = np.abs(col - float(c))
            else:
                col = table.categorical[:, j]
                if any(v is None for v in col):
                    raise ValueError("cannot compare numeric and categorical values")
                diffs[:, j] = (col != c).astype(float)
        if self.metric == "l2":
            # same arithmetic as mixed_distance, so mask and applies never disagree
            dist = np.fromiter((math.hypot(*row) for row in diffs), float, len(diffs))
        else:
            dist = diffs.max(axis=1) if len(self.center) else np.zeros(len(table))
        return dist < self.radius

    def to_json(self, canonical: bool = False) -> dict:
        center = [_num(c, canonical) if is_numeric(c) else c for c in self.center]
        return {"variant": self.variant, "center": center,
                "radius": _num(self.radius, canonical), "metric": self.metric}


class _FrozenDict(dict):
    """Read-only dict so frozen rules stay hashable and immutable."""

    def __hash__(self):
        return hash(tuple(self.items()))

    def _readonly(self, *args, **kwargs):
        raise TypeError("rule bounds are immutable")

    __setitem__ = __delitem__ = clear = pop = popitem = setdefault = update = _readonly


def rule_from_json(obj: Mapping[str, Any]) -> ScopedRule:
    variant = obj.get("variant")
    if variant == "hyperrectangle":
        return Hyperrectangle({k: Bound.from_json(v) for k, v in obj.get("bounds", {}).items()})
    if variant == "token_subset":
        return TokenSubset(frozenset((int(p), t) for p, t in obj.get("tokens", [])))
    if variant == "open_ball":
        return OpenBall(tuple(obj["center"]), float(obj["radius"]), obj.get("metric", "l2"))
    raise ValueError(f"unknown rule variant {variant!r}")
