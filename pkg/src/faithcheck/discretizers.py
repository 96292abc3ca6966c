"""Coarsening maps that make continuous explanations recur.

Feature-importance vectors and counterfactuals almost never repeat exactly,
which leaves the estimators nothing to count.  Each method here maps a payload
to a coarser value and keys the record by that value, so that explanations
with equal coarse values count as the same explanation.

Method strings: ``original``, ``fp:<k>``, ``sign``, ``rank``,
``sign-of-top:<m>`` for importance vectors; ``original``, ``delta``,
``delta-sign``, ``is-feature-modified`` for counterfactuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from decimal import ROUND_FLOOR, Decimal
from typing import Any, Sequence

import numpy as np

from faithcheck.core import ExplanationKey, ExplanationPayload, Trace, canonical_key
from faithcheck.rules import is_numeric

IMPORTANCE_METHODS = ("original", "fp", "sign", "rank", "sign-of-top")
COUNTERFACTUAL_METHODS = ("original", "delta", "delta-sign", "is-feature-modified")


@dataclass(frozen=True)
class DiscretizerSpec:
    family: str
    method: str
    param: int | None = None

    def __post_init__(self):
        allowed = {"importance": IMPORTANCE_METHODS, "counterfactual": COUNTERFACTUAL_METHODS}
        if self.family not in allowed:
            raise ValueError(f"unknown discretizer family {self.family!r}")
        if self.method not in allowed[self.family]:
            raise ValueError(f"method {self.method!r} is not a {self.family} discretizer")
        if self.method in ("fp", "sign-of-top"):
            if self.param is None or int(self.param) != self.param or self.param < 1:
                raise ValueError(f"{self.method} needs a positive integer parameter")
        elif self.param is not None:
            raise ValueError(f"{self.method} takes no parameter")

    def __str__(self) -> str:
        return self.method if self.param is None else f"{self.method}:{self.param}"

    @classmethod
    def parse(cls, text: str, family: str | None = None) -> "DiscretizerSpec":
        method, _, arg = text.partition(":")
        param = int(arg) if arg else None
        if family is None:
            family = "counterfactual" if method in COUNTERFACTUAL_METHODS[1:] else "importance"
        return cls(family, method, param)


def _floor_digits(value: float, k: int) -> float:
    # floor of the 12-significant-digit decimal rendering, so that fp(k) is
    # idempotent and fp(1) == fp(1) o fp(2) despite binary rounding
    d = Decimal(format(value, ".12g"))
    return float(d.quantize(Decimal(1).scaleb(-k), rounding=ROUND_FLOOR))


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def transform_importance(phi: Sequence[float], spec: DiscretizerSpec | str) -> tuple:
    """The coarse value psi(phi) for an importance vector."""
    if isinstance(spec, str):
        spec = DiscretizerSpec.parse(spec, "importance")
    vec = [float(v) for v in phi]
    if not all(math.isfinite(v) for v in vec):
        raise ValueError("importance vector has non-finite components")
    if spec.method == "original":
        return tuple(vec)
    if spec.method == "fp":
        return tuple(_floor_digits(v, spec.param) for v in vec)
    if spec.method == "sign":
        return tuple(_sign(v) for v in vec)
    if spec.method == "rank":
        return tuple(int(i) for i in np.argsort(np.asarray(vec), kind="stable"))
    top = sorted(range(len(vec)), key=lambda i: (-abs(vec[i]), i))[: spec.param]
    chosen = set(top)
    return tuple(_sign(v) if i in chosen else 0 for i, v in enumerate(vec))


def discretize_importance(phi: Sequence[float], method: DiscretizerSpec | str) -> ExplanationKey:
    return canonical_key(ExplanationPayload.from_importance(transform_importance(phi, method)))


def transform_counterfactual(x: Sequence[Any], x_cf: Sequence[Any],
                             spec: DiscretizerSpec | str) -> tuple:
    if isinstance(spec, str):
        spec = DiscretizerSpec.parse(spec, "counterfactual")
    if len(x) != len(x_cf):
        raise ValueError(f"length mismatch: {len(x)} vs {len(x_cf)}")
    if spec.method == "original":
        return tuple(x_cf)
    if spec.method == "is-feature-modified":
        # 1 marks an unchanged feature, although the method name suggests the opposite
        return tuple(1 if a == b else 0 for a, b in zip(x, x_cf))
    for a, b in zip(x, x_cf):
        if not (is_numeric(a) and is_numeric(b)):
            raise ValueError(f"{spec.method} needs numeric features, got {a!r} and {b!r}")
    delta = [float(b) - float(a) for a, b in zip(x, x_cf)]
    if spec.method == "delta":
        return tuple(delta)
    return tuple(_sign(d) for d in delta)


def discretize_counterfactual(x: Sequence[Any], x_cf: Sequence[Any],
                              method: DiscretizerSpec | str) -> ExplanationKey:
    value = transform_counterfactual(x, x_cf, method)
    return canonical_key(ExplanationPayload.from_counterfactual(value))


def discretize_trace(trace: Trace, spec: DiscretizerSpec | str) -> Trace:
    """Copy of ``trace`` with every key replaced by its discretized key."""
    if isinstance(spec, str):
        spec = DiscretizerSpec.parse(spec)
    records = []
    for i, rec in enumerate(trace.records):
        p = rec.explanation
        if p.kind != spec.family:
            raise ValueError(f"record {i}: {p.kind} payload under a {spec.family} discretizer")
        if spec.family == "importance":
            key = discretize_importance(p.importance, spec)
        else:
            key = discretize_counterfactual(rec.instance.features, p.counterfactual, spec)
        records.append(replace(rec, explanation=replace(p, key=key)))
    return trace.with_records(records, discretizer=str(spec))
