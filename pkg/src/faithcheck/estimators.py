"""Estimating consistency and sufficiency from a finite trace.

Both measures are special cases of one quantity: the chance that ``x'`` shares
``x``'s prediction given that ``x'`` is related to ``x``'s explanation.  With
the equality relation that is consistency; with the applicability relation
(``x'`` lies inside the rule ``e(x)``) it is sufficiency.

The global estimator scores each record by the same-label share among the
*other* records related to its explanation, and scores 0 when there are none.
That truncation is the only source of bias; :func:`bias_bound` and
:func:`mse_bound` quantify it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from faithcheck.core import Trace, TraceRecord
from faithcheck.oracle import FiniteSystem


class Relation(str, Enum):
    EQUALITY = "equality"
    APPLICABILITY = "applicability"

    @property
    def measure(self) -> str:
        return "consistency" if self is Relation.EQUALITY else "sufficiency"

    @classmethod
    def parse(cls, value: "Relation | str") -> "Relation":
        if isinstance(value, Relation):
            return value
        aliases = {"consistency": cls.EQUALITY, "sufficiency": cls.APPLICABILITY}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown relation {value!r}; use equality/consistency "
                             "or applicability/sufficiency") from None


class ConfigurationError(ValueError):
    """The requested relation cannot be evaluated on this trace."""


@dataclass(frozen=True)
class BoundDiagnostics:
    variance_bound: float
    bias_bound: float
    mse_bound: float
    source: str

    def to_json(self) -> dict:
        return {"variance_bound": self.variance_bound, "bias_bound": self.bias_bound,
                "mse_bound": self.mse_bound, "source": self.source}


@dataclass(frozen=True)
class FaithfulnessReport:
    estimate: float
    n: int
    uniqueness: float
    skipped: int
    relation: Relation
    per_key: Mapping[str, tuple[int, Mapping[str, int]]] = field(default_factory=dict)
    bounds: BoundDiagnostics | None = None

    @property
    def measure(self) -> str:
        return self.relation.measure

    def to_json(self) -> dict:
        out = {"measure": self.measure, "estimate": self.estimate, "n": self.n,
               "uniqueness": self.uniqueness, "skipped": self.skipped,
               "per_key": {k: {"N": N, "N_y": dict(Ny)} for k, (N, Ny) in self.per_key.items()}}
        if self.bounds is not None:
            out["bounds"] = self.bounds.to_json()
        return out


def _codes(values: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    names, codes = np.unique(np.asarray(values, dtype=object), return_inverse=True)
    return codes.astype(np.int64).ravel(), [str(v) for v in names]


def score_counts(keys: np.ndarray, labels: np.ndarray, N: np.ndarray, Ny: np.ndarray,
                 self_in: np.ndarray | None = None) -> tuple[float, int]:
    """Average the per-record scores given frozen counts.

    ``N[k]`` / ``Ny[k, y]`` count records related to key ``k`` (with label
    ``y``); ``self_in[i]`` says whether record ``i`` counts towards its own
    key.  It always does for the equality relation and for well-formed
    scoped rules; a record outside its own rule is simply not subtracted.
    """
    n = len(keys)
    if n == 0:
        raise ValueError("cannot estimate from an empty trace")
    own = np.ones(n, dtype=np.int64) if self_in is None else self_in.astype(np.int64)
    others = N[keys] - own
    same = Ny[keys, labels] - own
    ok = others > 0
    terms = np.zeros(n)
    terms[ok] = same[ok] / others[ok]
    return float(terms.sum() / n), int((~ok).sum())


def estimate_from_codes(keys: np.ndarray, labels: np.ndarray,
                        member: np.ndarray | None = None) -> tuple[float, int]:
    """Estimator on integer-coded samples.

    ``member`` is an optional (n x K) boolean matrix with ``member[i, k]`` true
    when key ``k`` relates to sample ``i``; when omitted the equality relation
    is used.  Returns ``(estimate, skipped)``.
    """
    keys = np.asarray(keys, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    K = int(keys.max()) + 1 if member is None else member.shape[1]
    L = int(labels.max()) + 1
    if member is None:
        N = np.bincount(keys, minlength=K)
        Ny = np.zeros((K, L), dtype=np.int64)
        np.add.at(Ny, (keys, labels), 1)
        return score_counts(keys, labels, N, Ny)
    m = member.astype(np.int64)
    N = m.sum(axis=0)
    Ny = m.T @ np.eye(L, dtype=np.int64)[labels]
    return score_counts(keys, labels, N, Ny, member[np.arange(len(keys)), keys])


def estimate_batch(keys: np.ndarray, labels: np.ndarray, member: np.ndarray | None = None,
                   n_keys: int | None = None, n_labels: int | None = None) -> np.ndarray:
    """Estimates for R coded traces at once; ``keys``/``labels`` are (R x n).

    ``member`` is an optional (R x n x K) relation tensor as in
    :func:`estimate_from_codes`.
    """
    keys = np.asarray(keys, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    R, n = keys.shape
    K = n_keys or (member.shape[2] if member is not None else int(keys.max()) + 1)
    L = n_labels or int(labels.max()) + 1
    rows = np.repeat(np.arange(R), n)
    if member is None:
        N = np.zeros((R, K), dtype=np.int64)
        np.add.at(N, (rows, keys.ravel()), 1)
        Ny = np.zeros((R, K, L), dtype=np.int64)
        np.add.at(Ny, (rows, keys.ravel(), labels.ravel()), 1)
        own = np.ones((R, n), dtype=np.int64)
    else:
        m = member.astype(np.int64)
        N = m.sum(axis=1)
        Ny = np.einsum("rnk,rny->rky", m, np.eye(L, dtype=np.int64)[labels])
        own = np.take_along_axis(m, keys[:, :, None], axis=2)[:, :, 0]
    r = np.arange(R)[:, None]
    others = N[r, keys] - own
    same = Ny[r, keys, labels] - own
    ok = others > 0
    terms = np.where(ok, same / np.where(ok, others, 1), 0.0)
    return terms.mean(axis=1)


def _relation_counts(trace: Trace, relation: Relation, key_codes, key_names, label_codes, L):
    K = len(key_names)
    if relation is Relation.EQUALITY:
        N = np.bincount(key_codes, minlength=K)
        Ny = np.zeros((K, L), dtype=np.int64)
        np.add.at(Ny, (key_codes, label_codes), 1)
        return N, Ny, None
    rules = {}
    for i, rec in enumerate(trace.records):
        rule = rec.explanation.rule
        if rule is None:
            raise ConfigurationError(f"record {i} ({rec.instance.id!r}) has no evaluable rule; "
                                     "sufficiency needs a scoped rule on every record")
        rules.setdefault(key_codes[i], rule)
    table = trace.table
    N = np.zeros(K, dtype=np.int64)
    Ny = np.zeros((K, L), dtype=np.int64)
    self_in = np.zeros(len(trace), dtype=bool)
    for k in range(K):
        mask = rules[k].mask(table)
        N[k] = mask.sum()
        Ny[k] = np.bincount(label_codes[mask], minlength=L)
        own = key_codes == k
        self_in[own] = mask[own]
    return N, Ny, self_in


def estimate_global(trace: Trace, relation: Relation | str = Relation.EQUALITY,
                    bounds: bool = False) -> FaithfulnessReport:
    """Global consistency (equality) or sufficiency (applicability) estimate.

    Records whose explanation relates to no other record score 0 and are
    tallied in ``skipped``.  With ``bounds=True`` the report carries plug-in
    bound diagnostics computed from empirical key frequencies.
    """
    relation = Relation.parse(relation)
    n = len(trace)
    if n < 1:
        raise ValueError("cannot estimate from an empty trace")
    key_codes, key_names = _codes(trace.keys)
    label_codes, label_names = _codes(trace.labels)
    N, Ny, self_in = _relation_counts(trace, relation, key_codes, key_names, label_codes,
                                      len(label_names))
    estimate, skipped = score_counts(key_codes, label_codes, N, Ny, self_in)
    per_key = {
        key_names[k]: (int(N[k]), {label_names[y]: int(c) for y, c in enumerate(Ny[k]) if c})
        for k in range(len(key_names))
    }
    diag = None
    if bounds:
        p_hat = np.bincount(key_codes, minlength=len(key_names)) / n
        q_hat = np.maximum(N / n, p_hat)
        diag = _diagnostics(p_hat, q_hat, n, "plug-in")
    return FaithfulnessReport(estimate, n, uniqueness(trace), skipped, relation, per_key, diag)


def uniqueness(trace: Trace) -> float:
    """Fraction of records whose explanation key occurs exactly once."""
    n = len(trace)
    if n < 1:
        raise ValueError("uniqueness of an empty trace is undefined")
    _, counts = np.unique(np.asarray(trace.keys, dtype=object), return_counts=True)
    return float((counts == 1).sum() / n)


@dataclass(frozen=True)
class LocalEstimate:
    """Local estimates at one query; None where no other record qualifies."""

    consistency: float | None
    sufficiency: float | None
    n_consistency: int
    n_consistency_same: int
    n_sufficiency: int
    n_sufficiency_same: int


def estimate_local(trace: Trace, query: TraceRecord) -> LocalEstimate:
    """Same-label share among records explained like ``query`` / covered by its rule.

    One copy of ``query`` is dropped from ``trace`` if present, so a record
    never vouches for itself.  Sufficiency is None when the query carries no
    rule.
    """
    if len(trace) == 0:
        raise ValueError("local estimation needs a nonempty trace")
    keep = np.ones(len(trace), dtype=bool)
    for i, rec in enumerate(trace.records):
        if rec == query:
            keep[i] = False
            break
    keys = np.asarray(trace.keys, dtype=object)
    labels = np.asarray(trace.labels, dtype=object)
    same_label = labels == query.prediction

    in_group = keep & (keys == query.key)
    nc, nc_same = int(in_group.sum()), int((in_group & same_label).sum())

    ns = ns_same = 0
    suff = None
    rule = query.explanation.rule
    if rule is not None:
        covered = keep & rule.mask(trace.table)
        ns, ns_same = int(covered.sum()), int((covered & same_label).sum())
        suff = ns_same / ns if ns else None
    return LocalEstimate(nc_same / nc if nc else None, suff, nc, nc_same, ns, ns_same)


# ------------------------------------------------------------------ bounds

def bias_bound(p: Mapping[str, float] | Sequence[float], q: Mapping[str, float] | Sequence[float],
               n: int) -> float:
    """Upper bound on the estimator's bias: sum_pi p(pi) exp(-(n-1) q(pi))."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(p, Mapping):
        if not isinstance(q, Mapping) or set(q) < set(p):
            raise ValueError("q must give a value for every key of p")
        keys = list(p)
        p_arr = np.array([p[k] for k in keys], dtype=float)
        q_arr = np.array([q[k] for k in keys], dtype=float)
    else:
        p_arr, q_arr = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        if p_arr.shape != q_arr.shape:
            raise ValueError("p and q must have the same length")
    if (p_arr < 0).any() or abs(p_arr.sum() - 1.0) > 1e-9:
        raise ValueError("p must be a probability distribution")
    if (q_arr > 1 + 1e-12).any() or (q_arr < p_arr - 1e-12).any():
        raise ValueError("need p(pi) <= q(pi) <= 1 for every key")
    return float(p_arr @ np.exp(-(n - 1) * q_arr))


def mse_bound(n: int, bias: float) -> float:
    """Variance bound 4/n plus squared bias."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if bias < 0:
        raise ValueError("bias bound must be nonnegative")
    return 4.0 / n + bias**2


def sample_size_for_epsilon(range_e: int, epsilon: float) -> int:
    """Samples guaranteeing MSE <= epsilon: ceil(range_e * (12/eps) * ln(3/eps))."""
    if int(range_e) != range_e or range_e < 1:
        raise ValueError("range_e must be a positive integer")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.ceil(range_e * (12.0 / epsilon) * math.log(3.0 / epsilon))


def _diagnostics(p, q, n, source) -> BoundDiagnostics:
    bias = bias_bound(p, q, n)
    return BoundDiagnostics(4.0 / n, bias, mse_bound(n, bias), source)


def oracle_bounds(system: FiniteSystem, n: int, relation: Relation | str) -> BoundDiagnostics:
    relation = Relation.parse(relation)
    return _diagnostics(system.key_mass(), system.relation_mass(relation.value), n, "oracle")


def expected_estimate(system: FiniteSystem, n: int, relation: Relation | str) -> float:
    """Exact mean of the estimator over traces of size ``n`` drawn from ``system``.

    E[M] = E_x[(1 - (1 - q(e(x)))^(n-1)) * q(f(x) | e(x))].
    """
    mode = Relation.parse(relation).value
    q = system.relation_mass(mode)[system.key_codes]
    qyk = system.label_given_key(mode)[system.key_codes, system.label_codes]
    seen = 1.0 - np.power(1.0 - np.minimum(q, 1.0), n - 1)
    return float(system.masses @ (seen * qyk))
