"""Exact consistency and sufficiency on small, fully enumerated systems.

A :class:`FiniteSystem` lists every instance with its probability mass,
predicted label and explanation key, plus the applicability relation between
instances and keys.  Everything here is exact arithmetic over those lists and
serves as ground truth for the sampling estimators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

MASS_TOL = 1e-12


@dataclass(frozen=True)
class SystemPoint:
    id: str
    mass: float
    label: str
    key: str


class FiniteSystem:
    """Enumerated explanation system.

    ``applicability`` maps a key to the ids of the points it applies to.  Keys
    missing from the mapping (or all keys, when it is omitted) fall back to the
    equality relation: key ``k`` applies to exactly the points explained by
    ``k``.  Every point's own key must apply to it.
    """

    def __init__(self, points: Sequence[SystemPoint | tuple],
                 applicability: Mapping[str, Sequence[str]] | None = None):
        pts = [p if isinstance(p, SystemPoint) else SystemPoint(*p) for p in points]
        if not pts:
            raise ValueError("a finite system needs at least one point")
        self.points = tuple(pts)
        self.ids = [p.id for p in pts]
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("point ids must be unique")
        self.masses = np.array([p.mass for p in pts], dtype=float)
        if (self.masses <= 0).any():
            raise ValueError("point masses must be positive")
        if abs(self.masses.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {self.masses.sum()!r}, not 1")
        self.label_names = sorted({p.label for p in pts})
        self.key_names = sorted({p.key for p in pts})
        label_idx = {y: i for i, y in enumerate(self.label_names)}
        key_idx = {k: i for i, k in enumerate(self.key_names)}
        self.label_codes = np.array([label_idx[p.label] for p in pts])
        self.key_codes = np.array([key_idx[p.key] for p in pts])
        self._index = {pid: i for i, pid in enumerate(self.ids)}

        P, K = len(pts), len(self.key_names)
        self.applicability = np.zeros((P, K), dtype=bool)
        self.applicability[np.arange(P), self.key_codes] = True
        self.explicit_applicability = applicability is not None
        for key, members in (applicability or {}).items():
            if key not in key_idx:
                raise ValueError(f"applicability names unknown key {key!r}")
            col = np.zeros(P, dtype=bool)
            for pid in members:
                if pid not in self._index:
                    raise ValueError(f"applicability names unknown point {pid!r}")
                col[self._index[pid]] = True
            self.applicability[:, key_idx[key]] = col
        own = self.applicability[np.arange(P), self.key_codes]
        if not own.all():
            bad = self.ids[int(np.argmin(own))]
            raise ValueError(f"point {bad!r} is not covered by its own explanation")

    def __len__(self) -> int:
        return len(self.points)

    def index(self, point: str | int) -> int:
        if isinstance(point, (int, np.integer)):
            return int(point)
        return self._index[point]

    def relation(self, mode: str) -> np.ndarray:
        """Boolean matrix R[point, key] for ``mode`` in {equality, applicability}."""
        if mode == "equality":
            R = np.zeros_like(self.applicability)
            R[np.arange(len(self)), self.key_codes] = True
            return R
        if mode == "applicability":
            return self.applicability
        raise ValueError(f"unknown relation mode {mode!r}")

    def key_mass(self) -> np.ndarray:
        """p(pi): mass of points explained by each key."""
        return np.bincount(self.key_codes, weights=self.masses, minlength=len(self.key_names))

    def relation_mass(self, mode: str) -> np.ndarray:
        """q(pi): mass of points the relation puts in each key's scope."""
        return self.masses @ self.relation(mode)

    def label_given_key(self, mode: str) -> np.ndarray:
        """q(y | pi) as a (keys x labels) matrix."""
        R = self.relation(mode).astype(float)
        onehot = np.eye(len(self.label_names))[self.label_codes]
        joint = R.T @ (self.masses[:, None] * onehot)
        return joint / joint.sum(axis=1, keepdims=True)

    def to_json(self) -> dict:
        out: dict = {"points": [{"id": p.id, "mass": p.mass, "label": p.label, "key": p.key}
                                for p in self.points]}
        if self.explicit_applicability:
            out["applicability"] = {
                k: [self.ids[i] for i in np.flatnonzero(self.applicability[:, j])]
                for j, k in enumerate(self.key_names)
            }
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "FiniteSystem":
        if "points" not in obj:
            raise ValueError("system JSON needs a 'points' list")
        pts = []
        for i, p in enumerate(obj["points"]):
            try:
                pts.append(SystemPoint(str(p["id"]), float(p["mass"]), str(p["label"]), str(p["key"])))
            except KeyError as exc:
                raise ValueError(f"point {i}: missing field {exc.args[0]!r}") from None
        return cls(pts, obj.get("applicability"))

    @classmethod
    def load(cls, path: str | Path) -> "FiniteSystem":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _same_label_share(sys: FiniteSystem, scope: np.ndarray, label: int) -> float:
    total = sys.masses[scope].sum()
    return float(sys.masses[scope & (sys.label_codes == label)].sum() / total)


def exact_local_consistency(sys: FiniteSystem, point: str | int) -> float:
    """Share of mass explained like ``point`` that also shares its label (``point`` included)."""
    i = sys.index(point)
    return _same_label_share(sys, sys.key_codes == sys.key_codes[i], sys.label_codes[i])


def exact_local_sufficiency(sys: FiniteSystem, point: str | int) -> float:
    i = sys.index(point)
    return _same_label_share(sys, sys.applicability[:, sys.key_codes[i]], sys.label_codes[i])


def local_measures(sys: FiniteSystem, mode: str) -> np.ndarray:
    """Local measure at every point at once: q(f(x) | e(x)) under ``mode``."""
    qyk = sys.label_given_key(mode)
    return qyk[sys.key_codes, sys.label_codes]


def exact_global_consistency(sys: FiniteSystem) -> float:
    value = float(sys.masses @ local_measures(sys, "equality"))
    qyk = sys.label_given_key("equality")
    closed = float(sys.key_mass() @ (qyk**2).sum(axis=1))
    if abs(value - closed) > 1e-9:
        raise ArithmeticError(f"consistency cross-check failed: {value} vs {closed}")
    return value


def exact_global_sufficiency(sys: FiniteSystem) -> float:
    return float(sys.masses @ local_measures(sys, "applicability"))


@dataclass(frozen=True)
class DecoderReport:
    gibbs_error: float
    deterministic_error: float
    consistency_from_gibbs: float
    decoder: dict[str, str]

    def to_json(self) -> dict:
        return {"E_G": self.gibbs_error, "E_O": self.deterministic_error,
                "consistency_from_gibbs": self.consistency_from_gibbs, "decoder": self.decoder}


def decoder_report(sys: FiniteSystem) -> DecoderReport:
    """Errors of the Gibbs and the optimal deterministic decoder from keys back to labels."""
    p = sys.key_mass()
    pyk = sys.label_given_key("equality")
    e_g = float(p @ (pyk * (1 - pyk)).sum(axis=1))
    e_o = float(p @ (1 - pyk.max(axis=1)))
    # argmax returns the first maximum; label_names is sorted, so ties go to the smallest label
    best = pyk.argmax(axis=1)
    decoder = {k: sys.label_names[b] for k, b in zip(sys.key_names, best)}
    return DecoderReport(e_g, e_o, 1.0 - e_g, decoder)


def tree_consistency_via_gini(leaf_masses: Sequence[float],
                              leaf_label_dists: Sequence[Sequence[float]]) -> float:
    """1 - sum over leaves of mass * Gini impurity of the label distribution."""
    masses = np.asarray(leaf_masses, dtype=float)
    if len(masses) != len(leaf_label_dists):
        raise ValueError(f"{len(masses)} leaf masses but {len(leaf_label_dists)} label distributions")
    if abs(masses.sum() - 1.0) > 1e-9:
        raise ValueError("leaf masses must sum to 1")
    total = 0.0
    for m, dist in zip(masses, leaf_label_dists):
        d = np.asarray(dist, dtype=float)
        if abs(d.sum() - 1.0) > 1e-9 or (d < 0).any():
            raise ValueError(f"not a probability distribution: {list(d)}")
        total += m * (1.0 - (d**2).sum())
    return 1.0 - total


def system_from_leaves(leaf_masses: Sequence[float],
                       leaf_label_dists: Sequence[Sequence[float]]) -> FiniteSystem:
    """Equality-relation system with one point per (leaf, label) cell of positive mass."""
    pts = []
    for i, (m, dist) in enumerate(zip(leaf_masses, leaf_label_dists)):
        for y, share in enumerate(dist):
            if share > 0:
                pts.append(SystemPoint(f"leaf{i}-y{y}", m * share, str(y), f"leaf{i}"))
    return FiniteSystem(pts)


def random_system(rng: np.random.Generator, max_points: int = 200, max_keys: int = 20,
                  max_labels: int = 5, scope_density: float | None = 0.3) -> FiniteSystem:
    """Random system for property tests.

    Masses are Dirichlet(1); each key additionally applies to a random subset
    of other points with probability ``scope_density`` (None keeps equality).
    """
    n_keys = int(rng.integers(1, max_keys + 1))
    n_points = int(rng.integers(n_keys, max(n_keys, max_points) + 1))
    n_labels = int(rng.integers(1, max_labels + 1))
    keys = np.concatenate([np.arange(n_keys), rng.integers(0, n_keys, n_points - n_keys)])
    labels = rng.integers(0, n_labels, n_points)
    masses = rng.dirichlet(np.ones(n_points))
    masses = masses / masses.sum()
    pts = [SystemPoint(f"p{i}", float(masses[i]), f"y{labels[i]}", f"k{keys[i]}")
           for i in range(n_points)]
    applicability = None
    if scope_density is not None:
        applicability = {}
        for k in range(n_keys):
            members = (keys == k) | (rng.random(n_points) < scope_density)
            applicability[f"k{k}"] = [f"p{i}" for i in np.flatnonzero(members)]
    return FiniteSystem(pts, applicability)
