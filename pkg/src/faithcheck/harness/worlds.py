"""Synthetic worlds with known faithfulness.

Each world pairs a data distribution and a model with one or more
explainers, and knows the exact consistency and sufficiency of every
explainer.  ``World.sample`` draws i.i.d. traces; the ground truth comes from
an enumerated :class:`FiniteSystem` where one exists and from closed forms
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from faithcheck.core import ExplanationPayload, Instance, Trace, TraceRecord
from faithcheck.explainers.tree import Leaf, Split, SurrogateTree
from faithcheck.oracle import (
    FiniteSystem,
    SystemPoint,
    exact_global_consistency,
    exact_global_sufficiency,
)
from faithcheck.rules import TokenSubset

GENERATOR = "numpy.PCG64"
WORLD_KINDS = ("tree", "xor", "balanced-pair", "label-purity")
# stream tag for drawing a world's structure, kept apart from its samples
STRUCTURE_STREAM = 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded generator; distinct ``stream`` tags give independent streams."""
    if stream:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class WorldSpec:
    """Parameters of a synthetic world.

    tree: ``leaves`` (a power of two), ``label_noise`` and ``dim``.
    xor: ``extent`` and ``step`` of the grid.
    balanced-pair: ``domain_size`` (even) or None for the continuous version.
    label-purity: ``pure_keys``, ``mixed_keys`` and ``positive_share``.
    """

    kind: str
    seed: int = 0
    leaves: int = 64
    label_noise: float = 0.0
    dim: int | None = None
    extent: float = 2.0
    step: float = 0.5
    domain_size: int | None = None
    pure_keys: int = 10
    mixed_keys: int = 10
    positive_share: float = 0.5

    def __post_init__(self):
        kind = self.kind.replace("_world", "").replace("_", "-")
        object.__setattr__(self, "kind", kind)
        if kind not in WORLD_KINDS:
            raise ValueError(f"unknown world kind {self.kind!r}; expected one of {WORLD_KINDS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if kind == "tree":
            if self.leaves < 1 or self.leaves & (self.leaves - 1):
                raise ValueError(f"leaves must be a power of two, got {self.leaves}")
            if not 0 <= self.label_noise < 1:
                raise ValueError("label_noise must lie in [0, 1)")
            if self.dim is not None and self.dim < 1:
                raise ValueError("dim must be positive")
        if kind == "xor" and not (self.extent > 0 and self.step > 0):
            raise ValueError("extent and step must be positive")
        if kind == "balanced-pair" and self.domain_size is not None:
            if self.domain_size < 2 or self.domain_size % 2:
                raise ValueError("domain_size must be an even number >= 2")
        if kind == "label-purity":
            if self.pure_keys < 1 or self.mixed_keys < 1:
                raise ValueError("need at least one pure and one mixed key")
            if not 0 < self.positive_share < 1:
                raise ValueError("positive_share must lie in (0, 1)")

    @property
    def depth(self) -> int:
        return self.leaves.bit_length() - 1


@dataclass
class World:
    spec: WorldSpec
    explainers: tuple[str, ...]
    ground_truth: dict[str, dict[str, float]]
    sampler: Callable[[int, np.random.Generator], dict[str, Trace]]
    systems: dict[str, FiniteSystem] = field(default_factory=dict)
    positive_label: str | None = None
    extra: dict = field(default_factory=dict)

    def sample(self, n: int, rng: np.random.Generator | None = None) -> dict[str, Trace]:
        """One trace of ``n`` records per explainer, all on the same instances."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        rng = make_rng(self.spec.seed) if rng is None else rng
        return self.sampler(n, rng)

    def provenance(self, explainer: str) -> dict:
        return {"generator": GENERATOR, "seed": self.spec.seed, "world": self.spec.kind,
                "explainer": explainer}


def truth_of(system: FiniteSystem) -> dict[str, float]:
    return {"m_c": exact_global_consistency(system), "m_s": exact_global_sufficiency(system)}


# ------------------------------------------------------- finite-system traces

def system_schema(system: FiniteSystem) -> tuple[str, ...]:
    return tuple(f"applies:{k}" for k in system.key_names)


def system_records(system: FiniteSystem) -> list[TraceRecord]:
    """One record per point; features flag which keys apply to the point.

    Each record carries the token rule "my key's flag is set", so applicability
    on the trace reproduces the system's applicability relation.
    """
    schema = system_schema(system)
    records = []
    for i, p in enumerate(system.points):
        flags = tuple("1" if a else "0" for a in system.applicability[i])
        k = int(system.key_codes[i])
        payload = ExplanationPayload.from_rule(TokenSubset({(k, "1")}), key=p.key)
        records.append(TraceRecord(Instance(p.id, flags, schema), p.label, payload))
    return records


def sample_system(system: FiniteSystem, n: int, rng: np.random.Generator,
                  provenance: dict | None = None) -> Trace:
    """Trace of ``n`` i.i.d. draws from ``system``."""
    records = system_records(system)
    idx = rng.choice(len(system), size=n, p=system.masses) if n else []
    return Trace(system_schema(system), [records[i] for i in idx], provenance or {})


def sample_codes(system: FiniteSystem, n: int, rng: np.random.Generator):
    """Fast path: point indices, key codes and label codes of ``n`` draws."""
    idx = rng.choice(len(system), size=n, p=system.masses)
    return idx, system.key_codes[idx], system.label_codes[idx]


# ------------------------------------------------------------------ tree world

def _tree_world(spec: WorldSpec) -> World:
    rng = make_rng(spec.seed, STRUCTURE_STREAM)
    k = spec.depth
    d = spec.dim or max(2, k)
    schema = tuple(f"x{j}" for j in range(d))
    n_inner = 2**k - 1
    feat = np.zeros(n_inner, dtype=np.int64)
    thr = np.zeros(n_inner)
    lo = np.zeros((2**(k + 1) - 1, d))
    hi = np.ones((2**(k + 1) - 1, d))
    # heap layout; midpoint cuts halve the parent box, so all leaves have mass 2^-k
    for node in range(n_inner):
        j = int(rng.integers(d))
        t = (lo[node, j] + hi[node, j]) / 2
        feat[node], thr[node] = j, t
        for child in (2 * node + 1, 2 * node + 2):
            lo[child], hi[child] = lo[node], hi[node]
        hi[2 * node + 1, j] = t
        lo[2 * node + 2, j] = t
    L = 2**k
    labels = rng.integers(0, 2, L).astype(str)
    eta = spec.label_noise

    def build(node: int):
        if node >= n_inner:
            return Leaf(str(labels[node - n_inner]))
        return Split(schema[feat[node]], build(2 * node + 1), build(2 * node + 2),
                     threshold=float(thr[node]))

    tree = SurrogateTree(build(0), schema)
    payloads = [ExplanationPayload.from_rule(tree.leaf_rule(leaf.leaf_id), key=leaf.leaf_id)
                for leaf in tree.leaves]
    leaf_lo, leaf_hi = lo[n_inner:], hi[n_inner:]
    # noise flips the part of each leaf whose relative position along the leaf's
    # first coordinate falls below eta
    noise_axis = 0

    def route(X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(k):
            left = X[np.arange(len(X)), feat[node]] <= thr[node]
            node = np.where(left, 2 * node + 1, 2 * node + 2)
        return node - n_inner

    def model(X: np.ndarray, leaf: np.ndarray) -> np.ndarray:
        rel = (X[:, noise_axis] - leaf_lo[leaf, noise_axis]) / (
            leaf_hi[leaf, noise_axis] - leaf_lo[leaf, noise_axis])
        y = labels[leaf].astype(np.int64)
        return np.where(rel < eta, 1 - y, y).astype(str)

    def sampler(n, rng):
        X = rng.random((n, d))
        leaf = route(X)
        y = model(X, leaf)
        records = [TraceRecord(Instance(f"r{i}", tuple(map(float, X[i])), schema), str(y[i]),
                               payloads[leaf[i]]) for i in range(n)]
        return {"tree": Trace(schema, records, world.provenance("tree"))}

    pts = []
    for i in range(L):
        base = str(labels[i])
        pts.append(SystemPoint(f"leaf-{i}", (1 - eta) / L, base, f"leaf-{i}"))
        if eta > 0:
            pts.append(SystemPoint(f"leaf-{i}-flip", eta / L, str(1 - int(base)), f"leaf-{i}"))
    system = FiniteSystem(pts)
    world = World(spec, ("tree",), {"tree": truth_of(system)}, sampler, {"tree": system},
                  extra={"tree": tree, "route": route, "model": model, "dim": d})
    return world


# ------------------------------------------------------------------- XOR world

def _xor_world(spec: WorldSpec) -> World:
    m = int(round(2 * spec.extent / spec.step))
    if m < 2:
        raise ValueError("grid needs at least two cells per axis")
    coords = -spec.extent + spec.step * (np.arange(m) + 0.5)
    schema = ("f0", "f1")
    pts, records = [], []
    for a in coords:
        for b in coords:
            pid = f"g({a:.6g},{b:.6g})"
            label = "1" if a * b > 0 else "0"
            # stub explainer: attributes everything to |f1|, blind to the sign of f0
            payload = ExplanationPayload.from_importance((0.0, abs(float(b))))
            pts.append(SystemPoint(pid, 1.0 / (m * m), label, payload.key))
            records.append(TraceRecord(Instance(pid, (float(a), float(b)), schema), label, payload))
    system = FiniteSystem(pts)

    def sampler(n, rng):
        idx = rng.choice(len(records), size=n, p=system.masses) if n else []
        return {"band": Trace(schema, [records[i] for i in idx], world.provenance("band"))}

    world = World(spec, ("band",), {"band": truth_of(system)}, sampler, {"band": system})
    return world


# ---------------------------------------------------------- balanced pair world

def _balanced_pair_world(spec: WorldSpec) -> World:
    schema = ("x",)
    truth = {"e1": {"m_c": 1.0, "m_s": 1.0}, "e2": {"m_c": 0.5, "m_s": 0.5}}
    N = spec.domain_size
    if N is None:
        # x = u + s/2 with u ~ U[0, 1/2), s ~ Bernoulli(1/2), f(x) = s;
        # e1 names x itself, e2 names the pair {u, u + 1/2}
        def sampler(n, rng):
            u = rng.random(n) / 2
            s = rng.integers(0, 2, n)
            x = u + s / 2
            rec1, rec2 = [], []
            for i in range(n):
                inst = Instance(f"r{i}", (float(x[i]),), schema)
                label = str(s[i])
                rec1.append(TraceRecord(inst, label, ExplanationPayload.opaque(f"x={float(x[i])!r}")))
                rec2.append(TraceRecord(inst, label, ExplanationPayload.opaque(f"u={float(u[i])!r}")))
            return {"e1": Trace(schema, rec1, world.provenance("e1")),
                    "e2": Trace(schema, rec2, world.provenance("e2"))}

        world = World(spec, ("e1", "e2"), truth, sampler, {})
        return world

    half = N // 2
    sys1 = FiniteSystem([SystemPoint(f"x{i}", 1.0 / N, str(i // half), f"x{i}") for i in range(N)])
    sys2 = FiniteSystem([SystemPoint(f"x{i}", 1.0 / N, str(i // half), f"pair{i % half}")
                         for i in range(N)])

    def sampler(n, rng):
        idx = rng.integers(0, N, n)
        rec1, rec2 = [], []
        for r, i in enumerate(idx):
            inst = Instance(f"x{i}", (int(i),), schema)
            label = str(i // half)
            rec1.append(TraceRecord(inst, label, ExplanationPayload.opaque(f"x{i}")))
            rec2.append(TraceRecord(inst, label, ExplanationPayload.opaque(f"pair{i % half}")))
        return {"e1": Trace(schema, rec1, world.provenance("e1")),
                "e2": Trace(schema, rec2, world.provenance("e2"))}

    systems = {"e1": sys1, "e2": sys2}
    world = World(spec, ("e1", "e2"), {k: truth_of(s) for k, s in systems.items()}, sampler, systems)
    return world


# ---------------------------------------------------------- label purity world

def _label_purity_world(spec: WorldSpec) -> World:
    """Positives get label-pure keys, negatives keys split between two labels.

    Consistency is 1 on positives and 1/2 on negatives, so any split that
    over-represents positives in one population raises that population's
    consistency.
    """
    pos, P, M = spec.positive_share, spec.pure_keys, spec.mixed_keys
    pts = [SystemPoint(f"pos{i}", pos / P, "pos", f"pure{i}") for i in range(P)]
    for i in range(M):
        for lab in ("neg-a", "neg-b"):
            pts.append(SystemPoint(f"{lab}{i}", (1 - pos) / (2 * M), lab, f"mixed{i}"))
    masses = np.array([p.mass for p in pts])
    pts = [SystemPoint(p.id, float(m), p.label, p.key) for p, m in zip(pts, masses / masses.sum())]
    system = FiniteSystem(pts)

    def sampler(n, rng):
        return {"purity": sample_system(system, n, rng, world.provenance("purity"))}

    world = World(spec, ("purity",), {"purity": truth_of(system)}, sampler, {"purity": system},
                  positive_label="pos")
    return world


def population_truth(world: World, p: float) -> tuple[float, float]:
    """Exact consistency of both populations of a label-purity split at ``p``."""
    system = world.systems["purity"]
    out = []
    for keep_pos in (p, 1 - p):
        w = np.array([keep_pos if pt.label == world.positive_label else 1 - keep_pos
                      for pt in system.points])
        masses = system.masses * w
        masses = masses / masses.sum()
        sub = FiniteSystem([SystemPoint(pt.id, float(m), pt.label, pt.key)
                            for pt, m in zip(system.points, masses)])
        out.append(exact_global_consistency(sub))
    return out[0], out[1]


def generate_world(spec: WorldSpec) -> World:
    builders = {"tree": _tree_world, "xor": _xor_world, "balanced-pair": _balanced_pair_world,
                "label-purity": _label_purity_world}
    return builders[spec.kind](spec)


def tree_world(leaves: int, label_noise: float = 0.0, seed: int = 0, dim: int | None = None) -> World:
    return generate_world(WorldSpec("tree", seed, leaves=leaves, label_noise=label_noise, dim=dim))


def xor_world(extent: float = 2.0, step: float = 0.5, seed: int = 0) -> World:
    return generate_world(WorldSpec("xor", seed, extent=extent, step=step))


def balanced_pair_world(domain_size: int | None = None, seed: int = 0) -> World:
    return generate_world(WorldSpec("balanced-pair", seed, domain_size=domain_size))


def label_purity_world(pure_keys: int = 10, mixed_keys: int = 10, positive_share: float = 0.5,
                       seed: int = 0) -> World:
    return generate_world(WorldSpec("label-purity", seed, pure_keys=pure_keys,
                                    mixed_keys=mixed_keys, positive_share=positive_share))
