"""Connectivity from polylog(n) non-adaptive queries to a signed incidence oracle.

Each vertex row of the n x C(n,2) incidence matrix is sketched by l0-samplers
whose cells are read off oracle responses. Summing the sketches of a vertex set
cancels its internal edges, so a Boruvka loop can draw a boundary edge for every
component from sketches alone.

Vertices are 0-indexed here; column ``e`` of the incidence matrix is the e-th
pair (i, j), i < j, in lexicographic order, with +1 in row j and -1 in row i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .numerics import Field, Matrix, make_rng
from .oracle import DimensionMismatch, FieldMismatch, MatVecOracle

MODULUS = 2**61 + 15  # prime
DEFAULT_REPS = 8


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def edge_index(i: int, j: int, n: int) -> int:
    if i > j:
        i, j = j, i
    if not 0 <= i < j < n:
        raise ValueError(f"invalid pair ({i}, {j}) for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def edge_pairs(n: int) -> np.ndarray:
    """(C(n,2), 2) array; row e is the pair for column e."""
    i, j = np.triu_indices(n, 1)
    return np.stack([i, j], axis=1)


def _validate_edges(edges, n: int) -> np.ndarray:
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
    return np.array(sorted(seen), dtype=np.int64).reshape(-1, 2)


def incidence_matrix(edges, n: int) -> Matrix:
    """Dense signed incidence matrix; ground truth for tests and file export."""
    edges = _validate_edges(edges, n)
    a = np.zeros((n, max(1, num_pairs(n))))
    for i, j in edges:
        e = edge_index(i, j, n)
        a[j, e] = 1.0
        a[i, e] = -1.0
    return Matrix(a, Field.REAL)


class IncidenceOracle(MatVecOracle):
    """Oracle over the signed incidence matrix of a simple graph.

    Float queries are answered over the reals. Integer queries are answered exactly
    over the prime field Z_P (P = ``modulus``), returning uint64 residues; the
    sketches rely on that path. Products cost O(|E|) per query.
    """

    def __init__(self, n: int, edges, budget: int | None = None, record: bool = False,
                 modulus: int = MODULUS):
        if n < 2:
            raise ValueError("need at least two vertices")
        e = _validate_edges(edges, n)
        self.num_vertices = n
        self.modulus = modulus
        self._tails = e[:, 0].copy()
        self._heads = e[:, 1].copy()
        self._cols = np.array([edge_index(i, j, n) for i, j in e], dtype=np.int64)
        self._shape = (n, num_pairs(n))
        self._field = Field.REAL
        super().__init__(None, budget=budget, record=record)

    def _coerce(self, v, length):
        v = np.asarray(v)
        if v.ndim not in (1, 2) or v.shape[0] != length:
            raise DimensionMismatch(f"query has shape {v.shape}, expected leading dimension {length}")
        if v.dtype.kind in "iu":
            if v.size and (int(v.min()) < 0 or int(v.max()) >= self.modulus):
                raise FieldMismatch(f"integer queries must be residues in [0, {self.modulus})")
            return v.astype(np.uint64)
        if v.dtype.kind in "bf":
            return v.astype(np.float64)
        raise FieldMismatch(f"incidence oracle cannot take dtype {v.dtype}")

    def _apply_right(self, vs):
        if vs.dtype == np.uint64:
            return kernels.incidence_matmul_mod(self._heads, self._tails, self._cols, vs,
                                                self.num_vertices, self.modulus)
        out = np.zeros((self.num_vertices, vs.shape[1]))
        picked = vs[self._cols]
        np.add.at(out, self._heads, picked)
        np.subtract.at(out, self._tails, picked)
        return out

    def _apply_left(self, u):
        out_dtype = np.uint64 if u.dtype == np.uint64 else np.float64
        out = np.zeros(self.n, dtype=out_dtype)
        if out_dtype is np.uint64:
            p = self.modulus
            vals = (u[self._heads].astype(object) - u[self._tails].astype(object)) % p
            out[self._cols] = vals.astype(np.uint64)
        else:
            out[self._cols] = u[self._heads] - u[self._tails]
        return out


def build_incidence_oracle(edges, n: int, **kwargs) -> IncidenceOracle:
    return IncidenceOracle(n, edges, **kwargs)


@dataclass(frozen=True)
class SketchPlan:
    """The full non-adaptive query design, a pure function of (n, seed, rounds, reps).

    For round r and repetition t, every column e draws a hash h(e) in [0, 1); the
    level-l cell keeps e iff h(e) < 2^-l. A cell owns two query vectors: a packed
    one with entry 1 + B (e + 1), from which the value sum V and the index sum
    W = sum x_e (e + 1) both decode because |V| < B / 2, and a fingerprint one with
    entry base^e mod P for a per-cell random base.
    """

    n: int
    seed: int
    rounds: int
    reps: int = DEFAULT_REPS
    modulus: int = MODULUS

    @property
    def width(self) -> int:
        return num_pairs(self.n)

    @property
    def levels(self) -> int:
        return math.ceil(math.log2(self.width)) + 1 if self.width > 1 else 1

    @property
    def pack_base(self) -> int:
        return 2 * self.width + 1

    @property
    def query_count(self) -> int:
        return self.rounds * self.reps * self.levels * 2

    def _rng(self, rnd: int, rep: int) -> np.random.Generator:
        return make_rng(np.random.SeedSequence([self.seed, rnd, rep]))

    def cell_params(self, rnd: int, rep: int) -> tuple[np.ndarray, np.ndarray]:
        """(hash values over columns, fingerprint base per level)."""
        rng = self._rng(rnd, rep)
        h = rng.random(self.width)
        bases = rng.integers(1, self.modulus, size=self.levels, dtype=np.uint64)
        return h, bases

    def level_mask(self, h: np.ndarray) -> np.ndarray:
        thresholds = 2.0 ** -np.arange(self.levels)
        return h[None, :] < thresholds[:, None]

    def query_block(self, rnd: int, rep: int) -> np.ndarray:
        """(C(n,2), 2L) uint64: L packed queries then L fingerprint queries."""
        h, bases = self.cell_params(rnd, rep)
        mask = self.level_mask(h)
        packed_entry = 1 + self.pack_base * (np.arange(self.width, dtype=np.uint64) + 1)
        packed = np.where(mask, packed_entry[None, :], 0).astype(np.uint64)
        fp = kernels.powmod_table(bases, self.width, self.modulus)
        fp[~mask] = 0
        return np.ascontiguousarray(np.concatenate([packed, fp], axis=0).T)

    def query_matrix(self) -> np.ndarray:
        """Every query column at once; only sensible for small n."""
        return np.concatenate([self.query_block(r, t) for r in range(self.rounds)
                               for t in range(self.reps)], axis=1)


@dataclass
class L0SamplerSketch:
    """Cells of one Boruvka round: ``packed`` and ``fingerprint`` are (reps, levels) residues."""

    plan: SketchPlan
    round: int
    packed: np.ndarray
    fingerprint: np.ndarray

    def __add__(self, other: "L0SamplerSketch") -> "L0SamplerSketch":
        if other.plan != self.plan or other.round != self.round:
            raise ValueError("can only add sketches from the same plan and round")
        p = np.uint64(self.plan.modulus)
        return L0SamplerSketch(self.plan, self.round, (self.packed + other.packed) % p,
                               (self.fingerprint + other.fingerprint) % p)

    def is_zero(self) -> bool:
        return not (self.packed.any() or self.fingerprint.any())


def _decode_cell(plan: SketchPlan, a: int, f: int, base: int, level_h: np.ndarray,
                 level: int) -> tuple[int, int] | None:
    p = plan.modulus
    if a == 0:
        return None
    ac = a if a <= p // 2 else a - p
    width, b = plan.width, plan.pack_base
    value = (ac + width) % b - width
    if value not in (1, -1):
        return None
    idx1 = (ac - value) // b * value
    if not 1 <= idx1 <= width:
        return None
    e = idx1 - 1
    if not level_h[e] < 2.0**-level:
        return None
    if f != (value * pow(base, e, p)) % p:
        return None
    return e, value


def l0_sample(sketch: L0SamplerSketch) -> tuple[int, int] | None:
    """A nonzero coordinate (edge column, sign) of the sketched vector, or None.

    Repetitions are tried in order; within one, levels are scanned from the sparsest.
    The scan order is label-independent, so the returned edge is uniform over the
    support given success.
    """
    plan = sketch.plan
    for rep in range(plan.reps):
        h, bases = plan.cell_params(sketch.round, rep)
        for level in range(plan.levels - 1, -1, -1):
            got = _decode_cell(plan, int(sketch.packed[rep, level]),
                               int(sketch.fingerprint[rep, level]), int(bases[level]), h, level)
            if got is not None:
                return got
    return None


@dataclass
class AGMSketch:
    """Per-vertex sketch stacks: arrays of shape (n, rounds, reps, levels)."""

    plan: SketchPlan
    packed: np.ndarray
    fingerprint: np.ndarray

    def vertex_sketch(self, v: int, rnd: int) -> L0SamplerSketch:
        return L0SamplerSketch(self.plan, rnd, self.packed[v, rnd].copy(),
                               self.fingerprint[v, rnd].copy())

    def set_sketch(self, vertices, rnd: int) -> L0SamplerSketch:
        idx = np.asarray(list(vertices), dtype=np.intp)
        p = self.plan.modulus
        packed = (self.packed[idx, rnd].astype(object).sum(axis=0) % p).astype(np.uint64)
        fp = (self.fingerprint[idx, rnd].astype(object).sum(axis=0) % p).astype(np.uint64)
        return L0SamplerSketch(self.plan, rnd, packed, fp)


def default_rounds(n: int) -> int:
    return math.ceil(math.log2(max(n, 2))) + 2


def sketch_all_vertices(o: IncidenceOracle, seed=None, rounds: int | None = None,
                        reps: int = DEFAULT_REPS) -> AGMSketch:
    """Issue the plan's R * reps * L * 2 queries and slice per-vertex sketches out of the responses.

    Every query block comes from ``SketchPlan.query_block``, which sees only
    (n, seed, round, rep), never an oracle response.
    """
    n = o.num_vertices
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63))
    elif seed is None:
        seed = int(make_rng(None).integers(0, 2**63))
    plan = SketchPlan(n, int(seed), default_rounds(n) if rounds is None else rounds, reps,
                      o.modulus)
    shape = (n, plan.rounds, plan.reps, plan.levels)
    packed = np.zeros(shape, dtype=np.uint64)
    fp = np.zeros(shape, dtype=np.uint64)
    L = plan.levels
    for rnd in range(plan.rounds):
        for rep in range(plan.reps):
            resp = o.query_right_many(plan.query_block(rnd, rep))
            packed[:, rnd, rep] = resp[:, :L]
            fp[:, rnd, rep] = resp[:, L:]
    return AGMSketch(plan, packed, fp)


@dataclass
class SpanningForest:
    edges: list[tuple[int, int]]
    labels: np.ndarray = field(repr=False)

    @property
    def num_components(self) -> int:
        return int(np.unique(self.labels).size)


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def agm_connectivity(sk: AGMSketch, n: int | None = None) -> tuple[bool, SpanningForest]:
    """Boruvka over sketches: one fresh sketch round per merge round.

    Components are labelled by their smallest vertex.
    """
    n = sk.plan.n if n is None else n
    pairs = edge_pairs(n)
    dsu = _DisjointSet(n)
    forest: list[tuple[int, int]] = []
    for rnd in range(sk.plan.rounds):
        comps: dict[int, list[int]] = {}
        for v in range(n):
            comps.setdefault(dsu.find(v), []).append(v)
        if len(comps) == 1:
            break
        picks = []
        for members in comps.values():
            got = l0_sample(sk.set_sketch(members, rnd))
            if got is not None:
                picks.append(got[0])
        for e in picks:
            i, j = (int(x) for x in pairs[e])
            if dsu.union(i, j):
                forest.append((i, j))
    labels = np.array([dsu.find(v) for v in range(n)])
    return int(np.unique(labels).size) == 1, SpanningForest(forest, labels)


def gnp_edges(n: int, p: float, rng=None) -> list[tuple[int, int]]:
    """Erdos-Renyi G(n, p) as a sorted edge list."""
    rng = make_rng(rng)
    pairs = edge_pairs(n)
    keep = rng.random(len(pairs)) < p
    return [(int(i), int(j)) for i, j in pairs[keep]]
