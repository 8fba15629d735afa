"""Seeded multi-trial runs, distinguishing advantage and protocol comparison."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import testers as T
from .graph_sketch import IncidenceOracle, agm_connectivity, gnp_edges, sketch_all_vertices
from .hard_instances import (
    InstancePair,
    WishartPairConfig,
    gen_bipartite_connectivity_instance,
    gen_disjointness_all_ones_column,
    gen_identical_columns_instance,
    gen_majority_columns_instance,
    gen_triangle_instance,
    gen_wishart_rank_pair,
)
from .numerics import (
    Field,
    Matrix,
    bernoulli_matrix,
    gaussian_matrix,
    make_rng,
    numerical_rank,
    random_orthonormal,
    read_matrix,
)
from .oracle import BudgetExhausted, MatVecOracle, Side

SCHEMA = "mvp-report/1"
Z_NOTE = ("z defaults to n^4, far below the 2^Theta(p^2 log n) perturbation scale the "
          "indistinguishability argument needs; q = p advantages are empirical at this z")


class ConfigError(ValueError):
    pass


def _child_rngs(seed: int, index: int, count: int = 2) -> list[np.random.Generator]:
    ss = np.random.SeedSequence([int(seed), int(index)])
    return [make_rng(c) for c in ss.spawn(count)]


def _jsonable(x):
    if isinstance(x, (T.Decision, T.RankVerdict, Field)):
        return x.value
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (frozenset, set)):
        return sorted(_jsonable(v) for v in x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def decision_label(outcome: T.TesterOutcome) -> str | None:
    r = outcome.result
    if isinstance(r, (T.Decision, T.RankVerdict)):
        return r.value
    if isinstance(r, (bool, np.bool_)):
        return "accept" if r else "reject"
    return None


# -- reports --------------------------------------------------------------------


@dataclass
class TrialRecord:
    index: int
    decision: str | None
    truth: str | None
    queries_used: int
    budget_violation: bool = False
    world: int | None = None
    value: Any = None
    wall_time_s: float = 0.0

    @property
    def success(self) -> bool | None:
        if self.truth is None:
            return None
        return self.decision == self.truth


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    records: list[TrialRecord]
    aggregates: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def to_dict(self, include_timing: bool = True) -> dict:
        recs = []
        for r in self.records:
            d = asdict(r)
            d["success"] = r.success
            if not include_timing:
                d.pop("wall_time_s")
            recs.append(_jsonable(d))
        return {"schema": self.schema, "kind": self.kind, "config": _jsonable(self.config),
                "aggregates": _jsonable(self.aggregates), "records": recs}

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["index", "world", "decision", "truth", "success", "queries_used",
                "budget_violation", "wall_time_s"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({"index": r.index, "world": "" if r.world is None else r.world,
                        "decision": r.decision or "", "truth": r.truth or "",
                        "success": "" if r.success is None else r.success,
                        "queries_used": r.queries_used, "budget_violation": r.budget_violation,
                        "wall_time_s": r.wall_time_s})
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported report schema {d.get('schema')!r}")
        recs = []
        for r in d["records"]:
            r = {k: v for k, v in r.items() if k != "success"}
            recs.append(TrialRecord(**r))
        return cls(d["kind"], d["config"], recs, d["aggregates"], d["schema"])


def emit_report(report: ExperimentReport, fmt: str = "json", path=None,
                include_timing: bool = True) -> str:
    if fmt == "json":
        text = report.to_json(include_timing)
    elif fmt == "csv":
        text = report.to_csv()
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def summarize(records: list[TrialRecord]) -> dict:
    done = [r for r in records if not r.budget_violation]
    judged = [r for r in records if r.success is not None]
    return {
        "trials": len(records),
        "budget_violations": len(records) - len(done),
        "success_rate": (sum(r.success for r in judged) / len(judged)) if judged else None,
        "accept_rate": (sum(r.decision == "accept" for r in done) / len(done)) if done else None,
        "mean_queries": (sum(r.queries_used for r in records) / len(records)) if records else 0.0,
        "max_queries": max((r.queries_used for r in records), default=0),
    }


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def advantage_interval(k1: int, n1: int, k0: int, n0: int) -> dict:
    """|p1 - p0| with a Newcombe (hybrid Wilson score) 95% interval for p1 - p0."""
    p1 = k1 / n1 if n1 else 0.0
    p0 = k0 / n0 if n0 else 0.0
    l1, u1 = wilson_interval(k1, n1)
    l0, u0 = wilson_interval(k0, n0)
    d = p1 - p0
    lo = max(-1.0, d - math.sqrt((p1 - l1) ** 2 + (u0 - p0) ** 2))
    hi = min(1.0, d + math.sqrt((u1 - p1) ** 2 + (p0 - l0) ** 2))
    return {"advantage": abs(d), "accept_rate_world0": p0, "accept_rate_world1": p1,
            "difference_ci": [lo, hi], "half_width": (hi - lo) / 2.0}


# -- instance and tester registries ----------------------------------------------

Instance = tuple[Any, str | None]


def _inst_file(params, rng):
    return read_matrix(params["path"]), params.get("truth")


def _inst_symmetric(params, rng):
    n = int(params["n"])
    if params.get("field", "real") == "gf2":
        b = np.triu(bernoulli_matrix(rng, n, n).entries)
        return Matrix(b | np.triu(b, 1).T, Field.GF2), "accept"
    g = gaussian_matrix(rng, n, n).entries
    return Matrix(g + g.T), "accept"


def _inst_gaussian(params, rng):
    n = int(params["n"])
    return gaussian_matrix(rng, int(params.get("m", n)), n), params.get("truth")


def _inst_diagonal(params, rng):
    n = int(params["n"])
    fld = Field(params.get("field", "real"))
    d = rng.integers(0, 2, n) if fld is Field.GF2 else rng.standard_normal(n)
    return Matrix(np.diag(d), fld), "accept"


def _inst_planted_offdiag(params, rng):
    n = int(params["n"])
    fld = Field(params.get("field", "real"))
    a = np.diag(rng.integers(0, 2, n) if fld is Field.GF2 else rng.standard_normal(n))
    i, j = rng.choice(n, size=2, replace=False)
    a[i, j] = 1
    return Matrix(a, fld), "reject"


def _inst_orthogonal(params, rng):
    return random_orthonormal(rng, int(params["n"])), "accept"


def _inst_scaled_orthogonal(params, rng):
    q = random_orthonormal(rng, int(params["n"])).entries.copy()
    q[:, int(rng.integers(q.shape[1]))] *= float(params.get("scale", 1.01))
    return Matrix(q), "reject"


def _distinct_rows(rng, m, n):
    while True:
        b = rng.integers(0, 2, size=(m, n), dtype=np.uint8)
        if np.unique(b, axis=0).shape[0] == m:
            return b


def _inst_distinct_rows(params, rng):
    m, n = int(params["m"]), int(params["n"])
    return Matrix(_distinct_rows(rng, m, n), Field(params.get("field", "gf2"))), "reject"


def _inst_planted_duplicate_rows(params, rng):
    m, n = int(params["m"]), int(params["n"])
    b = _distinct_rows(rng, m, n)
    i, j = rng.choice(m, size=2, replace=False)
    b[j] = b[i]
    return Matrix(b, Field(params.get("field", "gf2"))), "accept"


def _inst_wishart(params, rng):
    cfg = WishartPairConfig(int(params["n"]), int(params["p"]), params.get("z"))
    world = int(params.get("world", 0))
    truth = T.RankVerdict.AT_MOST_P if world == 0 else T.RankVerdict.AT_LEAST_P1
    return gen_wishart_rank_pair(cfg).sample(world, rng), truth.value


def _rand_bits(params, key, n, rng):
    if key in params:
        return np.array([int(c) for c in str(params[key])], dtype=np.uint8)
    return rng.integers(0, 2, n, dtype=np.uint8)


def _inst_triangle(params, rng):
    flag = bool(params.get("with_triangle", True))
    return gen_triangle_instance(int(params["n"]), flag, rng), "accept" if flag else "reject"


def _inst_disjointness(params, rng):
    n = int(params.get("n", 8))
    x, y = _rand_bits(params, "x", n, rng), _rand_bits(params, "y", n, rng)
    a = gen_disjointness_all_ones_column(x, y, int(params.get("m", 4)),
                                         Field(params.get("field", "gf2")))
    return a, "accept" if np.any(x & y) else "reject"


def _inst_bipartite(params, rng):
    n = int(params.get("n", 8))
    u, v = _rand_bits(params, "u", n - 1, rng), _rand_bits(params, "v", n - 1, rng)
    a = gen_bipartite_connectivity_instance(u, v)
    return a, "reject" if np.any((u == 0) & (v == 0)) else "accept"


def _inst_identical_columns(params, rng):
    n = int(params.get("n", 8))
    x, y = _rand_bits(params, "x", n, rng), _rand_bits(params, "y", n, rng)
    a = gen_identical_columns_instance(x, y, int(params.get("m", 64)), rng,
                                       Field(params.get("field", "gf2")))
    return a, "accept" if np.any(x & y) else "reject"


def _inst_majority_columns(params, rng):
    n = int(params.get("n", 8))
    x, y = _rand_bits(params, "x", n, rng), _rand_bits(params, "y", n, rng)
    a = gen_majority_columns_instance(x, y, int(params.get("m", 4)),
                                      Field(params.get("field", "real")))
    return a, "accept" if np.any(x & y) else "reject"


def _inst_gnp(params, rng):
    n = int(params["n"])
    p = float(params.get("p", 2 * math.log(n) / n))
    return (n, gnp_edges(n, p, rng)), None


INSTANCES: dict[str, Callable] = {
    "file": _inst_file,
    "symmetric": _inst_symmetric,
    "gaussian": _inst_gaussian,
    "diagonal": _inst_diagonal,
    "planted_offdiagonal": _inst_planted_offdiag,
    "orthogonal": _inst_orthogonal,
    "scaled_orthogonal": _inst_scaled_orthogonal,
    "distinct_rows": _inst_distinct_rows,
    "planted_duplicate_rows": _inst_planted_duplicate_rows,
    "wishart": _inst_wishart,
    "triangle": _inst_triangle,
    "disjointness_all_ones_column": _inst_disjointness,
    "bipartite_connectivity": _inst_bipartite,
    "identical_columns": _inst_identical_columns,
    "majority_columns": _inst_majority_columns,
    "gnp_graph": _inst_gnp,
}


def _cfg(params) -> T.ToleranceConfig:
    keys = ("eps", "numeric_tol", "jl_constant", "krylov_constant")
    return T.ToleranceConfig(**{k: float(params[k]) for k in keys if k in params})


def _agm(o, params, rng):
    sk = sketch_all_vertices(o, rng, params.get("rounds"), int(params.get("reps", 8)))
    connected, forest = agm_connectivity(sk)
    return T.TesterOutcome(connected, o.queries_used, forest.edges)


def _triangles(o, params, rng):
    out = T.count_triangles_exact(o)
    return T.TesterOutcome(out.result > 0, out.queries_used, out.result)


TESTERS: dict[str, Callable] = {
    "symmetric": lambda o, a, r: T.test_symmetric(o, _cfg(a), r, a.get("rounds")),
    "diagonal": lambda o, a, r: T.test_diagonal(o, _cfg(a), r, a.get("rounds")),
    "unitary": lambda o, a, r: T.test_unitary(o, _cfg(a), r),
    "rank": lambda o, a, r: T.decide_rank_threshold(o, int(a["p"]), _cfg(a), r,
                                                    a.get("num_queries"), a.get("tol")),
    "max-eigenvalue": lambda o, a, r: T.approx_max_eigenvalue(
        o, float(a.get("eig_eps", 0.05)), _cfg(a), r, a.get("method", "krylov")),
    "trace": lambda o, a, r: T.estimate_trace_hutchinson(o, int(a.get("samples", 100)), r),
    "all-ones-row-real": lambda o, a, r: T.all_ones_row_real(o),
    "all-ones-row-gf2": lambda o, a, r: T.all_ones_row_gf2(o, _cfg(a), r),
    "all-ones-column": lambda o, a, r: T.all_ones_column_naive(o),
    "all-ones-column-left": lambda o, a, r: T.all_ones_column_left(o),
    "identical-rows": lambda o, a, r: T.identical_rows(o, _cfg(a), r),
    "identical-columns": lambda o, a, r: T.identical_columns_naive(o),
    "row-norms": lambda o, a, r: T.row_norms_jl(o, _cfg(a), r, a.get("distortion")),
    "heavy-hitters": lambda o, a, r: T.heavy_hitters(o, _cfg(a), r, float(a.get("distortion", 0.01))),
    "majority-rows": lambda o, a, r: T.majority_rows(o),
    "majority-columns": lambda o, a, r: T.majority_columns_naive(o),
    "majority-columns-left": lambda o, a, r: T.majority_columns_left(o),
    "parity-rows": lambda o, a, r: T.parity_rows_gf2(o),
    "parity-columns": lambda o, a, r: T.parity_columns_gf2(o),
    "parity-columns-left": lambda o, a, r: T.parity_columns_left(o),
    "connectivity-bipartite": lambda o, a, r: T.connectivity_bipartite_naive(o),
    "triangles": lambda o, a, r: _triangles(o, a, r),
    "agm-connectivity": _agm,
}

LEFT_TESTERS = {"all-ones-column-left", "majority-columns-left", "parity-columns-left"}


def make_oracle(instance, tester: str, budget: int | None) -> MatVecOracle:
    if isinstance(instance, tuple):
        n, edges = instance
        return IncidenceOracle(n, edges, budget=budget)
    side = Side.BOTH if tester in LEFT_TESTERS else Side.RIGHT_ONLY
    return MatVecOracle(instance, side=side, budget=budget)


def _graph_truth(instance) -> str:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n, edges = instance
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    return "accept" if connected_components(g, directed=False)[0] == 1 else "reject"


# -- plans -----------------------------------------------------------------------


@dataclass(frozen=True)
class TrialPlan:
    tester: str
    instance: dict
    tester_config: dict = field(default_factory=dict)
    budget: int | None = None
    trials: int = 1
    seed: int = 0
    problem: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.tester not in TESTERS:
            raise ConfigError(f"unknown tester {self.tester!r}; choose from {sorted(TESTERS)}")
        if self.instance.get("kind") not in INSTANCES:
            raise ConfigError(f"unknown instance kind {self.instance.get('kind')!r}")
        if self.budget is not None and self.budget < 0:
            raise ConfigError("budget must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "TrialPlan":
        known = {"tester", "instance", "tester_config", "budget", "trials", "seed", "problem"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown plan keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


def _run_one(plan: TrialPlan, index: int) -> TrialRecord:
    inst_rng, test_rng = _child_rngs(plan.seed, index)
    params = dict(plan.instance)
    instance, truth = INSTANCES[params.pop("kind")](params, inst_rng)
    if isinstance(instance, tuple) and plan.tester == "agm-connectivity":
        truth = _graph_truth(instance)
    o = make_oracle(instance, plan.tester, plan.budget)
    t0 = time.perf_counter()
    try:
        out = TESTERS[plan.tester](o, plan.tester_config, test_rng)
    except BudgetExhausted:
        return TrialRecord(index, None, truth, o.queries_used, True,
                           wall_time_s=time.perf_counter() - t0)
    value = None if isinstance(out.result, (T.Decision, T.RankVerdict, bool)) else out.result
    return TrialRecord(index, decision_label(out), truth, out.queries_used, False,
                       value=_jsonable(value), wall_time_s=time.perf_counter() - t0)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_trials(plan: TrialPlan, workers: int = 1) -> ExperimentReport:
    """Run every trial on a fresh instance and oracle; results fold in index order."""
    records = _map(lambda i: _run_one(plan, i), range(plan.trials), workers)
    return ExperimentReport("trials", plan.to_dict(), records, summarize(records))


# -- advantage -------------------------------------------------------------------


Distinguisher = Callable[[MatVecOracle, np.random.Generator], bool]


def rank_distinguisher(p: int, cfg: T.ToleranceConfig = T.DEFAULT_CONFIG) -> Distinguisher:
    """Accept ("high rank") iff a Gaussian response block has numerical rank > p.

    Spends all remaining budget, or p + 1 queries when unbudgeted.
    """

    def run(o: MatVecOracle, rng) -> bool:
        q = p + 1 if o.remaining is None else o.remaining
        if q < 1:
            return False
        out = T.decide_rank_threshold(o, p, cfg, rng, num_queries=q)
        return out.result is T.RankVerdict.AT_LEAST_P1

    return run


def estimate_advantage(pair: InstancePair, tester: Distinguisher, budget: int | None,
                       trials: int, seed: int = 0, workers: int = 1) -> ExperimentReport:
    """Empirical |P(accept | world 1) - P(accept | world 0)| over ``trials`` per world.

    Budget violations are recorded and excluded from the acceptance rates.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")

    def one(key):
        index, world = key
        inst_rng, test_rng = _child_rngs(seed, index)
        o = MatVecOracle(pair.sample(world, inst_rng), budget=budget)
        t0 = time.perf_counter()
        try:
            acc = bool(tester(o, test_rng))
        except BudgetExhausted:
            return TrialRecord(index, None, pair.truth[world], o.queries_used, True, world,
                               wall_time_s=time.perf_counter() - t0)
        return TrialRecord(index, "accept" if acc else "reject", None, o.queries_used, False,
                           world, wall_time_s=time.perf_counter() - t0)

    keys = [(i, w) for i in range(trials) for w in (0, 1)]
    records = _map(one, keys, workers)
    agg = _advantage_aggregates(records)
    agg["mean_queries"] = sum(r.queries_used for r in records) / len(records)
    config = {"pair": pair.name, "params": pair.params, "budget": budget, "trials": trials,
              "seed": seed}
    if pair.name == "wishart_rank":
        config["note"] = Z_NOTE
    return ExperimentReport("advantage", config, records, agg)


def _advantage_aggregates(records) -> dict:
    ok = [r for r in records if not r.budget_violation]
    k = [sum(r.decision == "accept" for r in ok if r.world == w) for w in (0, 1)]
    n = [sum(1 for r in ok if r.world == w) for w in (0, 1)]
    agg = advantage_interval(k[1], n[1], k[0], n[0])
    agg["failures"] = len(records) - len(ok)
    return agg


# -- protocol comparison -----------------------------------------------------------


def standard_protocol(o: MatVecOracle, q: int, rng=None) -> np.ndarray:
    """Responses to e_1, ..., e_q."""
    eye = np.zeros((o.n, q))
    eye[np.arange(q), np.arange(q)] = 1.0
    return o.query_right_many(eye)


def adaptive_protocol(o: MatVecOracle, q: int, rng=None) -> np.ndarray:
    """Unit, mutually orthogonal queries, each built from the previous response.

    v_1 is a random unit vector; v_{i+1} is M v_i orthogonalized against the earlier
    queries, falling back to a random direction if that residual vanishes.
    """
    rng = make_rng(rng)
    n = o.n
    vs = np.zeros((n, q))
    ys = np.zeros((o.m, q))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for i in range(q):
        vs[:, i] = v
        ys[:, i] = o.query_right(v)
        if i == q - 1:
            break
        basis = vs[:, : i + 1]
        cand = ys[:, i] if o.m == n else rng.standard_normal(n)
        for attempt in range(3):
            w = cand.copy()
            for _ in range(2):
                w -= basis @ (basis.T @ w)
            if np.linalg.norm(w) > 1e-8 * max(np.linalg.norm(cand), 1e-300):
                break
            cand = rng.standard_normal(n)
        v = w / np.linalg.norm(w)
    return ys


PROTOCOLS = {"standard": standard_protocol, "adaptive": adaptive_protocol}


def compare_protocols(pair: InstancePair, p: int, q: int, trials: int, seed: int = 0,
                      tol: float = T.DEFAULT_CONFIG.numeric_tol, workers: int = 1) -> ExperimentReport:
    """Paired run of the standard-basis and adaptive protocols at budget q.

    Each protocol accepts ("high rank") iff its q responses have numerical rank > p.
    Both see the same matrices trial by trial.
    """
    if trials < 1 or q < 1:
        raise ConfigError("trials and q must be >= 1")

    def one(key):
        index, world = key
        inst_rng, test_rng = _child_rngs(seed, index)
        m = pair.sample(world, inst_rng)
        recs = []
        for name, proto in PROTOCOLS.items():
            o = MatVecOracle(m, budget=q)
            t0 = time.perf_counter()
            acc = numerical_rank(proto(o, q, test_rng), tol) > p
            recs.append(TrialRecord(index, "accept" if acc else "reject", None, o.queries_used,
                                    False, world, value=name,
                                    wall_time_s=time.perf_counter() - t0))
        return recs

    keys = [(i, w) for i in range(trials) for w in (0, 1)]
    records = [r for recs in _map(one, keys, workers) for r in recs]
    per = {name: _advantage_aggregates([r for r in records if r.value == name])
           for name in PROTOCOLS}
    diff = per["adaptive"]["advantage"] - per["standard"]["advantage"]
    half = math.hypot(per["adaptive"]["half_width"], per["standard"]["half_width"])
    agg = {"standard": per["standard"], "adaptive": per["adaptive"],
           "difference": diff, "difference_half_width": half}
    config = {"pair": pair.name, "params": pair.params, "p": p, "q": q, "trials": trials,
              "seed": seed, "tol": tol}
    if pair.name == "wishart_rank":
        config["note"] = Z_NOTE
    return ExperimentReport("protocols", config, records, agg)
