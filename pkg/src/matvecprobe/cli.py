"""Command-line entry point: gen, test, bench, advantage."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as X
from .hard_instances import InstancePair, WishartPairConfig, gen_wishart_rank_pair
from .numerics import Field, Matrix, read_matrix, trial_rng, write_matrix
from .oracle import BudgetExhausted, OracleError
from .testers import ToleranceConfig

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), json.loads(v)
    except json.JSONDecodeError:
        return k.strip(), v


def _params(args, keys) -> dict:
    out = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    out.update(dict(args.param or []))
    return out


# -- gen ---------------------------------------------------------------------------


def read_edge_list(path, n: int | None = None) -> tuple[int, list[tuple[int, int]]]:
    """Whitespace-separated 1-indexed vertex pairs, one per line; '#' starts a comment.

    An optional first line ``n <count>`` fixes the vertex count.
    """
    edges, declared = [], None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n" and len(parts) == 2:
            declared = int(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two vertex ids")
        i, j = int(parts[0]), int(parts[1])
        if i < 1 or j < 1:
            raise ValueError(f"{path}:{lineno}: vertex ids are 1-indexed")
        edges.append((i - 1, j - 1))
    n = n or declared or (max((max(e) for e in edges), default=-1) + 1)
    return n, edges


def write_edge_list(n: int, edges, path) -> None:
    lines = [f"n {n}"] + [f"{i + 1} {j + 1}" for i, j in edges]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_gen(args) -> int:
    kind = args.problem.replace("-", "_")
    if kind not in X.INSTANCES or kind == "file":
        raise X.ConfigError(f"unknown problem {args.problem!r}; choose from "
                            f"{sorted(k.replace('_', '-') for k in X.INSTANCES if k != 'file')}")
    params = _params(args, ("n", "m", "p", "z", "world", "field"))
    rng = trial_rng(args.seed, 0)
    instance, truth = X.INSTANCES[kind](params, rng)
    out = Path(args.output)
    if isinstance(instance, tuple):
        write_edge_list(*instance, out)
        labels = {"truth": X._graph_truth(instance), "num_edges": len(instance[1])}
        shape = [instance[0], instance[0]]
    else:
        write_matrix(instance, out)
        labels = {"truth": truth}
        shape = list(instance.shape)
    side = {"schema": X.SCHEMA, "problem": kind, "params": params, "seed": args.seed,
            "shape": shape, "labels": labels}
    Path(str(out) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    print(json.dumps(labels, sort_keys=True))
    return EXIT_OK


# -- test --------------------------------------------------------------------------


def _load_instance(args):
    if bool(args.matrix) == bool(args.graph):
        raise X.ConfigError("give exactly one of -m/--matrix or -g/--graph")
    if args.matrix:
        return read_matrix(args.matrix)
    n, edges = read_edge_list(args.graph, args.vertices)
    if args.representation == "incidence":
        return n, edges
    a = np.zeros((n, n), dtype=np.uint8)
    for i, j in edges:
        a[i, j] = 1
        if args.representation == "adjacency":
            a[j, i] = 1
    return Matrix(a, Field(args.field))


def cmd_test(args) -> int:
    if args.tester not in X.TESTERS:
        raise X.ConfigError(f"unknown tester {args.tester!r}; choose from {sorted(X.TESTERS)}")
    instance = _load_instance(args)
    if isinstance(instance, tuple) and args.tester != "agm-connectivity":
        raise X.ConfigError("incidence graphs support only the agm-connectivity tester")
    params = _params(args, ("eps", "p", "samples", "rounds", "distortion", "method", "tol"))
    if "eps" in params:
        ToleranceConfig(eps=params["eps"])
    o = X.make_oracle(instance, args.tester, args.budget)
    try:
        out = X.TESTERS[args.tester](o, params, trial_rng(args.seed, 0))
    except BudgetExhausted as exc:
        print(json.dumps({"tester": args.tester, "error": "budget", "detail": str(exc),
                          "queries_used": o.queries_used}))
        return EXIT_BUDGET
    label = X.decision_label(out)
    value = None if label is not None else X._jsonable(out.result)
    print(json.dumps({"tester": args.tester, "decision": label, "value": value,
                      "witness": X._jsonable(out.witness), "queries_used": out.queries_used},
                     sort_keys=True))
    return EXIT_OK


# -- bench / advantage ----------------------------------------------------------------


def _load_json(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise X.ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise X.ConfigError(f"{path}: expected a JSON object")
    return d


def _write(report, args):
    text = X.emit_report(report, args.format, args.output, include_timing=not args.no_timing)
    if args.output is None:
        sys.stdout.write(text)
    else:
        print(json.dumps(X._jsonable(report.aggregates), sort_keys=True))


def cmd_bench(args) -> int:
    d = _load_json(args.plan)
    if args.seed is not None:
        d["seed"] = args.seed
    report = X.run_trials(X.TrialPlan.from_dict(d), workers=args.workers)
    _write(report, args)
    return EXIT_BUDGET if report.aggregates["budget_violations"] else EXIT_OK


def build_pair(pair_cfg: dict) -> InstancePair:
    pair_cfg = dict(pair_cfg)
    kind = pair_cfg.pop("kind", "wishart")
    if kind not in ("wishart", "wishart_null"):
        raise X.ConfigError(f"unknown pair kind {kind!r}")
    cfg = WishartPairConfig(int(pair_cfg["n"]), int(pair_cfg["p"]), pair_cfg.get("z"))
    pair = gen_wishart_rank_pair(cfg)
    if kind == "wishart_null":
        s0 = pair.samplers[0]
        pair = InstancePair("wishart_null", (s0, s0), (pair.truth[0], pair.truth[0]),
                            pair.shape, pair.field, pair.params)
    return pair


def cmd_advantage(args) -> int:
    d = _load_json(args.pairspec)
    known = {"pair", "p", "budget", "trials", "seed", "mode", "tol"}
    if set(d) - known:
        raise X.ConfigError(f"unknown pairspec keys {sorted(set(d) - known)}")
    if "pair" not in d or "budget" not in d:
        raise X.ConfigError("pairspec needs 'pair' and 'budget'")
    pair = build_pair(d["pair"])
    p = int(d.get("p", d["pair"].get("p")))
    seed = args.seed if args.seed is not None else int(d.get("seed", 0))
    trials = int(d.get("trials", 400))
    tol = float(d.get("tol", ToleranceConfig().numeric_tol))
    mode = d.get("mode", "advantage")
    if mode == "advantage":
        report = X.estimate_advantage(pair, X.rank_distinguisher(p, ToleranceConfig(numeric_tol=tol)),
                                      int(d["budget"]), trials, seed, args.workers)
    elif mode == "protocols":
        report = X.compare_protocols(pair, p, int(d["budget"]), trials, seed, tol, args.workers)
    else:
        raise X.ConfigError(f"unknown mode {mode!r}")
    _write(report, args)
    failures = report.aggregates.get("failures", 0)
    return EXIT_BUDGET if failures else EXIT_OK


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matvecprobe",
                                 description="Matrix-vector query testers and experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file plus a JSON label sidecar")
    g.add_argument("problem")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--seed", type=int, default=0)
    for k, t in (("n", int), ("m", int), ("p", int), ("z", float), ("world", int)):
        g.add_argument(f"--{k}", type=t)
    g.add_argument("--field", choices=["real", "gf2"])
    g.add_argument("--param", action="append", type=_kv, metavar="KEY=VALUE",
                   help="extra generator parameter (JSON value), repeatable")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("test", help="run one tester on a matrix or graph file")
    t.add_argument("tester")
    t.add_argument("-m", "--matrix")
    t.add_argument("-g", "--graph", help="edge list, 1-indexed vertex pairs")
    t.add_argument("--representation", choices=["incidence", "adjacency", "bipartite"],
                   default="incidence")
    t.add_argument("--vertices", type=int, help="vertex count for --graph")
    t.add_argument("--field", choices=["real", "gf2"], default="real")
    t.add_argument("--eps", type=float)
    t.add_argument("--budget", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--p", type=int)
    t.add_argument("--samples", type=int)
    t.add_argument("--rounds", type=int)
    t.add_argument("--distortion", type=float)
    t.add_argument("--method", choices=["krylov", "power"])
    t.add_argument("--tol", type=float)
    t.add_argument("--param", action="append", type=_kv, metavar="KEY=VALUE")
    t.set_defaults(func=cmd_test)

    for name, fn, arg in (("bench", cmd_bench, "plan"), ("advantage", cmd_advantage, "pairspec")):
        b = sub.add_parser(name, help=f"run a {arg} JSON file")
        b.add_argument(arg)
        b.add_argument("-o", "--output")
        b.add_argument("--format", choices=["json", "csv"], default="json")
        b.add_argument("--seed", type=int)
        b.add_argument("--workers", type=int, default=1)
        b.add_argument("--no-timing", action="store_true", help="omit wall times from JSON")
        b.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (X.ConfigError, OracleError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
