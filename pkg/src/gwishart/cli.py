"""Command-line front end: eval, classify, compare, iris."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import math
import os
import sys
import time
import warnings

import numpy as np
from scipy.special import logsumexp

from gwishart import graph as gr
from gwishart.errors import (
    CholeskyFailure,
    ConvergenceError,
    DegenerateWeights,
    DimensionTooHigh,
    DomainError,
    Intractable,
    NonRealResult,
    ToleranceNotReached,
)
from gwishart.evaluators import (
    LOG2,
    WishartSpec,
    log_c_from_i,
    log_constant,
    log_marginal_likelihood,
    planned_route,
)
from gwishart.graph import Graph
from gwishart.montecarlo import McConfig, mc_log_constant, mc_replicate_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTRACTABLE = 3
EXIT_NUMERICAL = 4

# Fisher's Iris virginica: sepal length, sepal width, petal length, petal
# width; scatter matrix of the 50 flowers (sample covariance times 49).
IRIS_SCATTER = np.array([
    [19.8128, 4.5944, 14.8612, 2.4056],
    [4.5944, 5.0962, 3.4976, 2.3338],
    [14.8612, 3.4976, 14.9248, 2.3924],
    [2.4056, 2.3338, 2.3924, 3.6962],
])
IRIS_N = 50
IRIS_DELTA = 3.0
IRIS_FEATURES = ("SL", "SW", "PL", "PW")
IRIS_CYCLES = {
    "G1": [(0, 1), (1, 3), (2, 3), (0, 2)],
    "G2": [(0, 2), (1, 2), (1, 3), (0, 3)],
    "G3": [(0, 1), (1, 2), (2, 3), (0, 3)],
}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# Input parsing


def _family(spec: str) -> Graph:
    name, _, arg = spec.partition(":")
    try:
        if name == "complete":
            return Graph.complete(int(arg))
        if name == "cycle":
            return gr.cycle(int(arg))
        if name == "grid":
            r, c = arg.lower().split("x")
            return gr.grid(int(r), int(c))
        if name == "kpartite":
            return gr.complete_multipartite([int(x) for x in arg.split(",")])
        if name == "turan":
            return gr.turan(int(arg))
        if name == "gear":
            return gr.gear(int(arg))
        if name == "gmk":
            m, ks = arg.split(":")
            return gr.gmk(int(m), [int(x) for x in ks.split(",")])
        if name == "c6-complement":
            return gr.c6_complement()
    except ValueError as exc:
        raise InputError(f"bad graph family argument {spec!r}: {exc}") from exc
    raise InputError(f"graph file {spec!r} not found and not a known family")


def parse_graph_text(text: str) -> Graph:
    """Graph JSON ``{"n":..,"edges":[[u,v],..]}`` or an edge list (``n`` then ``u v`` lines)."""
    stripped = text.strip()
    try:
        if stripped.startswith("{"):
            obj = json.loads(stripped)
            n = obj["n"]
            edges = obj["edges"]
            if not isinstance(n, int) or isinstance(n, bool):
                raise InputError("'n' must be an integer")
            for e in edges:
                if len(e) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in e):
                    raise InputError(f"bad edge {e!r}")
                if not e[0] < e[1]:
                    raise InputError(f"edge {e!r} must satisfy u < v")
            return Graph.from_edges(n, edges)
        lines = [ln.split("#")[0].strip() for ln in stripped.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise InputError("empty graph description")
        n = int(lines[0])
        edges = []
        for ln in lines[1:]:
            parts = ln.replace(",", " ").split()
            if len(parts) != 2:
                raise InputError(f"expected 'u v', got {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
        return Graph.from_edges(n, edges)
    except InputError:
        raise
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse graph: {exc}") from exc


def load_graph(spec: str) -> Graph:
    if os.path.exists(spec):
        with open(spec) as fh:
            return parse_graph_text(fh.read())
    return _family(spec)


def parse_matrix_text(text: str) -> np.ndarray:
    """Square matrix from JSON nested arrays or CSV rows; symmetrised within 1e-12."""
    stripped = text.strip()
    try:
        if stripped.startswith("["):
            m = np.array(json.loads(stripped), dtype=float)
        else:
            rows = [r for r in csv.reader(io.StringIO(stripped)) if r]
            if len(rows) and len(rows[0]) == 1:
                rows = [r[0].split() for r in rows]
            m = np.array([[float(x) for x in r] for r in rows], dtype=float)
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse matrix: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"matrix must be square, got shape {m.shape}")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > 1e-12:
        raise InputError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    if asym > 0:
        warnings.warn("averaging matrix with its transpose", RuntimeWarning, stacklevel=2)
        m = 0.5 * (m + m.T)
    return m


def load_matrix(path: str) -> np.ndarray:
    try:
        with open(path) as fh:
            return parse_matrix_text(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _spec_from_args(args, n: int) -> WishartSpec:
    scale = None
    if args.scale is not None:
        scale = load_matrix(args.scale)
        if scale.shape != (n, n):
            raise InputError(f"scale matrix is {scale.shape[0]}x{scale.shape[1]}, graph has {n} vertices")
        try:
            np.linalg.cholesky(scale)
        except np.linalg.LinAlgError as exc:
            raise InputError("scale matrix is not positive definite") from exc
    try:
        if args.delta is not None:
            return WishartSpec.from_delta(args.delta, scale)
        return WishartSpec(args.beta, scale)
    except (DomainError, ValueError) as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Output helpers


def _plain(obj):
    """Dataclasses, frozensets and numpy scalars turned into JSON-friendly values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (set, frozenset)):
        return sorted(_plain(x) for x in obj)
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Subcommands


def evaluate(g: Graph, spec: WishartSpec, *, tol: float = 1e-10, force_method: str | None = None,
             allow_mc: bool = True, mc_samples: int = 20000) -> dict:
    """Evaluate one constant; the dict mirrors the JSON report."""
    trace: list = []
    start = time.perf_counter()
    val = log_constant(g, spec, tol=tol, force_method=force_method, allow_mc=allow_mc,
                       mc=McConfig(n_samples=mc_samples, seed=0), trace=trace)
    millis = 1e3 * (time.perf_counter() - start)
    return {
        "log_c": log_c_from_i(val.log_value, g, spec.delta),
        "log_i": val.log_value,
        "method": val.method,
        "err_log": val.err_log,
        "millis": millis,
        "components": [
            {"vertices": list(labels), "method": v.method, "log_i": v.log_value, "millis": 1e3 * sec}
            for labels, v, sec in trace
        ],
    }


def cmd_eval(args, out) -> int:
    g = load_graph(args.graph)
    spec = _spec_from_args(args, g.n)
    rep = evaluate(g, spec, tol=args.tol, force_method=args.force_method,
                   allow_mc=not args.no_mc, mc_samples=args.mc_samples or 20000)
    keys = ("log_c", "log_i", "method", "err_log", "millis")
    if args.format == "json":
        out.write(json.dumps({k: rep[k] for k in keys}) + "\n")
    elif args.format == "csv":
        out.write(_csv_text(keys, [[repr(rep[k]) if isinstance(rep[k], float) else rep[k] for k in keys]]))
    else:
        out.write(f"log C_G   {rep['log_c']!r}\n")
        out.write(f"log I_G   {rep['log_i']!r}\n")
        out.write(f"method    {rep['method']}\n")
        out.write(f"err_log   {rep['err_log']:.3g}\n")
        out.write(f"time      {rep['millis']:.3f} ms\n")
        for c in rep["components"]:
            out.write(f"  component {c['vertices']}: {c['method']}, log I = {c['log_i']!r}, "
                      f"{c['millis']:.3f} ms\n")
    return EXIT_OK


def classification_report(g: Graph, spec: WishartSpec | None = None) -> dict:
    spec = spec or WishartSpec(0.0)
    cs = gr.prime_decomposition(g)
    comps = []
    for comp in cs.cliques:
        sub, labels = g.induced(comp)
        cc, pattern, route = planned_route(sub, spec.restrict(labels))
        comps.append({
            "vertices": labels,
            "prime": True,
            "completion": cc.heuristic,
            "fill_edges": [sorted((labels[u], labels[v])) for u, v in cc.fill_edges],
            "pattern": pattern.name,
            "witness": _relabel_witness(_plain(pattern), labels),
            "route": route,
        })
    return {
        "n": g.n,
        "chordal": gr.is_chordal(g),
        "separators": [sorted(s) for s in cs.separators],
        "components": comps,
    }


def _relabel_witness(obj, labels):
    # Witness data lives on the relabelled subgraph; only vertex-valued
    # fields are mapped back, counts are left alone.
    vertex_fields = {"edge", "v1", "v2", "v3", "v0", "leaves", "hub", "rim", "pairs", "parts", "families"}

    def walk(x):
        if isinstance(x, list):
            return [walk(y) for y in x]
        if isinstance(x, int):
            return labels[x]
        return x

    return {k: (walk(v) if k in vertex_fields else v) for k, v in obj.items()}


def cmd_classify(args, out) -> int:
    g = load_graph(args.graph)
    spec = _spec_from_args(args, g.n) if (args.delta is not None or args.beta is not None) else None
    rep = classification_report(g, spec)
    if args.format == "json":
        out.write(json.dumps(rep) + "\n")
        return EXIT_OK
    if args.format == "csv":
        rows = [[" ".join(map(str, c["vertices"])), c["pattern"], c["route"],
                 " ".join(f"{u}-{v}" for u, v in c["fill_edges"]), json.dumps(c["witness"])]
                for c in rep["components"]]
        out.write(_csv_text(["vertices", "pattern", "route", "fill_edges", "witness"], rows))
        return EXIT_OK
    out.write(f"n = {g.n}, {g.num_edges} edges, {'chordal' if rep['chordal'] else 'not chordal'}\n")
    out.write(f"{len(rep['components'])} prime component(s); separators {rep['separators']}\n")
    for c in rep["components"]:
        out.write(f"- vertices {c['vertices']}\n")
        out.write(f"    completion ({c['completion'] or 'none'}): fill edges {c['fill_edges']}\n")
        witness = ", ".join(f"{k}={v}" for k, v in c["witness"].items())
        out.write(f"    pattern {c['pattern']}{{{witness}}}\n")
        out.write(f"    route {c['route']}\n")
    return EXIT_OK


def cmd_compare(args, out) -> int:
    g = load_graph(args.graph)
    spec = _spec_from_args(args, g.n)
    cfg = McConfig(n_samples=args.mc_samples or 1000, seed=args.seed, n_replicates=args.seeds or 200)
    try:
        exact = log_c_from_i(log_constant(g, spec, tol=args.tol, allow_mc=False).log_value, g, spec.delta)
    except Intractable:
        exact = None
    study = mc_replicate_study(g, spec.delta, spec.matrix(g.n), cfg)
    if args.format == "json":
        pooled, pooled_se = study.pooled()
        out.write(json.dumps({
            "exact": exact,
            "rows": [{"seed": s, "log_estimate": e, "se": se} for s, e, se in study.rows],
            "summary": study.summary(),
            "pooled": {"log_estimate": pooled, "se": pooled_se},
        }) + "\n")
    elif args.format == "text":
        s = study.summary()
        pooled, pooled_se = study.pooled()
        out.write(f"exact log C_G  {exact!r}\n")
        out.write(f"MC {cfg.n_replicates} seeds x {cfg.n_samples} samples: "
                  f"min {s['min']:.6f} max {s['max']:.6f} sd {s['sd']:.3g} mean {s['mean']:.6f}\n")
        out.write(f"pooled {pooled:.6f} +/- {pooled_se:.3g}\n")
        if exact is not None:
            out.write(f"exact inside MC range: {s['min'] <= exact <= s['max']}\n")
    else:
        out.write(study.to_csv(exact))
    return EXIT_OK


def iris_exact() -> dict[str, float]:
    """log p(Z | G_j) for the three Iris four-cycles."""
    return {
        name: log_marginal_likelihood(IRIS_SCATTER, IRIS_N, Graph.from_edges(4, es), IRIS_DELTA)
        for name, es in IRIS_CYCLES.items()
    }


def iris_mc(name: str, n_samples: int, seeds: int, seed: int = 0) -> np.ndarray:
    """Per-seed MC estimates of log p(Z | G) with both constants sampled."""
    g = Graph.from_edges(4, IRIS_CYCLES[name])
    n = 4
    prefactor = -math.comb(n, 2) * LOG2 - n * IRIS_N / 2.0 * math.log(2 * math.pi)
    post_d = IRIS_SCATTER + np.eye(n)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWeights)
        for s in range(seed, seed + seeds):
            post = mc_log_constant(g, IRIS_DELTA + IRIS_N, post_d, McConfig(n_samples, s, 1))
            prior = mc_log_constant(g, IRIS_DELTA, np.eye(n), McConfig(n_samples, s, 1))
            out.append(prefactor + post.log_value - prior.log_value)
    return np.array(out)


def iris_ranking() -> list[tuple[list[tuple[str, str]], float, float]]:
    """All 64 models sorted by posterior probability under a uniform graph prior."""
    pairs = list(itertools.combinations(range(4), 2))
    scored = []
    for mask in range(1 << len(pairs)):
        es = [p for i, p in enumerate(pairs) if mask >> i & 1]
        scored.append((es, log_marginal_likelihood(IRIS_SCATTER, IRIS_N, Graph.from_edges(4, es), IRIS_DELTA)))
    norm = logsumexp([s for _, s in scored])
    ranked = sorted(scored, key=lambda r: -r[1])
    return [([(IRIS_FEATURES[u], IRIS_FEATURES[v]) for u, v in es], lml, math.exp(lml - norm))
            for es, lml in ranked]


def cmd_iris(args, out) -> int:
    start = time.perf_counter()
    exact = iris_exact()
    millis = 1e3 * (time.perf_counter() - start)
    mc = {}
    if args.seeds:
        for name in IRIS_CYCLES:
            est = iris_mc(name, args.mc_samples or 10**6, args.seeds, args.seed)
            mc[name] = {"min": float(est.min()), "max": float(est.max()),
                        "sd": float(est.std(ddof=1)) if len(est) > 1 else 0.0, "mean": float(est.mean())}
    ranking = iris_ranking()
    if args.format == "json":
        out.write(json.dumps({
            "log_marginal": exact,
            "millis": millis,
            "mc": mc,
            "ranking": [{"edges": [list(e) for e in es], "log_marginal": lml, "posterior": p}
                        for es, lml, p in ranking],
        }) + "\n")
        return EXIT_OK
    if args.format == "csv":
        rows = [[name, repr(v)] + ([repr(mc[name][k]) for k in ("min", "max", "sd", "mean")] if mc else [])
                for name, v in exact.items()]
        header = ["graph", "log_marginal"] + (["mc_min", "mc_max", "mc_sd", "mc_mean"] if mc else [])
        out.write(_csv_text(header, rows))
        out.write("\n")
        out.write(_csv_text(["rank", "edges", "log_marginal", "posterior"],
                            [[i + 1, " ".join(f"{u}-{v}" for u, v in es), repr(lml), repr(p)]
                             for i, (es, lml, p) in enumerate(ranking)]))
        return EXIT_OK
    out.write("log p(Z | G) for the three four-cycles (delta = 3, D = I, N = 50)\n")
    for name, es in IRIS_CYCLES.items():
        cyc = " ".join(f"{IRIS_FEATURES[u]}-{IRIS_FEATURES[v]}" for u, v in es)
        line = f"  {name}  {exact[name]:.4f}   [{cyc}]"
        if mc:
            m = mc[name]
            line += f"   MC min {m['min']:.4f} max {m['max']:.4f} sd {m['sd']:.4f} mean {m['mean']:.4f}"
        out.write(line + "\n")
    out.write(f"exact evaluation time {millis:.2f} ms\n\n")
    out.write("rank  posterior  log p(Z|G)   edges\n")
    for i, (es, lml, p) in enumerate(ranking[: args.top], start=1):
        edges = " ".join(f"{u}-{v}" for u, v in es) or "(none)"
        out.write(f"{i:4d}  {p:9.5f}  {lml:10.4f}   {edges}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwishart", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_params=True, need_scale=True):
        p.add_argument("--graph", required=True,
                       help="graph JSON / edge-list file, or a family such as cycle:6, grid:2x3, "
                            "kpartite:3,3, turan:3, gear:4, gmk:4:1,1,1, c6-complement, complete:5")
        grp = p.add_mutually_exclusive_group(required=need_params)
        grp.add_argument("--delta", type=float)
        grp.add_argument("--beta", type=float)
        sc = p.add_mutually_exclusive_group(required=need_scale)
        sc.add_argument("--scale", help="scale matrix D as CSV or JSON")
        sc.add_argument("--identity", action="store_true", help="D = I")
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("eval", help="evaluate log C_G and log I_G")
    add_common(p)
    p.add_argument("--force-method")
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--no-mc", action="store_true", help="fail instead of falling back to Monte Carlo")

    p = sub.add_parser("classify", help="prime components, completions and planned routes")
    add_common(p, need_params=False, need_scale=False)

    p = sub.add_parser("compare", help="exact value against per-seed Monte Carlo estimates")
    add_common(p)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.set_defaults(format="csv")

    p = sub.add_parser("iris", help="Iris virginica four-cycles and the 64-model ranking")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--seeds", type=int, help="add Monte Carlo columns over this many seeds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top", type=int, default=16)
    return parser


COMMANDS = {"eval": cmd_eval, "classify": cmd_classify, "compare": cmd_compare, "iris": cmd_iris}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("mc_samples", "seeds"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            print(f"error: --{name.replace('_', '-')} must be positive", file=sys.stderr)
            return EXIT_INPUT
    try:
        return COMMANDS[args.command](args, out)
    except (InputError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Intractable as exc:
        print(f"intractable: {exc}", file=sys.stderr)
        return EXIT_INTRACTABLE
    except (ConvergenceError, ToleranceNotReached, NonRealResult, CholeskyFailure, DimensionTooHigh) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
