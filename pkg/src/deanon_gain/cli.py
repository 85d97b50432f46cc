"""Command line entry point: ``deanon-gain <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .experiments import DEFAULTS, ConfigError, default_validation_modes, load_config, run, validation_table
from .generators import GnpParams, PowerLawParams, generate_chung_lu, generate_gnp, ingest
from .graph import EdgeListError, Query, load_edge_list, load_query, save_edge_list, save_query
from .knowledge import KnowledgeSpec
from .matching import BudgetExceeded, color_coding_count, count_matches
from .querygen import EgoRandomCenter, QuerySpec, generate_query, is_star, synthetic_query
from .sweep import find_critical_points, grid, read_curve_csv, sweep, write_curve_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _spec(path) -> KnowledgeSpec:
    if path is None:
        return KnowledgeSpec()
    with open(path) as fh:
        return KnowledgeSpec.from_dict(json.load(fh))


def _sidecar(path: str) -> Path:
    return Path(path).with_suffix(".json")


def cmd_gen(a) -> int:
    if a.model == "gnp":
        g = generate_gnp(GnpParams(a.n, a.p, a.seed), jobs=a.jobs)
    else:
        g = generate_chung_lu(PowerLawParams(a.n, a.beta, a.seed), jobs=a.jobs)
    save_edge_list(g, a.out)
    print(json.dumps({"n": g.n, "m": g.m, **{k: v for k, v in g.meta.items() if k != "discretization"}}, sort_keys=True))
    return EXIT_OK


def cmd_ingest(a) -> int:
    g = ingest(a.input, a.attributes)
    save_edge_list(g, a.out)
    print(json.dumps({"n": g.n, "m": g.m, **g.meta}, sort_keys=True, default=str))
    return EXIT_OK


def _emit_curve(curve, out) -> None:
    write_curve_csv(curve, out or sys.stdout)


def cmd_analytic(a) -> int:
    values = [a.nq] if a.nq is not None else grid(a.nq_from, a.nq_to, 1)
    curve = sweep(_spec(a.spec), "n_Q", values, a.n, p=None if a.beta else a.p, beta=a.beta, p_q=a.pq)
    _emit_curve(curve, a.out)
    return EXIT_OK


def cmd_sweep(a) -> int:
    curve = sweep(
        _spec(a.spec), a.axis, grid(a.start, a.stop, a.step), a.n,
        p=None if a.beta else a.p, beta=a.beta, n_Q=a.nq, p_q=a.pq,
    )
    _emit_curve(curve, a.out)
    return EXIT_OK


def cmd_critical(a) -> int:
    cp = find_critical_points(read_curve_csv(a.input))
    print(json.dumps({"valley": cp.valley, "vanish": cp.vanish}))
    return EXIT_OK


def cmd_count(a) -> int:
    g = load_edge_list(a.graph, a.graph_attributes)
    side = a.query_sidecar or (_sidecar(a.query) if _sidecar(a.query).exists() else None)
    q = load_query(a.query, side)
    if g.schema is not None and q.attributes is not None:
        q = Query(q.n, q.edges, q.attributes, g.schema, edge_confidence=q.edge_confidence, beliefs=q.beliefs)
    sem = _spec(a.sem)
    if a.colorcoding is not None:
        est = color_coding_count(g, q, iterations=a.colorcoding or None, seed=a.seed)
        print(json.dumps({"method": "colorcoding", "estimate": est.estimate, "stderr": est.stderr, "iterations": est.iterations}))
        return EXIT_OK
    try:
        res = count_matches(g, q, sem, budget=a.budget, jobs=a.jobs)
    except BudgetExceeded as exc:
        print(json.dumps({"method": "exact", "budget_exceeded": True, "expanded": exc.expanded}))
        return EXIT_FAIL
    print(json.dumps({"method": "exact", "M_Q": res.match_count, "C_Q": res.community_count}))
    return EXIT_OK


def cmd_validate(a) -> int:
    edges = [(i, i + 1) for i in range(a.nq - 1)]
    rows = validation_table(a.n, a.p, Query(a.nq, edges), default_validation_modes({}), a.trials, a.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["mode", "analytic", "mc_mean", "ci99_low", "ci99_high", "result"])
    for label, analytic, mean, _se, lo, hi, ok in rows:
        w.writerow([label, f"{analytic:.6g}", f"{mean:.6g}", f"{lo:.6g}", f"{hi:.6g}", "pass" if ok else "FAIL"])
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL


def cmd_query(a) -> int:
    if a.source == "ego":
        g = load_edge_list(a.graph)
        q = generate_query(g, QuerySpec(EgoRandomCenter(a.seed, a.min_degree), target_density=a.pq))
    else:
        q = synthetic_query(a.nq, a.pq, a.seed)
    save_query(q, a.out, _sidecar(a.out))
    print(json.dumps({"n_Q": q.n, "m_Q": q.m, "star": is_star(q), **q.provenance}, sort_keys=True))
    return EXIT_OK


def cmd_run(a) -> int:
    manifest = run(load_config(a.config), out_dir=a.out, jobs=a.jobs)
    for name, e in manifest["experiments"].items():
        print(f"{name}: {'ok' if not e['failures'] else 'FAIL ' + ', '.join(e['failures'])}")
    return EXIT_OK if manifest["ok"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deanon-gain", description="De-anonymization gain of background knowledge.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random graph")
    gsub = gen.add_subparsers(dest="model", required=True)
    for model in ("gnp", "chunglu"):
        s = gsub.add_parser(model)
        s.add_argument("--n", type=int, required=True)
        if model == "gnp":
            s.add_argument("--p", type=float, required=True)
        else:
            s.add_argument("--beta", type=float, required=True)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--out", required=True)
        s.set_defaults(func=cmd_gen)

    s = sub.add_parser("ingest", help="clean a real edge list")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--attributes")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    def model_args(s):
        s.add_argument("--spec", help="knowledge spec JSON")
        s.add_argument("--n", type=int, default=DEFAULTS["n"])
        s.add_argument("--p", type=float, default=DEFAULTS["p"])
        s.add_argument("--beta", type=float, help="use the power-law lower bound instead of G(n,p)")
        s.add_argument("--pq", type=float, default=DEFAULTS["p_q"])
        s.add_argument("--out", help="CSV path (stdout if omitted)")

    s = sub.add_parser("analytic", help="analytic M_Q and DAG over n_Q")
    model_args(s)
    s.add_argument("--nq", type=int, help="single query size")
    s.add_argument("--nq-from", type=int, default=2)
    s.add_argument("--nq-to", type=int, default=200)
    s.set_defaults(func=cmd_analytic)

    s = sub.add_parser("sweep", help="DAG curve along one axis")
    model_args(s)
    s.add_argument("--axis", choices=["nq", "pq", "r"], required=True)
    s.add_argument("--from", dest="start", type=float, required=True)
    s.add_argument("--to", dest="stop", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s.add_argument("--nq", type=int, default=DEFAULTS["n_Q"])
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("critical", help="valley and vanish points of a curve CSV")
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("count", help="count matches of a query in a graph")
    s.add_argument("--graph", required=True)
    s.add_argument("--graph-attributes")
    s.add_argument("--query", required=True)
    s.add_argument("--query-sidecar")
    s.add_argument("--sem")
    mx = s.add_mutually_exclusive_group()
    mx.add_argument("--exact", action="store_true", help="exact backtracking (default)")
    mx.add_argument("--colorcoding", type=int, metavar="N", help="color coding with N iterations (0: automatic)")
    s.add_argument("--budget", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("validate", help="analytic vs Monte-Carlo match counts")
    s.add_argument("--gen", choices=["gnp"], default="gnp")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--p", type=float, default=0.5)
    s.add_argument("--nq", type=int, default=3, help="path query size")
    s.add_argument("--trials", type=int, default=20_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("query", help="build a query graph")
    qsub = s.add_subparsers(dest="source", required=True)
    e = qsub.add_parser("ego")
    e.add_argument("--graph", required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--min-degree", type=int, default=1)
    e.add_argument("--pq", type=float, help="adjust density to this p_q")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_query)
    y = qsub.add_parser("synth")
    y.add_argument("--nq", type=int, required=True)
    y.add_argument("--pq", type=float, required=True)
    y.add_argument("--seed", type=int, required=True)
    y.add_argument("--out", required=True)
    y.set_defaults(func=cmd_query)

    s = sub.add_parser("run", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: config out_dir, then $DEANON_GAIN_OUT)")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except (ConfigError, EdgeListError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
