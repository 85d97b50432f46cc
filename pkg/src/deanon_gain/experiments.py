"""Reproducible experiment driver.

A config is a JSON object with a global ``seed``, an ``out_dir`` and a list of
``experiments``; a config holding a single experiment (a ``kind`` key) is
accepted too. Every experiment writes a CSV plus a JSON summary; the run
writes ``manifest.json`` with the config hash, seed, tool version and a
digest of every output. Identical configs give identical bytes.

Kinds: ``analytic_sweep``, ``empirical_validate``, ``star_curve``,
``real_data_curve``, ``powerlaw_bound_check``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .generators import GnpParams, PowerLawParams, generate_chung_lu, generate_gnp, ingest
from .graph import Attribute, AttributeSchema, Graph, Query, ego_subgraph
from .knowledge import (
    AlmostAttrs,
    AlmostNodes,
    AttrApproximate,
    AttrExact,
    ExactComplete,
    ExactPartial,
    KnowledgeSpec,
    NoisyComplete,
    NoisyPartial,
    dag,
    match_count,
    powerlaw_match_lower_bound,
)
from .logspace import LogScalar
from .matching import BudgetExceeded, count_matches, star_match_count
from .matching.montecarlo import monte_carlo_expected_matches, summarize
from .querygen import is_star
from .rng import derive_seed
from .sweep import find_critical_points, grid, sweep, write_curve_csv

log = logging.getLogger(__name__)

OUT_DIR_ENV = "DEANON_GAIN_OUT"

# Table defaults used throughout the analytic plots
DEFAULTS = {
    "n": 1_000_000,
    "p": 0.2,
    "n_Q": 50,
    "p_q": 0.3,
    "p_A": 0.001,
    "p_e": 0.4,
    "p1": 0.9,
    "p0": 0.1,
    "r": 0.5,
}


class ConfigError(ValueError):
    pass


def bundled_dataset(name: str = "karate") -> Path:
    return Path(__file__).parent / "data" / f"{name}.edges"


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# -- experiment kinds ----------------------------------------------------------


def _spec(d) -> KnowledgeSpec:
    return KnowledgeSpec.from_dict(d) if d else KnowledgeSpec()


def run_analytic_sweep(exp: dict, seed: int, out: Path) -> dict:
    spec = _spec(exp.get("spec"))
    axis = exp.get("axis", "n_Q")
    values = grid(exp.get("from", 2), exp.get("to", 200), exp.get("step", 1))
    beta = exp.get("beta")
    p = None if beta is not None else exp.get("p", DEFAULTS["p"])
    curve = sweep(
        spec, axis, values, exp.get("n", DEFAULTS["n"]), p=p, beta=beta,
        n_Q=exp.get("n_Q", DEFAULTS["n_Q"]), p_q=exp.get("p_q", DEFAULTS["p_q"]), m_Q=exp.get("m_Q"),
    )
    path = out / f"{exp['name']}.csv"
    tmp = path.with_suffix(".csv.part")
    write_curve_csv(curve, tmp)
    os.replace(tmp, path)
    crit = find_critical_points(curve).to_dict() if len(curve.points) >= 3 else {"valley": None, "vanish": None}
    return {"curve": path.name, "critical_points": crit, "points": len(curve.points), "failures": []}


def default_validation_modes(exp: dict) -> list[tuple[str, KnowledgeSpec]]:
    if "modes" in exp:
        return [(json.dumps(m, sort_keys=True), KnowledgeSpec.from_dict(m)) for m in exp["modes"]]
    schema = AttributeSchema(
        (
            Attribute("a0", np.array([0.5, 0.3, 0.2]), similarity=np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1.0]])),
            Attribute("a1", np.array([0.6, 0.4]), similarity=np.eye(2)),
        )
    )
    edge_modes = [ExactPartial(), ExactComplete(), NoisyPartial(1), NoisyPartial(2), NoisyComplete(1), NoisyComplete(2)]
    modes = [(f"{e.name}{'(eps=%d)' % e.epsilon if hasattr(e, 'epsilon') else ''}", KnowledgeSpec(e)) for e in edge_modes]
    for a in (AttrExact(), AlmostNodes(1), AlmostAttrs(1), AttrApproximate()):
        label = f"exact_partial+{a.name}{'(eps=%d)' % a.epsilon if hasattr(a, 'epsilon') else ''}"
        modes.append((label, KnowledgeSpec(ExactPartial(), a, schema)))
    return modes


def validation_table(n: int, p: float, q: Query, modes, trials: int, seed: int):
    rows = []
    for i, (label, sem) in enumerate(modes):
        mc = monte_carlo_expected_matches(GnpParams(n, p, seed), q, sem, trials, seed=derive_seed(seed, i))
        analytic = match_count(sem, n, q.n, q.m, p).value
        lo, hi = mc.ci
        rows.append((label, analytic, mc.mean, mc.stderr, lo, hi, mc.covers(analytic)))
    return rows


def run_empirical_validate(exp: dict, seed: int, out: Path) -> dict:
    n, p = exp.get("n", 8), exp.get("p", 0.5)
    n_Q = exp.get("n_Q", 3)
    edges = exp.get("query_edges") or [(i, i + 1) for i in range(n_Q - 1)]
    q = Query(n_Q, edges)
    rows = validation_table(n, p, q, default_validation_modes(exp), exp.get("trials", 20_000), seed)
    path = out / f"{exp['name']}.csv"
    _atomic_write(path, _csv_text(["mode", "analytic", "mc_mean", "mc_stderr", "ci99_low", "ci99_high", "pass"], rows))
    failures = [r[0] for r in rows if not r[-1]]
    return {"table": path.name, "modes": len(rows), "failures": failures}


def _graph_from(exp: dict, seed: int) -> Graph:
    src = exp.get("graph", {"model": "chung_lu"})
    model = src.get("model")
    if model == "chung_lu":
        return generate_chung_lu(PowerLawParams(src.get("n", 10_000), src.get("beta", 2.5), src.get("seed", seed)))
    if model == "gnp":
        return generate_gnp(GnpParams(src["n"], src["p"], src.get("seed", seed)))
    if model == "edges":
        path = src.get("path") or str(bundled_dataset(src.get("dataset", "karate")))
        return ingest(path)
    raise ConfigError(f"unknown graph model {model!r}")


def _ln_count(count: int) -> LogScalar:
    return LogScalar(math.log(count)) if count else LogScalar.zero()


def star_curve_rows(g: Graph):
    rows = []
    d_max = int(g.degrees().max()) if g.n else 0
    for d_c in range(1, d_max + 2):
        n_Q = d_c + 1
        if n_Q > g.n:
            break
        mq = star_match_count(g, d_c)
        value = dag(g.n, n_Q, _ln_count(mq))
        rows.append((n_Q, d_c, mq, value.value, value.status))
    return rows, d_max


def run_star_curve(exp: dict, seed: int, out: Path) -> dict:
    g = _graph_from(exp, seed)
    rows, d_max = star_curve_rows(g)
    path = out / f"{exp['name']}.csv"
    _atomic_write(path, _csv_text(["n_Q", "leaves", "M_Q", "DAG", "status"], rows))
    within = [r for r in rows if r[0] <= d_max]
    monotone = all(b[3] <= a[3] for a, b in zip(within, within[1:]))
    failures = [] if monotone else ["star DAG not nonincreasing in n_Q up to the max degree"]
    return {"curve": path.name, "n": g.n, "m": g.m, "max_degree": d_max, "monotone": monotone, "failures": failures}


def real_data_rows(g: Graph, max_n_Q: int, budget: int, centers=None):
    rows = []
    for c in centers if centers is not None else range(g.n):
        d = g.degree(c)
        if d < 1 or d + 1 > max_n_Q:
            continue
        q = ego_subgraph(g, c)
        star = is_star(q)
        status = "ok"
        try:
            mq = star_match_count(g, d) if star else count_matches(g, q, budget=budget, collect_communities=False).match_count
            dag_v = dag(g.n, q.n, _ln_count(mq)).value
        except BudgetExceeded:
            mq, dag_v, status = None, math.nan, "budget_exceeded"
        rows.append((int(c), q.n, q.m, int(star), mq, dag_v, status))
    return rows


def run_real_data_curve(exp: dict, seed: int, out: Path) -> dict:
    g = _graph_from({"graph": exp.get("graph", {"model": "edges"})}, seed)
    rows = real_data_rows(g, exp.get("max_n_Q", 12), exp.get("budget", 2_000_000))
    path = out / f"{exp['name']}.csv"
    _atomic_write(path, _csv_text(["center", "n_Q", "m_Q", "star", "M_Q", "DAG", "status"], rows))
    by_nq = {}
    for r in rows:
        if r[-1] == "ok":
            by_nq.setdefault(r[1], []).append(r[5])
    agg = [(k, len(v), float(np.mean(v))) for k, v in sorted(by_nq.items())]
    agg_path = out / f"{exp['name']}_by_nq.csv"
    _atomic_write(agg_path, _csv_text(["n_Q", "queries", "mean_DAG"], agg))
    return {
        "curve": path.name,
        "aggregate": agg_path.name,
        "n": g.n,
        "m": g.m,
        "queries": len(rows),
        "star_fraction": (sum(r[3] for r in rows) / len(rows)) if rows else None,
        "failures": [],
    }


def tree_shapes(n_Q: int = 4, count: int = 10) -> list[Query]:
    """Labelled trees on ``n_Q`` nodes via Pruefer sequences, first ``count``."""
    import itertools

    shapes = []
    for seq in itertools.product(range(n_Q), repeat=n_Q - 2):
        degree = [1] * n_Q
        for x in seq:
            degree[x] += 1
        edges = []
        for x in seq:
            leaf = min(i for i in range(n_Q) if degree[i] == 1)
            edges.append((leaf, x))
            degree[leaf] -= 1
            degree[x] -= 1
        u, v = [i for i in range(n_Q) if degree[i] == 1]
        edges.append((u, v))
        shapes.append(Query(n_Q, edges))
        if len(shapes) == count:
            break
    return shapes


def powerlaw_bound_rows(n: int, betas, n_Q: int, shapes: int, trials: int, seed: int):
    rows = []
    queries = tree_shapes(n_Q, shapes)
    for bi, beta in enumerate(betas):
        graphs = [generate_chung_lu(PowerLawParams(n, beta, derive_seed(seed, bi, t))) for t in range(trials)]
        bound = powerlaw_match_lower_bound(n, beta, n_Q, n_Q - 1)[0].value
        for si, q in enumerate(queries):
            counts = [count_matches(g, q, collect_communities=False).match_count for g in graphs]
            est = summarize(np.array(counts, dtype=float))
            ok = est.mean >= bound - 3 * est.stderr
            rows.append((beta, si, json.dumps(sorted(q.edges)), bound, est.mean, est.stderr, ok))
    return rows


def run_powerlaw_bound_check(exp: dict, seed: int, out: Path) -> dict:
    rows = powerlaw_bound_rows(
        exp.get("n", 200), exp.get("betas", [2.3, 2.5, 2.9]), exp.get("n_Q", 4),
        exp.get("shapes", 10), exp.get("trials", 100), seed,
    )
    path = out / f"{exp['name']}.csv"
    _atomic_write(path, _csv_text(["beta", "shape", "edges", "bound", "mc_mean", "mc_stderr", "pass"], rows))
    failures = [f"beta={r[0]} shape={r[1]}" for r in rows if not r[-1]]
    return {"table": path.name, "checks": len(rows), "failures": failures}


KINDS: dict[str, Callable[[dict, int, Path], dict]] = {
    "analytic_sweep": run_analytic_sweep,
    "empirical_validate": run_empirical_validate,
    "star_curve": run_star_curve,
    "real_data_curve": run_real_data_curve,
    "powerlaw_bound_check": run_powerlaw_bound_check,
}


def _normalize(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "experiments" not in cfg:
        if "kind" not in cfg:
            raise ConfigError("config needs 'experiments' or a single 'kind'")
        cfg = {"seed": cfg.get("seed", 0), "out_dir": cfg.get("out_dir"), "experiments": [cfg]}
    names = set()
    for i, exp in enumerate(cfg["experiments"]):
        kind = exp.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"experiment {i}: unknown kind {kind!r}; expected one of {sorted(KINDS)}")
        exp.setdefault("name", f"{i:02d}_{kind}")
        if exp["name"] in names:
            raise ConfigError(f"duplicate experiment name {exp['name']!r}")
        names.add(exp["name"])
    return cfg


def _run_one(args):
    exp, seed, out = args
    try:
        return exp["name"], KINDS[exp["kind"]](exp, seed, Path(out))
    except (ValueError, RuntimeError) as exc:
        log.exception("experiment %s failed", exp["name"])
        return exp["name"], {"error": f"{type(exc).__name__}: {exc}", "failures": ["error"]}


def run(config: dict, out_dir=None, jobs: int = 1) -> dict:
    """Run every experiment of ``config``; returns the manifest."""
    cfg = _normalize(json.loads(json.dumps(config)))
    out = Path(out_dir or cfg.get("out_dir") or os.environ.get(OUT_DIR_ENV) or "deanon_gain_out")
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    tasks = [(exp, derive_seed(seed, i), str(out)) for i, exp in enumerate(cfg["experiments"])]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = dict(ex.map(_run_one, tasks))
    else:
        results = dict(map(_run_one, tasks))
    outputs = {}
    for exp in cfg["experiments"]:
        summ = results[exp["name"]]
        _atomic_write(out / f"{exp['name']}.json", _json_text(summ))
    for f in sorted(out.iterdir()):
        if f.is_file() and f.name != "manifest.json" and not f.name.startswith("."):
            outputs[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    manifest = {
        "tool": "deanon-gain",
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "seed": seed,
        "experiments": {
            e["name"]: {"kind": e["kind"], "failures": results[e["name"]].get("failures", [])} for e in cfg["experiments"]
        },
        "outputs": outputs,
    }
    _atomic_write(out / "manifest.json", _json_text(manifest))
    manifest["ok"] = all(not v["failures"] for v in manifest["experiments"].values())
    return manifest


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
