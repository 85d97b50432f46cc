"""Seeded random graphs: G(n, p) and Chung-Lu graphs with power-law degrees.

Pair decisions for row ``u`` (pairs ``(u, v)``, ``v > u``) come from the
stream ``(seed, u)``, so the output is the same however rows are split among
workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .rng import stream

log = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-3


@dataclass(frozen=True)
class GnpParams:
    n: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")


@dataclass(frozen=True)
class PowerLawParams:
    n: int
    beta: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.beta <= 2:
            raise ValueError("beta must exceed 2")

    @property
    def alpha(self) -> float:
        return self.n * (self.beta - 1.0)


class ChungLuAssumptionError(ValueError):
    pass


def _rows(n: int, jobs: int, fn):
    if jobs <= 1:
        return [fn(u) for u in range(n)]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, range(n)))


def _assemble(n: int, rows) -> list[tuple[int, int]]:
    edges = []
    for u, vs in enumerate(rows):
        edges.extend((u, int(v)) for v in vs)
    return edges


def generate_gnp(params: GnpParams, jobs: int = 1) -> Graph:
    n, p, seed = params.n, params.p, params.seed

    def row(u):
        if u == n - 1:
            return np.empty(0, dtype=np.int64)
        draws = stream(seed, u).random(n - u - 1)
        return np.nonzero(draws < p)[0] + u + 1

    edges = _assemble(n, _rows(n, jobs, row))
    return Graph(n, edges, meta={"model": "gnp", "n": n, "p": p, "seed": seed})


def sample_gnp_adjacency(n: int, p: float, trials: int, rng: np.random.Generator) -> np.ndarray:
    """A batch of G(n, p) adjacency matrices, shape ``(trials, n, n)``."""
    iu = np.triu_indices(n, 1)
    upper = rng.random((trials, len(iu[0]))) < p
    adj = np.zeros((trials, n, n), dtype=bool)
    adj[:, iu[0], iu[1]] = upper
    adj |= adj.transpose(0, 2, 1)
    return adj


def powerlaw_degree_counts(n: int, beta: float) -> dict[int, int]:
    """Node count per degree from ``alpha * d**-beta`` with ``alpha = n (beta - 1)``.

    Counts are rounded to the nearest integer for ``d = 1 .. floor(alpha**(1/beta))``
    (the last degree whose unrounded count reaches one); the ``d = 1`` bucket
    absorbs the difference to ``n``.
    """
    if beta <= 2:
        raise ValueError("beta must exceed 2")
    alpha = n * (beta - 1.0)
    d_max = max(1, math.floor(alpha ** (1.0 / beta) + 1e-12))
    counts = {d: int(round(alpha * d ** (-beta))) for d in range(1, d_max + 1)}
    rest = sum(c for d, c in counts.items() if d > 1)
    if rest > n:
        raise ChungLuAssumptionError(f"degree buckets above 1 already hold {rest} > n={n} nodes")
    counts[1] = n - rest
    return {d: c for d, c in counts.items() if c > 0}


def powerlaw_degree_sequence(n: int, beta: float) -> np.ndarray:
    """Expected degrees, nonincreasing, one per node."""
    counts = powerlaw_degree_counts(n, beta)
    seq = np.concatenate([np.full(c, d, dtype=np.int64) for d, c in sorted(counts.items(), reverse=True)])
    return seq


@dataclass
class ChungLuInfo:
    degrees: np.ndarray
    degree_sum: int
    clamped_pairs: int
    total_pairs: int
    meta: dict = field(default_factory=dict)


def chung_lu_from_degrees(degrees: np.ndarray, seed: int, jobs: int = 1) -> tuple[Graph, ChungLuInfo]:
    """Connect ``u, v`` independently with probability ``min(1, d_u d_v / sum d)``."""
    w = np.asarray(degrees, dtype=float)
    n = w.size
    s = float(w.sum())
    if s <= 0:
        raise ValueError("degree sum must be positive")
    if w.max() ** 2 > s:
        raise ChungLuAssumptionError(f"max degree squared {w.max() ** 2:g} exceeds degree sum {s:g}")

    def row(u):
        if u == n - 1:
            return np.empty(0, dtype=np.int64), 0
        prob = w[u] * w[u + 1 :] / s
        clamped = int(np.count_nonzero(prob > 1.0))
        draws = stream(seed, u).random(n - u - 1)
        return np.nonzero(draws < prob)[0] + u + 1, clamped

    out = _rows(n, jobs, row)
    clamped = sum(c for _, c in out)
    total = n * (n - 1) // 2
    if total and clamped > CLAMP_TOLERANCE * total:
        raise ChungLuAssumptionError(f"{clamped} of {total} pair probabilities exceed 1")
    if clamped:
        log.warning("clamped %d pair probabilities at 1", clamped)
    edges = _assemble(n, [vs for vs, _ in out])
    info = ChungLuInfo(np.asarray(degrees), int(round(s)), clamped, total)
    g = Graph(n, edges, meta={"model": "chung_lu", "degree_sum": int(round(s)), "clamped_pairs": clamped, "seed": seed})
    return g, info


def generate_chung_lu(params: PowerLawParams, jobs: int = 1, with_info: bool = False):
    degrees = powerlaw_degree_sequence(params.n, params.beta)
    g, info = chung_lu_from_degrees(degrees, params.seed, jobs)
    g.meta.update(
        {
            "beta": params.beta,
            "alpha": params.alpha,
            "n": params.n,
            "discretization": "round alpha*d^-beta, d<=floor(alpha^(1/beta)), d=1 bucket absorbs remainder",
        }
    )
    info.meta = dict(g.meta)
    return (g, info) if with_info else g


def ingest(path, attributes_path=None) -> Graph:
    """Load a real edge list; dedup/self-loop counts are logged and kept in ``meta``."""
    from .graph import load_edge_list

    g = load_edge_list(path, attributes_path)
    log.info(
        "ingested %s: n=%d m=%d (dropped %d self-loops, %d duplicates)",
        path, g.n, g.m, g.meta["self_loops_removed"], g.meta["duplicates_removed"],
    )
    return g
