"""Monte-Carlo check of analytic match counts against exact counting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..generators import GnpParams, sample_gnp_adjacency
from ..graph import Graph, Query
from ..knowledge import DETERMINISTIC_EDGE_MODES, AttrIgnored, AttrProbabilistic, KnowledgeSpec
from ..rng import stream
from .backtrack import count_matches
from .dense import count_dense, expected_matches_dense

Z99 = 2.5758293035489004


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    trials: int
    z: float = Z99

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean - self.z * self.stderr, self.mean + self.z * self.stderr

    def covers(self, value: float) -> bool:
        # rounding slack so a zero-variance estimate still covers its own value
        lo, hi = self.ci
        slack = 1e-12 * max(1.0, abs(self.mean))
        return lo - slack <= value <= hi + slack


def summarize(values: np.ndarray, z: float = Z99) -> MCEstimate:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return MCEstimate(float(v.mean()), se, int(v.size), z)


def sample_counts(
    gen: GnpParams,
    q: Query,
    sem: KnowledgeSpec,
    trials: int,
    seed: int | None = None,
    counter: str = "dense",
    batch: int = 2000,
) -> np.ndarray:
    """Per-trial match counts in freshly sampled G(n, p) graphs.

    When attributes matter, graph and query attributes are both drawn from
    the schema marginals in every trial (query attributes stay fixed if the
    query carries them and the mode is probabilistic)."""
    seed = gen.seed if seed is None else seed
    rng = stream(seed, 0)
    attr_rng = stream(seed, 1)
    use_attrs = not isinstance(sem.attribute, AttrIgnored)
    schema = sem.schema
    if use_attrs and schema is None:
        raise ValueError("attribute simulation needs a schema")
    deterministic = isinstance(sem.edge, DETERMINISTIC_EDGE_MODES)
    out = []
    left = trials
    while left:
        b = min(batch, left)
        adj = sample_gnp_adjacency(gen.n, gen.p, b, rng)
        g_attr = q_attr = None
        if use_attrs:
            g_attr = schema.sample(b * gen.n, attr_rng).reshape(b, gen.n, len(schema))
            if not isinstance(sem.attribute, AttrProbabilistic):
                q_attr = schema.sample(b * q.n, attr_rng).reshape(b, q.n, len(schema))
        if counter == "backtrack":
            vals = []
            for t in range(b):
                ga = None if g_attr is None else g_attr[t]
                g = Graph(gen.n, zip(*np.nonzero(np.triu(adj[t]))), ga, schema)
                qq = q if q_attr is None else Query(q.n, q.edges, q_attr[t], schema, require_connected=False)
                vals.append(count_matches(g, qq, sem, collect_communities=False).match_count)
            out.append(np.asarray(vals, dtype=float))
        elif deterministic:
            out.append(np.asarray(count_dense(adj, q, sem, g_attr, q_attr), dtype=float))
        else:
            out.append(np.asarray(expected_matches_dense(adj, q, sem, g_attr), dtype=float))
        left -= b
    return np.concatenate(out)


def monte_carlo_expected_matches(
    gen: GnpParams,
    q: Query,
    sem: KnowledgeSpec = KnowledgeSpec(),
    trials: int = 20_000,
    seed: int | None = None,
    counter: str = "dense",
) -> MCEstimate:
    """Mean exact match count over ``trials`` sampled G(n, p) graphs with its
    99% normal-approximation interval. Probabilistic edge modes average the
    graph-conditional expected count instead."""
    if trials < 30:
        raise ValueError("need at least 30 trials for a normal-approximation interval")
    return summarize(sample_counts(gen, q, sem, trials, seed, counter))
