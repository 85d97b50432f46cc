"""Vectorized exhaustive matching over every candidate of a small graph.

All ``n!/(n-n_Q)!`` ordered candidates are materialized once; the edge pattern
of each candidate is read off the adjacency matrix and the semantics applied
with array operations. Exact, and fast for many tiny graphs at once, which is
what Monte-Carlo validation needs.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from ..graph import Graph, Query, node_pairs
from ..knowledge import (
    AlmostAttrs,
    AlmostNodes,
    AttrApproximate,
    AttrExact,
    AttrIgnored,
    AttrProbabilistic,
    ExactComplete,
    ExactPartial,
    KnowledgeSpec,
    NoisyComplete,
    NoisyPartial,
    ProbGeneral,
    ProbThreeLevel,
    ProbUniform,
    three_level_confidences,
)
from .backtrack import BudgetExceeded

DEFAULT_CANDIDATE_LIMIT = 5_000_000


@lru_cache(maxsize=16)
def candidate_table(n: int, n_Q: int) -> np.ndarray:
    """Every ordered injection ``{0..n_Q-1} -> {0..n-1}`` as rows."""
    if n_Q > n:
        return np.zeros((0, n_Q), dtype=np.int64)
    t = np.array(list(itertools.permutations(range(n), n_Q)), dtype=np.int64).reshape(-1, n_Q)
    t.flags.writeable = False
    return t


def _check_size(n: int, n_Q: int, limit: int | None) -> None:
    total = math.perm(n, n_Q)
    if limit is not None and total > limit:
        raise BudgetExceeded(limit, total)


def candidate_edges(adj: np.ndarray, table: np.ndarray, n_Q: int) -> np.ndarray:
    """``(..., F, m0)`` booleans: is the image of query pair ``k`` an edge."""
    pairs = node_pairs(n_Q)
    if not pairs:
        return np.zeros(adj.shape[:-2] + (table.shape[0], 0), dtype=bool)
    a = np.array([i for i, _ in pairs])
    b = np.array([j for _, j in pairs])
    return adj[..., table[:, a], table[:, b]]


def _edge_ok(E: np.ndarray, qmask: np.ndarray, sem: KnowledgeSpec) -> np.ndarray:
    mode = sem.edge
    missing = (~E & qmask).sum(axis=-1)
    if isinstance(mode, ExactPartial):
        return missing == 0
    extra = (E & ~qmask).sum(axis=-1)
    if isinstance(mode, ExactComplete):
        return (missing == 0) & (extra == 0)
    if isinstance(mode, NoisyPartial):
        return missing <= mode.epsilon
    if isinstance(mode, NoisyComplete):
        return (missing <= mode.epsilon) & (extra <= mode.epsilon)
    raise ValueError(f"deterministic edge mode required, got {mode.name!r}")


def _attr_weight(g_attr, q_attr, table, sem: KnowledgeSpec, schema, beliefs=None):
    """``(..., F)`` attribute weight of each candidate; ``g_attr`` is
    ``(..., n, n_A)``, ``q_attr`` is ``(..., n_Q, n_A)``."""
    mode = sem.attribute
    if isinstance(mode, AttrIgnored):
        return None
    img = g_attr[..., table, :]  # (..., F, n_Q, n_A)
    if isinstance(mode, AttrProbabilistic):
        n_Q = table.shape[1]
        w = np.ones(img.shape[:-1])
        for i in range(n_Q):
            for j, attr in enumerate(schema):
                belief = attr.probs if beliefs is None else beliefs[i][j]
                sim = np.eye(attr.size) if attr.similarity is None else attr.similarity
                w[..., i] *= (belief @ sim)[img[..., i, j]]
        return w.prod(axis=-1)
    qa = q_attr[..., None, :, :]
    if isinstance(mode, AttrApproximate):
        w = np.ones(img.shape[:-1])
        for j, attr in enumerate(schema):
            w *= attr.similarity[np.broadcast_to(qa[..., j], img.shape[:-1]), img[..., j]]
        return w.prod(axis=-1)
    diff = img != qa
    if isinstance(mode, AttrExact):
        return (~diff.any(axis=-1)).all(axis=-1).astype(float)
    if isinstance(mode, AlmostAttrs):
        return (diff.sum(axis=-1) <= mode.epsilon).all(axis=-1).astype(float)
    if isinstance(mode, AlmostNodes):
        return (diff.any(axis=-1).sum(axis=-1) <= mode.epsilon).astype(float)
    raise ValueError(f"unsupported attribute mode {mode!r}")


def count_dense(
    adj: np.ndarray,
    q: Query,
    sem: KnowledgeSpec = KnowledgeSpec(),
    g_attr: np.ndarray | None = None,
    q_attr: np.ndarray | None = None,
    limit: int | None = DEFAULT_CANDIDATE_LIMIT,
) -> np.ndarray:
    """Match counts for one adjacency matrix or a batch ``(B, n, n)``.

    ``g_attr``/``q_attr`` carry node attributes with matching leading batch
    dimensions; they default to the attributes stored on ``q``.
    """
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[-1]
    _check_size(n, q.n, limit)
    table = candidate_table(n, q.n)
    E = candidate_edges(adj, table, q.n)
    qmask = np.array([q.has_edge(i, j) for i, j in node_pairs(q.n)], dtype=bool)
    ok = _edge_ok(E, qmask, sem)
    schema = sem.schema
    if q_attr is None and q.attributes is not None:
        q_attr = q.attributes
    if isinstance(sem.attribute, AttrIgnored):
        return ok.sum(axis=-1)
    beliefs = getattr(sem.attribute, "beliefs", None) or q.beliefs
    w = _attr_weight(g_attr, q_attr, table, sem, schema, beliefs)
    return (ok * w).sum(axis=-1)


def pair_confidences(q: Query, sem: KnowledgeSpec | None = None) -> tuple[np.ndarray, bool]:
    """Confidence per query pair (NaN = unchecked) and whether matching is complete."""
    mode = None if sem is None else sem.edge
    m0 = q.n * (q.n - 1) // 2
    if isinstance(mode, ProbUniform):
        return np.full(m0, mode.p_e), mode.complete
    if isinstance(mode, ProbThreeLevel):
        if q.edge_confidence is not None:
            return q.confidence_vector(), True
        return np.array(three_level_confidences(q.n, mode)), True
    if isinstance(mode, ProbGeneral):
        conf = np.asarray(mode.confidences, dtype=float)
        if conf.size != m0:
            raise ValueError(f"{conf.size} confidences for {m0} pairs")
        return conf, mode.complete
    if mode is None:
        return q.confidence_vector(), False
    raise ValueError(f"probabilistic edge mode required, got {mode.name!r}")


def candidate_probabilities(E: np.ndarray, conf: np.ndarray, complete: bool) -> np.ndarray:
    """Per-candidate match chance given its edge pattern ``E`` (``(..., F, m0)``).

    Partial: every configuration edge must exist, so each non-edge of the
    candidate contributes ``1 - c``. Complete: the configuration must equal
    the candidate, contributing ``c`` per edge and ``1 - c`` per non-edge.
    """
    keep = ~np.isnan(conf)
    E = E[..., keep]
    c = conf[keep]
    if complete:
        f = np.where(E, c, 1.0 - c)
    else:
        f = np.where(E, 1.0, 1.0 - c)
    return f.prod(axis=-1)


def expected_matches_dense(
    adj: np.ndarray,
    q: Query,
    sem: KnowledgeSpec | None = None,
    g_attr: np.ndarray | None = None,
    limit: int | None = DEFAULT_CANDIDATE_LIMIT,
) -> np.ndarray:
    """Graph-conditional expected match count for probabilistic knowledge, for
    one adjacency matrix or a batch."""
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[-1]
    _check_size(n, q.n, limit)
    table = candidate_table(n, q.n)
    conf, complete = pair_confidences(q, sem)
    prob = candidate_probabilities(candidate_edges(adj, table, q.n), conf, complete)
    if sem is not None and not isinstance(sem.attribute, AttrIgnored):
        beliefs = getattr(sem.attribute, "beliefs", None) or q.beliefs
        w = _attr_weight(g_attr, q.attributes, table, sem, sem.schema, beliefs)
        prob = prob * w
    return prob.sum(axis=-1)


def expected_matches_given_graph(g: Graph, q: Query, sem: KnowledgeSpec | None = None, limit: int | None = DEFAULT_CANDIDATE_LIMIT) -> float:
    """Sum over every ordered candidate of ``g`` of its chance to match ``q``.

    ``sem`` selects the confidence source and completeness (uniform,
    three-level or general); without it the query's own confidences are used
    with partial matching. Raises :class:`BudgetExceeded` when the candidate
    count exceeds ``limit``.
    """
    g_attr = g.attributes
    if sem is not None and sem.schema is None and g.schema is not None:
        sem = KnowledgeSpec(sem.edge, sem.attribute, g.schema, sem.p_A)
    return float(expected_matches_dense(g.adjacency_matrix(), q, sem, g_attr, limit))
