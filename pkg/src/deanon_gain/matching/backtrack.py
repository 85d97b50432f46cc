"""Exact match counting by pruned backtracking.

A match is an ordered injective mapping of query nodes onto graph nodes that
satisfies the knowledge semantics; automorphic images are distinct matches.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..graph import Graph, Query
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
)


class BudgetExceeded(RuntimeError):
    """Raised when a search expands more partial mappings than allowed."""

    def __init__(self, budget: int, expanded: int):
        super().__init__(f"search budget of {budget} partial mappings exhausted (expanded {expanded})")
        self.budget = budget
        self.expanded = expanded


@dataclass
class MatchResult:
    match_count: int | float
    community_count: int
    mappings: list[tuple[int, ...]] | None = None
    expanded: int = 0
    communities: set[frozenset[int]] | None = field(default=None, repr=False)


def _edge_limits(sem: KnowledgeSpec) -> tuple[int, int | None]:
    """(allowed missing query edges, allowed extra edges or None if unchecked)."""
    mode = sem.edge
    if isinstance(mode, ExactPartial):
        return 0, None
    if isinstance(mode, ExactComplete):
        return 0, 0
    if isinstance(mode, NoisyPartial):
        return mode.epsilon, None
    if isinstance(mode, NoisyComplete):
        return mode.epsilon, mode.epsilon
    raise ValueError(f"count_matches needs a deterministic edge mode, got {mode.name!r}")


def node_weights(g: Graph, q: Query, sem: KnowledgeSpec) -> tuple[np.ndarray | None, np.ndarray | None, int]:
    """Per (query node, graph node) attribute weight and mismatch flags.

    Returns ``(weight, mismatch, node_budget)``: ``weight[i, v]`` in [0, 1]
    multiplies a mapping's count; ``mismatch[i, v]`` marks pairs that use up
    one of the ``node_budget`` tolerated node mismatches.
    """
    mode = sem.attribute
    if isinstance(mode, AttrIgnored):
        return None, None, 0
    schema = sem.schema if sem.schema is not None else g.schema
    if g.attributes is None:
        raise ValueError("attribute matching needs attributes on the graph")
    ga = g.attributes
    if isinstance(mode, AttrProbabilistic):
        if schema is None:
            raise ValueError("probabilistic attributes need a schema")
        beliefs = mode.beliefs if mode.beliefs is not None else q.beliefs
        w = np.ones((q.n, g.n))
        for i in range(q.n):
            for j, attr in enumerate(schema):
                belief = attr.probs if beliefs is None else beliefs[i][j]
                sim = np.eye(attr.size) if attr.similarity is None else attr.similarity
                w[i] *= (belief @ sim)[ga[:, j]]
        return w, None, 0
    if q.attributes is None:
        raise ValueError("attribute matching needs attributes on the query")
    qa = q.attributes
    diff = qa[:, None, :] != ga[None, :, :]
    if isinstance(mode, AttrExact):
        return (~diff.any(axis=2)).astype(float), None, 0
    if isinstance(mode, AlmostAttrs):
        return (diff.sum(axis=2) <= mode.epsilon).astype(float), None, 0
    if isinstance(mode, AlmostNodes):
        return None, diff.any(axis=2), mode.epsilon
    if isinstance(mode, AttrApproximate):
        if schema is None or any(a.similarity is None for a in schema):
            raise ValueError("approximate matching needs similarity kernels")
        w = np.ones((q.n, g.n))
        for j, attr in enumerate(schema):
            w *= attr.similarity[qa[:, j][:, None], ga[:, j][None, :]]
        return w, None, 0
    raise ValueError(f"unsupported attribute mode {mode!r}")


def search_order(q: Graph) -> list[int]:
    """Highest-degree query node first, then the node with most links into the
    already ordered set (ties: higher degree, then lower index)."""
    if q.n == 0:
        return []
    deg = [q.degree(i) for i in range(q.n)]
    first = max(range(q.n), key=lambda i: (deg[i], -i))
    order = [first]
    placed = {first}
    while len(order) < q.n:
        nxt = max(
            (i for i in range(q.n) if i not in placed),
            key=lambda i: (len(q.neighbors(i) & placed), deg[i], -i),
        )
        order.append(nxt)
        placed.add(nxt)
    return order


class _Search:
    def __init__(self, g: Graph, q: Query, sem: KnowledgeSpec, order, budget, collect_communities, keep_mappings, limit):
        if q.n > g.n:
            raise ValueError(f"query has {q.n} nodes, graph only {g.n}")
        self.g = g
        self.q = q
        self.max_miss, self.max_extra = _edge_limits(sem)
        self.weight, self.mismatch, self.node_budget = node_weights(g, q, sem)
        self.order = list(order) if order is not None else search_order(q)
        if sorted(self.order) != list(range(q.n)):
            raise ValueError("order must be a permutation of the query nodes")
        # for each position: earlier positions split into query-adjacent and not
        self.back_adj = []
        self.back_non = []
        for k, i in enumerate(self.order):
            earlier = self.order[:k]
            self.back_adj.append([t for t, j in enumerate(earlier) if q.has_edge(i, j)])
            self.back_non.append([t for t, j in enumerate(earlier) if not q.has_edge(i, j)])
        self.nbrs = [g.neighbors(v) for v in range(g.n)]
        self.budget = budget
        self.expanded = 0
        self.collect = collect_communities
        self.keep = keep_mappings
        self.limit = limit
        self.total = 0.0
        self.integral = self.weight is None or bool(np.all((self.weight == 0) | (self.weight == 1)))
        self.found = 0
        self.communities: set[frozenset[int]] = set()
        self.mappings: list[tuple[int, ...]] = []
        self.images: list[int] = []
        self.used: set[int] = set()

    def roots(self) -> list[int]:
        return list(range(self.g.n))

    def run(self, roots) -> None:
        for v in roots:
            if self._done():
                break
            self._extend(0, v, 0, 0, 0, 1.0)

    def _done(self) -> bool:
        return self.limit is not None and self.found >= self.limit

    def _extend(self, k, v, miss, extra, bad_nodes, w):
        i = self.order[k]
        if self.weight is not None:
            w = w * self.weight[i, v]
            if w == 0.0:
                return
        if self.mismatch is not None and self.mismatch[i, v]:
            bad_nodes += 1
            if bad_nodes > self.node_budget:
                return
        nb = self.nbrs[v]
        images = self.images
        for t in self.back_adj[k]:
            if images[t] not in nb:
                miss += 1
        if miss > self.max_miss:
            return
        if self.max_extra is not None:
            for t in self.back_non[k]:
                if images[t] in nb:
                    extra += 1
            if extra > self.max_extra:
                return
        self.expanded += 1
        if self.budget is not None and self.expanded > self.budget:
            raise BudgetExceeded(self.budget, self.expanded)
        images.append(v)
        self.used.add(v)
        try:
            if k + 1 == len(self.order):
                self._record(w)
                return
            for u in self._candidates(k + 1, miss):
                if self._done():
                    return
                self._extend(k + 1, u, miss, extra, bad_nodes, w)
        finally:
            images.pop()
            self.used.discard(v)

    def _candidates(self, k, miss):
        used = self.used
        back = self.back_adj[k]
        if back and miss == self.max_miss:
            # no slack left: every query neighbour must be matched by an edge
            sets = sorted((self.nbrs[self.images[t]] for t in back), key=len)
            cand = set(sets[0])
            for s in sets[1:]:
                cand &= s
            return sorted(cand - used)
        return [u for u in range(self.g.n) if u not in used]

    def _record(self, w):
        self.total += w
        self.found += 1
        if self.collect:
            self.communities.add(frozenset(self.images))
        if self.keep is not None and len(self.mappings) < self.keep:
            # report in query-node order
            mapping = [0] * len(self.order)
            for t, i in enumerate(self.order):
                mapping[i] = self.images[t]
            self.mappings.append(tuple(mapping))


def _run_partition(args):
    g, q, sem, order, budget, collect, roots = args
    s = _Search(g, q, sem, order, budget, collect, None, None)
    s.run(roots)
    return s.total, s.found, s.communities, s.expanded, s.integral


def count_matches(
    g: Graph,
    q: Query,
    sem: KnowledgeSpec = KnowledgeSpec(),
    *,
    budget: int | None = None,
    collect_communities: bool = True,
    keep_mappings: int | None = None,
    limit: int | None = None,
    order: list[int] | None = None,
    jobs: int = 1,
) -> MatchResult:
    """Count every ordered match of ``q`` in ``g`` under ``sem``.

    ``budget`` caps the number of partial mappings expanded and raises
    :class:`BudgetExceeded` when hit. ``limit`` stops after that many matches
    (the count is then a lower bound). With ``jobs > 1`` the search tree is
    split by the image of the first query node across processes; partial
    counts add up to the same exact total. The budget then applies per worker.
    """
    if jobs > 1 and limit is None and keep_mappings is None:
        roots = list(range(g.n))
        chunks = [roots[i::jobs] for i in range(jobs)]
        args = [(g, q, sem, order, budget, collect_communities, c) for c in chunks if c]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_run_partition, args))
        total = math.fsum(p[0] for p in parts)
        comms = set().union(*(p[2] for p in parts)) if collect_communities else None
        integral = all(p[4] for p in parts)
        return MatchResult(
            int(round(total)) if integral else total,
            len(comms) if comms is not None else 0,
            None,
            sum(p[3] for p in parts),
            comms,
        )
    s = _Search(g, q, sem, order, budget, collect_communities, keep_mappings, limit)
    s.run(s.roots())
    count = int(round(s.total)) if s.integral else s.total
    return MatchResult(
        count,
        len(s.communities),
        s.mappings if keep_mappings is not None else None,
        s.expanded,
        s.communities if collect_communities else None,
    )


def has_match(g: Graph, q: Query, sem: KnowledgeSpec = KnowledgeSpec(), budget: int | None = None) -> bool:
    return count_matches(g, q, sem, budget=budget, collect_communities=False, limit=1).match_count > 0
