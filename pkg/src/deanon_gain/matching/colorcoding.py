"""Color-coding estimate of non-induced tree match counts.

Each iteration colors the graph with ``k = n_Q`` colors uniformly at random and
counts, by dynamic programming over the rooted tree, the matches whose image
uses every color once. A fixed match is colorful with probability
``k! / k**k``, so scaling the colorful count by the inverse gives an unbiased
estimate of the ordered match count.

Colorings are processed in batches: DP tables are ``(n, batch, C(k, s))``
arrays indexed by the color sets of size ``s`` = subtree size, neighbour
aggregation is one sparse product per tree edge.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..graph import Graph, Query
from ..rng import stream


@dataclass(frozen=True)
class ColorCodingEstimate:
    estimate: float
    stderr: float
    iterations: int


def colorful_probability(k: int) -> float:
    return math.factorial(k) / k**k


def required_iterations(k: int, rel_error: float = 0.1, delta: float = 0.1) -> int:
    """Colorings needed for relative error ``rel_error`` with probability
    ``1 - 2 delta``: ``k**k / (rel_error**2 * delta * k!)``."""
    return math.ceil(1.0 / (rel_error**2 * delta * colorful_probability(k)))


def is_tree(q: Graph) -> bool:
    return q.n >= 1 and q.m == q.n - 1 and q.is_connected()


class _SetIndex:
    """Color subsets of each size, as bitmasks with positions."""

    def __init__(self, k: int):
        self.k = k
        self.by_size = {s: [sum(1 << c for c in cs) for cs in itertools.combinations(range(k), s)] for s in range(k + 1)}
        self.pos = {s: {mask: i for i, mask in enumerate(ms)} for s, ms in self.by_size.items()}
        self._plans = {}

    def plan(self, a: int, b: int):
        """Gather indices combining a size-``a`` set with a disjoint size-``b``
        set, plus the 0/1 matrix summing products into size ``a+b`` targets."""
        key = (a, b)
        if key not in self._plans:
            i1, i2, tgt = [], [], []
            for x, s1 in enumerate(self.by_size[a]):
                for y, s2 in enumerate(self.by_size[b]):
                    if s1 & s2 == 0:
                        i1.append(x)
                        i2.append(y)
                        tgt.append(self.pos[a + b][s1 | s2])
            m = np.zeros((len(tgt), len(self.by_size[a + b])))
            m[np.arange(len(tgt)), tgt] = 1.0
            self._plans[key] = (np.array(i1), np.array(i2), m)
        return self._plans[key]


def _rooted_children(q: Graph, root: int = 0):
    children = {v: [] for v in range(q.n)}
    order = [root]
    seen = {root}
    for v in order:
        for u in sorted(q.neighbors(v)):
            if u not in seen:
                seen.add(u)
                children[v].append(u)
                order.append(u)
    return children


def colorful_counts(g: Graph, q: Query, colors: np.ndarray) -> np.ndarray:
    """Number of colorful ordered matches of tree ``q`` for each coloring row."""
    k = q.n
    colors = np.atleast_2d(colors)
    B = colors.shape[0]
    n = g.n
    if k == 1:
        return np.full(B, float(n))
    idx = _SetIndex(k)
    e = np.array(sorted(g.edges), dtype=np.int64).reshape(-1, 2)
    adj = sparse.csr_matrix(
        (np.ones(2 * len(e)), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(n, n),
    )
    # leaf tables: position of singleton {c} among size-1 sets is c
    leaf = np.zeros((n, B, k))
    leaf[np.arange(n)[:, None], np.arange(B)[None, :], colors.T] = 1.0
    children = _rooted_children(q)

    def table(t):
        cur, size = leaf, 1
        for c in children[t]:
            child, csize = table(c)
            width = child.shape[2]
            nb = (adj @ child.reshape(n, B * width)).reshape(n, B, width)
            i1, i2, m = idx.plan(size, csize)
            cur = (cur[:, :, i1] * nb[:, :, i2]) @ m
            size += csize
        return cur, size

    root, size = table(0)
    assert size == k
    return root.sum(axis=(0, 2))


def color_coding_count(
    g: Graph,
    q: Query,
    iterations: int | None = None,
    seed: int = 0,
    batch: int = 256,
    rel_error: float = 0.1,
    delta: float = 0.1,
) -> ColorCodingEstimate:
    """Unbiased estimate of the ordered exact-partial match count of a tree
    query. ``iterations`` defaults to :func:`required_iterations`."""
    if not is_tree(q):
        raise ValueError("color coding handles tree queries only; use count_matches for general queries")
    k = q.n
    if iterations is None:
        iterations = required_iterations(k, rel_error, delta)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    scale = 1.0 / colorful_probability(k)
    rng = stream(seed)
    vals = []
    done = 0
    while done < iterations:
        b = min(batch, iterations - done)
        colors = rng.integers(0, k, size=(b, g.n))
        vals.append(colorful_counts(g, q, colors) * scale)
        done += b
    v = np.concatenate(vals)
    se = float(v.std(ddof=1) / math.sqrt(iterations)) if iterations > 1 else float("nan")
    return ColorCodingEstimate(float(v.mean()), se, iterations)
