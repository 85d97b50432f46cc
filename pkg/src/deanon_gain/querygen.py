"""Query graphs the way an experimenter builds them: ego networks of the
published graph or random connected graphs of a given density."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import AttributeSchema, Graph, Query, ego_subgraph, node_pairs
from .knowledge import edges_from_density
from .rng import derive_seed, stream

log = logging.getLogger(__name__)

MAX_RESAMPLES = 1000


class QueryGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EgoRandomCenter:
    seed: int
    min_degree: int = 1


@dataclass(frozen=True)
class EgoGivenCenter:
    center: int


@dataclass(frozen=True)
class SyntheticGnp:
    n_Q: int
    p_q: float
    seed: int


@dataclass(frozen=True)
class QuerySpec:
    source: EgoRandomCenter | EgoGivenCenter | SyntheticGnp
    target_density: float | None = None
    schema: AttributeSchema | None = None
    attribute_seed: int | None = None

    def __post_init__(self):
        if self.target_density is not None and not 0.0 < self.target_density <= 1.0:
            raise ValueError("target density must lie in (0, 1]")


def is_star(q: Graph) -> bool:
    """One node adjacent to every other node and no further edges."""
    if q.n < 2 or q.m != q.n - 1:
        return False
    return any(q.degree(v) == q.n - 1 for v in range(q.n))


def _random_connected(n_Q: int, m_Q: int, rng: np.random.Generator) -> list[tuple[int, int]] | None:
    pairs = node_pairs(n_Q)
    pick = rng.choice(len(pairs), size=m_Q, replace=False)
    edges = [pairs[i] for i in sorted(pick)]
    return edges if Graph(n_Q, edges).is_connected() else None


def synthetic_query(n_Q: int, p_q: float, seed: int) -> Query:
    """Uniformly random connected graph with ``round(p_q m0)`` edges, by rejection."""
    if n_Q < 1:
        raise ValueError("n_Q must be positive")
    m_Q = edges_from_density(n_Q, p_q)
    rng = stream(seed)
    for attempt in range(MAX_RESAMPLES):
        edges = _random_connected(n_Q, m_Q, rng)
        if edges is not None:
            return Query(n_Q, edges, provenance={"source": "synthetic", "n_Q": n_Q, "p_q": p_q, "seed": seed, "attempts": attempt + 1})
    raise QueryGenerationError(f"no connected graph with n_Q={n_Q}, m_Q={m_Q} after {MAX_RESAMPLES} draws")


def adjust_density(q: Query, p_q: float, seed: int) -> Query:
    """Add or remove uniformly random edges until ``m_Q = round(p_q m0)``,
    never disconnecting the query."""
    target = edges_from_density(q.n, p_q)
    if target < q.n - 1 or target > q.m0:
        raise QueryGenerationError(f"target of {target} edges cannot give a connected {q.n}-node query")
    rng = stream(seed)
    edges = set(q.edges)
    rejected = 0
    while len(edges) < target:
        free = [pr for pr in node_pairs(q.n) if pr not in edges]
        edges.add(free[rng.integers(len(free))])
    while len(edges) > target:
        cur = sorted(edges)
        e = cur[rng.integers(len(cur))]
        trial = edges - {e}
        if Graph(q.n, trial).is_connected():
            edges = trial
        else:
            rejected += 1
            if rejected > MAX_RESAMPLES * max(1, len(cur)):
                raise QueryGenerationError("could not remove an edge without disconnecting the query")
    prov = dict(q.provenance)
    prov.update({"density_adjusted_to": p_q, "density_seed": seed, "original_m_Q": q.m})
    log.info("adjusted query density: %d -> %d edges", q.m, len(edges))
    return Query(q.n, edges, q.attributes, q.schema, node_map=q.node_map, provenance=prov)


def generate_query(g: Graph | None, spec: QuerySpec) -> Query:
    src = spec.source
    if isinstance(src, SyntheticGnp):
        q = synthetic_query(src.n_Q, src.p_q, src.seed)
    elif isinstance(src, EgoGivenCenter):
        q = ego_subgraph(g, src.center)
    elif isinstance(src, EgoRandomCenter):
        deg = g.degrees()
        eligible = np.nonzero(deg >= src.min_degree)[0]
        if eligible.size == 0:
            raise QueryGenerationError(f"no node with degree >= {src.min_degree}")
        center = int(eligible[stream(src.seed).integers(eligible.size)])
        q = ego_subgraph(g, center)
        q.provenance["seed"] = src.seed
    else:
        raise TypeError(f"unknown query source {src!r}")
    if spec.target_density is not None:
        q = adjust_density(q, spec.target_density, stream_seed(spec))
    if spec.schema is not None:
        seed = spec.attribute_seed if spec.attribute_seed is not None else 0
        attrs = spec.schema.sample(q.n, stream(seed))
        q = Query(q.n, q.edges, attrs, spec.schema, node_map=q.node_map, provenance=q.provenance)
    return q


def stream_seed(spec: QuerySpec) -> int:
    return getattr(spec.source, "seed", 0)


def star_fraction(g: Graph, samples: int, seed: int, min_degree: int = 1) -> float:
    """Share of star ego networks among ``samples`` random centers."""
    stars = sum(is_star(generate_query(g, QuerySpec(EgoRandomCenter(derive_seed(seed, i), min_degree)))) for i in range(samples))
    return stars / samples
