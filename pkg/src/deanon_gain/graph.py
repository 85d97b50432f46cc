"""Immutable undirected simple graphs, query graphs and attribute schemas.

Nodes are dense integers ``0..n-1``. Attribute values are stored as domain
indices, one column per attribute of the schema.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

_NORM_TOL = 1e-12


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def node_pairs(k: int) -> list[tuple[int, int]]:
    """All unordered node pairs of a ``k``-node graph in lexicographic order."""
    return list(itertools.combinations(range(k), 2))


@dataclass(frozen=True)
class Attribute:
    """One categorical attribute: a marginal over its domain and an optional
    similarity kernel ``sim[a, b]`` giving the chance that ``a`` and ``b`` are
    accepted as the same value."""

    name: str
    probs: np.ndarray
    similarity: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError(f"attribute {self.name!r}: marginal must be a nonempty vector")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > _NORM_TOL:
            raise ValueError(f"attribute {self.name!r}: marginal must be nonnegative and sum to 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        if self.similarity is not None:
            sim = np.asarray(self.similarity, dtype=float)
            k = probs.size
            if sim.shape != (k, k):
                raise ValueError(f"attribute {self.name!r}: similarity must be {k}x{k}")
            if np.any(sim < 0) or np.any(sim > 1):
                raise ValueError(f"attribute {self.name!r}: similarity values must lie in [0, 1]")
            if not np.allclose(np.diag(sim), 1.0) or not np.allclose(sim, sim.T):
                raise ValueError(f"attribute {self.name!r}: similarity must be symmetric with unit diagonal")
            sim.flags.writeable = False
            object.__setattr__(self, "similarity", sim)
        if self.labels is not None and len(self.labels) != probs.size:
            raise ValueError(f"attribute {self.name!r}: {len(self.labels)} labels for {probs.size} values")

    @property
    def size(self) -> int:
        return int(self.probs.size)

    def to_dict(self) -> dict:
        d = {"name": self.name, "probs": self.probs.tolist()}
        if self.similarity is not None:
            d["similarity"] = self.similarity.tolist()
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Attribute":
        labels = d.get("labels")
        return cls(
            name=d["name"],
            probs=np.asarray(d["probs"], dtype=float),
            similarity=None if d.get("similarity") is None else np.asarray(d["similarity"], dtype=float),
            labels=None if labels is None else tuple(labels),
        )


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")

    def __len__(self) -> int:
        return len(self.attributes)

    def __iter__(self):
        return iter(self.attributes)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @classmethod
    def uniform(cls, sizes: Sequence[int], names: Sequence[str] | None = None) -> "AttributeSchema":
        names = names or [f"a{i}" for i in range(len(sizes))]
        return cls(tuple(Attribute(nm, np.full(k, 1.0 / k)) for nm, k in zip(names, sizes)))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` attribute rows independently from the marginals."""
        out = np.empty((count, len(self)), dtype=np.int64)
        for j, attr in enumerate(self.attributes):
            out[:, j] = rng.choice(attr.size, size=count, p=attr.probs)
        return out

    def to_dict(self) -> dict:
        return {"attributes": [a.to_dict() for a in self.attributes]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeSchema":
        return cls(tuple(Attribute.from_dict(a) for a in d["attributes"]))


class AttributeBelief:
    """Per-node, per-attribute distributions over the attribute domains."""

    def __init__(self, dists: Sequence[Sequence[Sequence[float]]]):
        rows = []
        for i, node in enumerate(dists):
            row = []
            for j, dist in enumerate(node):
                arr = np.asarray(dist, dtype=float)
                if np.any(arr < 0) or abs(arr.sum() - 1.0) > _NORM_TOL:
                    raise ValueError(f"belief of node {i}, attribute {j} must be a distribution")
                arr.flags.writeable = False
                row.append(arr)
            rows.append(tuple(row))
        self.dists = tuple(rows)

    def __len__(self) -> int:
        return len(self.dists)

    def __getitem__(self, i):
        return self.dists[i]

    def to_list(self) -> list:
        return [[d.tolist() for d in node] for node in self.dists]


class Graph:
    """Undirected simple graph on nodes ``0..n-1``; immutable after construction."""

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]] = (),
        attributes: np.ndarray | None = None,
        schema: AttributeSchema | None = None,
        node_ids: Sequence | None = None,
        meta: Mapping | None = None,
    ):
        n = int(n)
        if n < 0:
            raise ValueError("node count must be nonnegative")
        es = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            es.add(_norm_edge(u, v))
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in es:
            nbrs[u].add(v)
            nbrs[v].add(u)
        self._n = n
        self._edges = frozenset(es)
        self._nbrs = tuple(frozenset(s) for s in nbrs)
        self._adj: np.ndarray | None = None

        if attributes is not None:
            attributes = np.array(attributes, dtype=np.int64)
            if attributes.ndim != 2 or attributes.shape[0] != n:
                raise ValueError("attributes must have one row per node")
            if schema is not None:
                if attributes.shape[1] != len(schema):
                    raise ValueError("attribute columns do not match the schema")
                for j, attr in enumerate(schema):
                    col = attributes[:, j]
                    if col.size and (col.min() < 0 or col.max() >= attr.size):
                        raise ValueError(f"attribute {attr.name!r} has values outside its domain")
            attributes.flags.writeable = False
        self._attrs = attributes
        self._schema = schema
        self._node_ids = None if node_ids is None else tuple(node_ids)
        if self._node_ids is not None and len(self._node_ids) != n:
            raise ValueError("node_ids must have length n")
        self.meta = dict(meta or {})

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return self._edges

    @property
    def attributes(self) -> np.ndarray | None:
        return self._attrs

    @property
    def schema(self) -> AttributeSchema | None:
        return self._schema

    @property
    def node_ids(self) -> tuple | None:
        return self._node_ids

    def __len__(self) -> int:
        return self._n

    def __contains__(self, v) -> bool:
        return isinstance(v, (int, np.integer)) and 0 <= v < self._n

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.n != other.n or self.edges != other.edges:
            return False
        if (self._attrs is None) != (other._attrs is None):
            return False
        return self._attrs is None or np.array_equal(self._attrs, other._attrs)

    __hash__ = None

    def neighbors(self, v: int) -> frozenset[int]:
        return self._nbrs[v]

    def degree(self, v: int) -> int:
        return len(self._nbrs[v])

    def degrees(self) -> np.ndarray:
        return np.fromiter((len(s) for s in self._nbrs), dtype=np.int64, count=self._n)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._nbrs[u]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self._edges)

    def adjacency_matrix(self) -> np.ndarray:
        """Dense boolean adjacency (cached, read-only)."""
        if self._adj is None:
            a = np.zeros((self._n, self._n), dtype=bool)
            if self._edges:
                e = np.array(sorted(self._edges))
                a[e[:, 0], e[:, 1]] = True
                a[e[:, 1], e[:, 0]] = True
            a.flags.writeable = False
            self._adj = a
        return self._adj

    def is_connected(self) -> bool:
        if self._n <= 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in self._nbrs[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self._n

    def with_attributes(self, attributes: np.ndarray, schema: AttributeSchema | None) -> "Graph":
        return Graph(self.n, self.edges, attributes, schema, self.node_ids, self.meta)


class Query(Graph):
    """Background knowledge of the attacker as a small graph.

    ``edge_confidence`` maps every node pair ``(i, j)`` with ``i < j`` to the
    attacker's confidence that the edge exists. ``NaN`` marks a pair the
    attacker knows nothing about; such pairs are not checked. ``beliefs``
    holds probabilistic attribute knowledge, ``attributes`` exact values.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]] = (),
        attributes: np.ndarray | None = None,
        schema: AttributeSchema | None = None,
        edge_confidence: Mapping[tuple[int, int], float] | None = None,
        beliefs: AttributeBelief | None = None,
        node_map: Sequence[int] | None = None,
        provenance: Mapping | None = None,
        require_connected: bool = True,
    ):
        super().__init__(n, edges, attributes, schema)
        if n < 1:
            raise ValueError("a query needs at least one node")
        conf = None
        if edge_confidence is not None:
            conf = {}
            for (i, j), c in edge_confidence.items():
                key = _norm_edge(int(i), int(j))
                c = float(c)
                if not math.isnan(c) and not 0.0 <= c <= 1.0:
                    raise ValueError(f"confidence of pair {key} outside [0, 1]")
                conf[key] = c
            missing = [pr for pr in node_pairs(n) if pr not in conf]
            if missing:
                raise ValueError(f"edge_confidence must cover all {n * (n - 1) // 2} pairs; missing {missing[:3]}")
        elif require_connected and not self.is_connected():
            raise ValueError("query graph must be connected")
        if beliefs is not None and len(beliefs) != n:
            raise ValueError("beliefs must have one entry per query node")
        self.edge_confidence = conf
        self.beliefs = beliefs
        self.node_map = None if node_map is None else tuple(int(v) for v in node_map)
        self.provenance = dict(provenance or {})

    @property
    def m0(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def density(self) -> float:
        return 2.0 * self.m / (self.n * (self.n - 1)) if self.n > 1 else 0.0

    def confidence_vector(self) -> np.ndarray:
        """Confidences in :func:`node_pairs` order."""
        if self.edge_confidence is None:
            raise ValueError("query carries no edge confidences")
        return np.array([self.edge_confidence[pr] for pr in node_pairs(self.n)], dtype=float)

    @classmethod
    def from_graph(cls, g: Graph, **kw) -> "Query":
        return cls(g.n, g.edges, g.attributes, g.schema, **kw)

    @classmethod
    def with_confidences(cls, n: int, conf: Sequence[float] | Mapping, **kw) -> "Query":
        """Build a complete-pair query; edges are the pairs with confidence > 0.5."""
        if not isinstance(conf, Mapping):
            conf = dict(zip(node_pairs(n), conf))
        edges = [pr for pr, c in conf.items() if not math.isnan(c) and c > 0.5]
        return cls(n, edges, edge_confidence=conf, **kw)


# -- basic structural queries -------------------------------------------------

def degree_distribution(g: Graph) -> dict[int, int]:
    """Histogram ``degree -> number of nodes``."""
    return dict(sorted(Counter(int(d) for d in g.degrees()).items()))


def ego_subgraph(g: Graph, center: int) -> Query:
    """The center, its neighbours and every edge among them, relabelled so the
    center becomes node 0 and neighbours follow in increasing order."""
    if center not in g:
        raise ValueError(f"node {center} not in graph")
    members = [center] + sorted(g.neighbors(center))
    index = {v: i for i, v in enumerate(members)}
    edges = []
    for v in members:
        for u in g.neighbors(v):
            if u in index and index[v] < index[u]:
                edges.append((index[v], index[u]))
    attrs = None if g.attributes is None else g.attributes[members]
    return Query(
        len(members),
        edges,
        attributes=attrs,
        schema=g.schema,
        node_map=members,
        provenance={"source": "ego", "center": int(center)},
    )


# -- serialization -----------------------------------------------------------

class EdgeListError(ValueError):
    pass


def _parse_pairs(path: Path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("%"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise EdgeListError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            yield lineno, parts[0], parts[1]


def _read_header_n(path: Path) -> int | None:
    with open(path) as fh:
        for raw in fh:
            if not raw.startswith("#"):
                break
            body = raw[1:].strip()
            if body.startswith("nodes:"):
                return int(body.split(":", 1)[1])
    return None


def load_edge_list(path, attributes_path=None, schema: AttributeSchema | None = None) -> Graph:
    """Read a whitespace-separated edge list.

    Directed duplicates are symmetrized, repeated edges and self-loops dropped;
    their counts land in ``graph.meta``. Integer IDs are relabelled densely in
    increasing order, other IDs in order of first appearance. A ``# nodes: N``
    header (as written by :func:`save_edge_list`) declares isolated nodes.
    """
    path = Path(path)
    raw = list(_parse_pairs(path))
    header_n = _read_header_n(path)
    try:
        pairs = [(lineno, int(a), int(b)) for lineno, a, b in raw]
        numeric = True
    except ValueError:
        pairs = raw
        numeric = False
    if numeric:
        ids = sorted({x for _, a, b in pairs for x in (a, b)})
        if header_n is not None:
            extra = [x for x in ids if not 0 <= x < header_n]
            if extra:
                raise EdgeListError(f"{path}: node ids {extra[:3]} exceed declared node count {header_n}")
            ids = list(range(header_n))
    else:
        ids = list(dict.fromkeys(x for _, a, b in pairs for x in (a, b)))
    index = {x: i for i, x in enumerate(ids)}
    edges = set()
    self_loops = 0
    for _, a, b in pairs:
        u, v = index[a], index[b]
        if u == v:
            self_loops += 1
            continue
        edges.add(_norm_edge(u, v))
    total = len(pairs)
    attrs = None
    if attributes_path is not None:
        attrs, schema = load_attributes(attributes_path, [str(x) for x in ids], schema)
    node_ids = ids
    meta = {
        "source": str(path),
        "lines": total,
        "self_loops_removed": self_loops,
        "duplicates_removed": total - self_loops - len(edges),
    }
    return Graph(len(ids), edges, attrs, schema, node_ids=node_ids, meta=meta)


def save_edge_list(g: Graph, path, attributes_path=None) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# nodes: {g.n}\n# edges: {g.m}\n")
        for u, v in g.sorted_edges():
            fh.write(f"{u} {v}\n")
    if attributes_path is not None:
        if g.attributes is None:
            raise ValueError("graph has no attributes to save")
        save_attributes(g, attributes_path)


def save_attributes(g: Graph, path) -> None:
    names = g.schema.names if g.schema is not None else [f"a{j}" for j in range(g.attributes.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["node"] + names)
        for v in range(g.n):
            w.writerow([v] + [int(x) for x in g.attributes[v]])


def load_attributes(path, node_keys: Sequence[str] | None = None, schema: AttributeSchema | None = None):
    """Read a tab-separated attribute table with a ``node`` column.

    Values are domain indices when ``schema`` is given; otherwise each column's
    distinct values become the domain, with empirical marginals.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows:
        raise EdgeListError(f"{path}: empty attribute file")
    header, body = rows[0], rows[1:]
    if header[0] != "node":
        raise EdgeListError(f"{path}: first column must be 'node'")
    names = header[1:]
    by_node = {}
    for lineno, row in enumerate(body, 2):
        if len(row) != len(header):
            raise EdgeListError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        by_node[row[0]] = row[1:]
    keys = node_keys if node_keys is not None else sorted(by_node, key=int)
    missing = [k for k in keys if k not in by_node]
    if missing:
        raise EdgeListError(f"{path}: no attribute row for nodes {missing[:3]}")
    table = [by_node[k] for k in keys]
    if schema is not None:
        if schema.names != names:
            raise EdgeListError(f"{path}: header {names} does not match schema {schema.names}")
        return np.array(table, dtype=np.int64).reshape(len(keys), len(names)), schema
    cols = []
    attrs = []
    for j, name in enumerate(names):
        values = [r[j] for r in table]
        domain = sorted(set(values))
        pos = {x: i for i, x in enumerate(domain)}
        col = np.array([pos[x] for x in values], dtype=np.int64)
        counts = np.bincount(col, minlength=len(domain)).astype(float)
        cols.append(col)
        attrs.append(Attribute(name, counts / counts.sum(), labels=tuple(domain)))
    return np.stack(cols, axis=1) if cols else np.zeros((len(keys), 0), np.int64), AttributeSchema(tuple(attrs))


@dataclass
class QueryFile:
    """Sidecar JSON content for a query edge list."""

    edge_confidence: dict | None = None
    attributes: list | None = None
    beliefs: list | None = None
    provenance: dict = field(default_factory=dict)


def load_query(path, sidecar=None) -> Query:
    import json

    g = load_edge_list(path)
    conf = beliefs = attrs = None
    provenance = {}
    if sidecar is not None:
        with open(sidecar) as fh:
            side = json.load(fh)
        if side.get("edge_confidence") is not None:
            conf = {}
            for key, c in side["edge_confidence"].items():
                i, j = (int(x) for x in key.split("-"))
                conf[(i, j)] = float("nan") if c is None else c
        if side.get("attributes") is not None:
            attrs = np.array(side["attributes"], dtype=np.int64)
        if side.get("beliefs") is not None:
            beliefs = AttributeBelief(side["beliefs"])
        provenance = side.get("provenance", {})
    n = g.n if conf is None else max(g.n, 1 + max(max(k) for k in conf))
    return Query(n, g.edges, attributes=attrs, edge_confidence=conf, beliefs=beliefs, provenance=provenance)


def save_query(q: Query, path, sidecar=None) -> None:
    import json

    save_edge_list(q, path)
    if sidecar is None:
        return
    side: dict = {"provenance": q.provenance}
    if q.edge_confidence is not None:
        side["edge_confidence"] = {
            f"{i}-{j}": (None if math.isnan(c) else c) for (i, j), c in sorted(q.edge_confidence.items())
        }
    if q.attributes is not None:
        side["attributes"] = q.attributes.tolist()
    if q.beliefs is not None:
        side["beliefs"] = q.beliefs.to_list()
    if q.node_map is not None:
        side["provenance"] = {**q.provenance, "node_map": list(q.node_map)}
    with open(sidecar, "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
