"""Analytic match counts for every kind of attacker knowledge.

A candidate is an ordered choice of ``n_Q`` distinct nodes of the published
graph, mapped onto the query nodes. For a G(n, p) graph the expected number of
candidates that match the query is the number of candidates times the chance
that a random candidate matches, split into an edge factor and an attribute
factor. All quantities live in natural-log space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .graph import AttributeBelief, AttributeSchema, Query
from .logspace import NEG_INF, LogScalar, ln_binom, ln_falling, ln_pow, log_sum_exp
from .rng import stream

# -- knowledge description ---------------------------------------------------


@dataclass(frozen=True)
class ExactPartial:
    name = "exact_partial"


@dataclass(frozen=True)
class ExactComplete:
    name = "exact_complete"


@dataclass(frozen=True)
class NoisyPartial:
    epsilon: int
    name = "noisy_partial"


@dataclass(frozen=True)
class NoisyComplete:
    epsilon: int
    name = "noisy_complete"


@dataclass(frozen=True)
class ProbUniform:
    p_e: float
    complete: bool = False
    name = "prob_uniform"


@dataclass(frozen=True)
class ProbThreeLevel:
    """High/low/medium confidence split. Give ``x1``/``x0`` directly, or ``r``
    for an even split ``x1 = x0 = round(r * m0 / 2)``."""

    p1: float = 0.9
    p0: float = 0.1
    x1: int | None = None
    x0: int | None = None
    r: float | None = None
    name = "prob_three_level"

    def counts(self, m0: int) -> tuple[int, int]:
        if self.x1 is not None and self.x0 is not None:
            x1, x0 = self.x1, self.x0
        elif self.r is not None:
            half = round_half_even(Fraction(repr(float(self.r))) * m0 / 2)
            x1 = x0 = half
        else:
            raise ValueError("ProbThreeLevel needs (x1, x0) or r")
        if x1 < 0 or x0 < 0 or x1 + x0 > m0:
            raise ValueError(f"x1={x1}, x0={x0} invalid for m0={m0}")
        return x1, x0


@dataclass(frozen=True)
class ProbGeneral:
    """Per-pair confidences in lexicographic pair order; NaN pairs are unchecked."""

    confidences: tuple[float, ...]
    complete: bool = False
    name = "prob_general"

    def __post_init__(self):
        object.__setattr__(self, "confidences", tuple(float(c) for c in self.confidences))


EdgeMode = Union[ExactPartial, ExactComplete, NoisyPartial, NoisyComplete, ProbUniform, ProbThreeLevel, ProbGeneral]
DETERMINISTIC_EDGE_MODES = (ExactPartial, ExactComplete, NoisyPartial, NoisyComplete)


@dataclass(frozen=True)
class AttrIgnored:
    name = "ignored"


@dataclass(frozen=True)
class AttrExact:
    name = "exact"


@dataclass(frozen=True)
class AlmostNodes:
    """At most ``epsilon`` query nodes may disagree with their image."""

    epsilon: int
    name = "almost_nodes"


@dataclass(frozen=True)
class AlmostAttrs:
    """Each node may disagree with its image in at most ``epsilon`` attributes."""

    epsilon: int
    name = "almost_attrs"


@dataclass(frozen=True)
class AttrApproximate:
    name = "approximate"


@dataclass(frozen=True)
class AttrProbabilistic:
    beliefs: AttributeBelief | None = field(default=None, compare=False)
    name = "probabilistic"


AttributeMode = Union[AttrIgnored, AttrExact, AlmostNodes, AlmostAttrs, AttrApproximate, AttrProbabilistic]

_EDGE_TYPES = {c.name: c for c in (ExactPartial, ExactComplete, NoisyPartial, NoisyComplete, ProbUniform, ProbThreeLevel, ProbGeneral)}
_ATTR_TYPES = {c.name: c for c in (AttrIgnored, AttrExact, AlmostNodes, AlmostAttrs, AttrApproximate, AttrProbabilistic)}


@dataclass(frozen=True)
class KnowledgeSpec:
    """Adversary model: how edges and attributes of the query are matched.

    Attribute statistics come from ``schema`` or, for the modes that only need
    it, from a single sharing probability ``p_A``.
    """

    edge: EdgeMode = ExactPartial()
    attribute: AttributeMode = AttrIgnored()
    schema: AttributeSchema | None = field(default=None, compare=False)
    p_A: float | None = None

    def __post_init__(self):
        for attr in ("epsilon",):
            for mode in (self.edge, self.attribute):
                eps = getattr(mode, attr, None)
                if eps is not None and (int(eps) != eps or eps < 0):
                    raise ValueError(f"{mode.name}: epsilon must be a nonnegative integer")
        for nm in ("p_e", "p1", "p0"):
            v = getattr(self.edge, nm, None)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{nm} must lie in [0, 1]")
        r = getattr(self.edge, "r", None)
        if r is not None and not 0.0 <= r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        if self.p_A is not None and not 0.0 <= self.p_A <= 1.0:
            raise ValueError("p_A must lie in [0, 1]")

    def to_dict(self) -> dict:
        def mode_dict(mode):
            d = {"mode": mode.name}
            for k, v in vars(mode).items():
                if k == "beliefs":
                    if v is not None:
                        d[k] = v.to_list()
                elif v is not None:
                    d[k] = list(v) if isinstance(v, tuple) else v
            return d

        out = {"edge": mode_dict(self.edge), "attribute": mode_dict(self.attribute)}
        if self.p_A is not None:
            out["p_A"] = self.p_A
        if self.schema is not None:
            out["schema"] = self.schema.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "KnowledgeSpec":
        def build(table, md, default):
            if md is None:
                return default
            md = dict(md)
            kind = md.pop("mode")
            if kind not in table:
                raise ValueError(f"unknown mode {kind!r}; expected one of {sorted(table)}")
            if "beliefs" in md and md["beliefs"] is not None:
                md["beliefs"] = AttributeBelief(md["beliefs"])
            if "confidences" in md:
                md["confidences"] = tuple(float("nan") if c is None else c for c in md["confidences"])
            return table[kind](**md)

        schema = AttributeSchema.from_dict(d["schema"]) if d.get("schema") else None
        return cls(
            edge=build(_EDGE_TYPES, d.get("edge"), ExactPartial()),
            attribute=build(_ATTR_TYPES, d.get("attribute"), AttrIgnored()),
            schema=schema,
            p_A=d.get("p_A"),
        )


@dataclass(frozen=True)
class DagValue:
    value: float
    status: str  # "normal" | "no_match" | "beyond_vanish"

    NORMAL = "normal"
    NO_MATCH = "no_match"
    BEYOND_VANISH = "beyond_vanish"


# -- helpers -------------------------------------------------------------------


def round_half_even(x) -> int:
    return int(round(Fraction(x)))


def edges_from_density(n_Q: int, p_q: float) -> int:
    """``round(p_q * n_Q (n_Q - 1) / 2)`` with ties to even, on the decimal value of ``p_q``."""
    if not 0.0 <= p_q <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    m0 = n_Q * (n_Q - 1) // 2
    return round_half_even(Fraction(repr(float(p_q))) * m0)


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability {p} outside [0, 1]")


def _binom_tail(m: int, eps: int, p_hit: float) -> float:
    """ln P(Binomial(m, 1 - p_hit) <= eps): at most ``eps`` of ``m`` slots miss."""
    terms = [ln_binom(m, k) + ln_pow(p_hit, m - k) + ln_pow(1.0 - p_hit, k) for k in range(min(eps, m) + 1)]
    return min(0.0, log_sum_exp(terms))


# -- edge factor ---------------------------------------------------------------


def noisy_complete_probability(epsilon: int, n_Q: int, m_Q: int, p: float) -> LogScalar:
    """Chance that a random candidate misses at most ``epsilon`` query edges and
    adds at most ``epsilon`` edges the query does not have."""
    _check_p(p)
    m0 = n_Q * (n_Q - 1) // 2
    if not 0 <= m_Q <= m0:
        raise ValueError(f"m_Q={m_Q} outside [0, {m0}]")
    if epsilon >= m0:
        warnings.warn(f"epsilon={epsilon} >= m0={m0}: every candidate matches", stacklevel=2)
        return LogScalar.one()
    terms = []
    for k in range(min(epsilon, m_Q) + 1):
        for l in range(min(epsilon, m0 - m_Q) + 1):
            terms.append(
                ln_binom(m_Q, k)
                + ln_binom(m0 - m_Q, l)
                + ln_pow(p, m_Q - k + l)
                + ln_pow(1.0 - p, m0 - m_Q + k - l)
            )
    return LogScalar(min(0.0, log_sum_exp(terms)))


def _ln_factor_product(factors: Sequence[float]) -> float:
    total = 0.0
    for f in factors:
        if f <= 0.0:
            return NEG_INF
        total += math.log(f)
    return min(0.0, total)


def edge_match_probability(mode: EdgeMode | KnowledgeSpec, n_Q: int, m_Q: int, p: float) -> LogScalar:
    """Chance that a uniformly random candidate in G(n, p) matches the query's edges."""
    if isinstance(mode, KnowledgeSpec):
        mode = mode.edge
    _check_p(p)
    m0 = n_Q * (n_Q - 1) // 2
    if not 0 <= m_Q <= m0:
        raise ValueError(f"m_Q={m_Q} outside [0, {m0}]")

    if isinstance(mode, ExactPartial):
        return LogScalar(ln_pow(p, m_Q))
    if isinstance(mode, ExactComplete):
        return LogScalar(ln_pow(p, m_Q) + ln_pow(1.0 - p, m0 - m_Q))
    if isinstance(mode, NoisyPartial):
        return LogScalar(_binom_tail(m_Q, mode.epsilon, p))
    if isinstance(mode, NoisyComplete):
        return noisy_complete_probability(mode.epsilon, n_Q, m_Q, p)
    if isinstance(mode, ProbUniform):
        pe = mode.p_e
        base = 1.0 - p - pe + 2.0 * p * pe if mode.complete else 1.0 - pe + p * pe
        return LogScalar(min(0.0, ln_pow(max(base, 0.0), m0)))
    if isinstance(mode, ProbThreeLevel):
        x1, x0 = mode.counts(m0)
        hi = p * mode.p1 + (1.0 - p) * (1.0 - mode.p1)
        lo = p * mode.p0 + (1.0 - p) * (1.0 - mode.p0)
        return LogScalar(min(0.0, ln_pow(hi, x1) + ln_pow(lo, x0)))
    if isinstance(mode, ProbGeneral):
        conf = np.asarray(mode.confidences, dtype=float)
        if conf.size != m0:
            raise ValueError(f"{conf.size} confidences for m0={m0} pairs")
        conf = conf[~np.isnan(conf)]
        if mode.complete:
            factors = p * conf + (1.0 - p) * (1.0 - conf)
        else:
            factors = 1.0 - conf + p * conf
        return LogScalar(_ln_factor_product(factors.tolist()))
    raise TypeError(f"unsupported edge mode {mode!r}")


# -- attribute factor --------------------------------------------------------


def attribute_sharing_probabilities(schema: AttributeSchema, approximate: bool = False) -> list[float]:
    """Per attribute, the chance two random nodes agree (or approximately agree)."""
    out = []
    for attr in schema:
        pr = attr.probs
        if approximate:
            if attr.similarity is None:
                raise ValueError(f"approximate matching needs a similarity kernel for attribute {attr.name!r}")
            out.append(float(pr @ attr.similarity @ pr))
        else:
            out.append(float(pr @ pr))
    return out


def _ln_at_most_k_fail(success: Sequence[float], eps: int) -> float:
    """ln P(at most ``eps`` of independent trials fail), trial i succeeding w.p. success[i]."""
    dist = np.zeros(len(success) + 1)
    dist[0] = 1.0
    for s in success:
        nxt = dist * s
        nxt[1:] += dist[:-1] * (1.0 - s)
        dist = nxt
    total = math.fsum(dist[: eps + 1])
    return math.log(total) if total > 0 else NEG_INF


def attribute_match_probability(
    source: AttributeSchema | float | KnowledgeSpec,
    mode: AttributeMode | None = None,
    n_Q: int = 1,
    epsilon: int | None = None,
) -> LogScalar:
    """Chance that a random candidate matches the query's node attributes.

    ``source`` is a schema or a bare sharing probability ``p_A``; a
    :class:`KnowledgeSpec` supplies both the source and the mode.
    """
    if isinstance(source, KnowledgeSpec):
        mode = source.attribute if mode is None else mode
        source = source.schema if source.schema is not None else source.p_A
    if mode is None:
        raise ValueError("attribute mode required")
    if epsilon is None:
        epsilon = getattr(mode, "epsilon", 0)
    if isinstance(mode, AttrIgnored):
        return LogScalar.one()

    schema = source if isinstance(source, AttributeSchema) else None
    if schema is None and source is None:
        raise ValueError(f"attribute mode {mode.name!r} needs a schema or p_A")

    if isinstance(mode, AttrProbabilistic):
        if schema is None:
            raise ValueError("probabilistic attributes need a schema")
        beliefs = mode.beliefs
        if beliefs is not None and len(beliefs) != n_Q:
            raise ValueError(f"{len(beliefs)} beliefs for n_Q={n_Q}")
        total = 0.0
        for j in range(n_Q):
            for i, attr in enumerate(schema):
                belief = attr.probs if beliefs is None else beliefs[j][i]
                sim = np.eye(attr.size) if attr.similarity is None else attr.similarity
                total += ln_pow(float(attr.probs @ sim @ belief), 1)
        return LogScalar(min(0.0, total))

    if isinstance(mode, AttrApproximate):
        if schema is None:
            raise ValueError("approximate matching needs a schema with similarity kernels")
        p_A = math.prod(attribute_sharing_probabilities(schema, approximate=True))
    elif isinstance(mode, AlmostAttrs):
        if schema is None:
            raise ValueError("almost-correct attributes need per-attribute statistics (a schema)")
        if epsilon >= len(schema):
            raise ValueError(f"epsilon={epsilon} must be smaller than the attribute count {len(schema)}")
        p_A = math.exp(_ln_at_most_k_fail(attribute_sharing_probabilities(schema), epsilon))
    else:
        p_A = math.prod(attribute_sharing_probabilities(schema)) if schema is not None else float(source)

    if isinstance(mode, AlmostNodes):
        return LogScalar(_binom_tail(n_Q, epsilon, p_A))
    if isinstance(mode, (AttrExact, AttrApproximate, AlmostAttrs)):
        return LogScalar(ln_pow(p_A, n_Q))
    raise TypeError(f"unsupported attribute mode {mode!r}")


# -- match count and gain ---------------------------------------------------


def expected_match_count(n: int, n_Q: int, edge_factor: LogScalar, attr_factor: LogScalar = LogScalar.one()) -> LogScalar:
    if n_Q > n:
        raise ValueError(f"n_Q={n_Q} exceeds n={n}")
    return LogScalar(ln_falling(n, n_Q) + edge_factor.ln + attr_factor.ln)


def match_count(spec: KnowledgeSpec, n: int, n_Q: int, m_Q: int, p: float) -> LogScalar:
    """Expected matches of an ``(n_Q, m_Q)`` query in G(n, p) under ``spec``."""
    return expected_match_count(
        n,
        n_Q,
        edge_match_probability(spec.edge, n_Q, m_Q, p),
        attribute_match_probability(spec, n_Q=n_Q),
    )


def dag(n: int, n_Q: int, match_count: LogScalar) -> DagValue:
    """Expected fraction of de-anonymized users, ``n_Q / (M_Q n)``.

    No match gives 0. A match count below one means the attacker is left with
    the single true match, so the gain saturates at ``n_Q / n``.
    """
    if n_Q > n:
        raise ValueError(f"n_Q={n_Q} exceeds n={n}")
    if match_count.is_zero:
        return DagValue(0.0, DagValue.NO_MATCH)
    if match_count.ln < 0.0:
        return DagValue(n_Q / n, DagValue.BEYOND_VANISH)
    return DagValue(math.exp(math.log(n_Q) - math.log(n) - match_count.ln), DagValue.NORMAL)


def powerlaw_match_lower_bound(n: int, beta: float, n_Q: int, m_Q: int) -> tuple[LogScalar, DagValue]:
    """Lower bound on exact-partial matches in a Chung-Lu power-law graph with
    degree counts proportional to ``d**-beta``, and the implied DAG upper bound."""
    if beta <= 2:
        raise ValueError("beta must exceed 2")
    m0 = n_Q * (n_Q - 1) // 2
    if not 0 <= m_Q <= m0:
        raise ValueError(f"m_Q={m_Q} outside [0, {m0}]")
    ln_edge = m_Q * (math.log(beta - 1.0) - math.log(n) - math.log(beta - 2.0)) if m_Q else 0.0
    bound = LogScalar(ln_falling(n, n_Q) + ln_edge)
    return bound, dag(n, n_Q, bound)


# -- probabilistic knowledge: configuration sums ------------------------------

MAX_ENUMERATED_PAIRS = 24
_CHUNK_BITS = 18


def _checked_confidences(q: Query | Sequence[float]) -> np.ndarray:
    conf = q.confidence_vector() if isinstance(q, Query) else np.asarray(q, dtype=float)
    return conf[~np.isnan(conf)]


def _config_value(k: np.ndarray, m: int, p: float, complete: bool) -> np.ndarray:
    k = k.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.power(p, k)
        if complete:
            val = val * np.power(1.0 - p, m - k)
    return val


def probabilistic_config_sum(q: Query | Sequence[float], p: float, complete: bool = False) -> LogScalar:
    """Sum over every edge configuration of the query, weighted by the
    attacker's confidences, of the chance the configuration matches a random
    candidate. Exhaustive; unchecked (NaN) pairs are left out."""
    _check_p(p)
    conf = _checked_confidences(q)
    m = conf.size
    if m > MAX_ENUMERATED_PAIRS:
        raise ValueError(
            f"{m} checked pairs exceed the exhaustive limit {MAX_ENUMERATED_PAIRS}; "
            "use probabilistic_config_sampled instead"
        )
    shifts = np.arange(m, dtype=np.uint64)
    total = []
    n_cfg = 1 << m
    step = 1 << min(m, _CHUNK_BITS)
    for start in range(0, n_cfg, step):
        codes = np.arange(start, min(start + step, n_cfg), dtype=np.uint64)
        bits = ((codes[:, None] >> shifts) & np.uint64(1)).astype(bool)
        weight = np.prod(np.where(bits, conf, 1.0 - conf), axis=1)
        val = _config_value(bits.sum(axis=1), m, p, complete)
        total.append(float(np.sum(weight * val)))
    return LogScalar.of(max(0.0, min(1.0, math.fsum(total))))


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    samples: int

    def ci(self, z: float = 2.5758293035489) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def probabilistic_config_sampled(
    q: Query | Sequence[float], p: float, complete: bool = False, samples: int = 10_000, seed: int = 0
) -> Estimate:
    """Monte-Carlo version of :func:`probabilistic_config_sum`: draw
    configurations from the confidences and average their match chance."""
    _check_p(p)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    conf = _checked_confidences(q)
    m = conf.size
    rng = stream(seed)
    vals = []
    left = samples
    while left:
        b = min(left, 1 << 16)
        bits = rng.random((b, m)) < conf
        vals.append(_config_value(bits.sum(axis=1), m, p, complete))
        left -= b
    v = np.concatenate(vals)
    se = float(v.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
    return Estimate(float(v.mean()), se, samples)


def three_level_confidences(n_Q: int, mode: ProbThreeLevel, seed: int | None = None) -> list[float]:
    """Per-pair confidences realizing a three-level split: ``x1`` pairs at
    ``p1``, ``x0`` at ``p0``, the rest unchecked (NaN). Pairs are assigned in
    lexicographic pair order, or shuffled when ``seed`` is given."""
    m0 = n_Q * (n_Q - 1) // 2
    x1, x0 = mode.counts(m0)
    conf = [mode.p1] * x1 + [mode.p0] * x0 + [float("nan")] * (m0 - x1 - x0)
    if seed is not None:
        order = stream(seed).permutation(m0)
        conf = [conf[i] for i in order]
    return conf

