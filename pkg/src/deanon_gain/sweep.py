"""DAG curves over the amount or quality of knowledge, and their critical points."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .knowledge import (
    AttrIgnored,
    DagValue,
    ExactPartial,
    KnowledgeSpec,
    ProbThreeLevel,
    attribute_match_probability,
    dag,
    edge_match_probability,
    edges_from_density,
    expected_match_count,
    powerlaw_match_lower_bound,
)
from .logspace import NEG_INF, ln_falling

AXES = ("n_Q", "p_q", "r")
_AXIS_ALIASES = {"nq": "n_Q", "n_q": "n_Q", "pq": "p_q"}

ERROR = "error"


@dataclass(frozen=True)
class SweepPoint:
    x: float
    dag: DagValue
    n_Q: int
    m_Q: int | None
    ln_match_count: float
    ln_candidates: float
    ln_match_probability: float
    error: str | None = None


@dataclass
class SweepCurve:
    axis: str
    points: list[SweepPoint]
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = [p.x for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("sweep x values must be strictly increasing")

    @property
    def xs(self) -> list[float]:
        return [p.x for p in self.points]

    @property
    def values(self) -> list[float]:
        return [p.dag.value for p in self.points]

    @property
    def statuses(self) -> list[str]:
        return [p.dag.status for p in self.points]


@dataclass(frozen=True)
class CriticalPoints:
    valley: float | None
    vanish: float | None
    grid_step: float | None = None

    def to_dict(self) -> dict:
        return {"valley": self.valley, "vanish": self.vanish, "grid_step": self.grid_step}


def normalize_axis(axis: str) -> str:
    axis = _AXIS_ALIASES.get(axis, axis)
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    return axis


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, computed by index to avoid drift."""
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise ValueError("empty range")
    return [round(start + i * step, 12) for i in range(count)]


def evaluate_point(
    spec: KnowledgeSpec,
    n: int,
    n_Q: int,
    m_Q: int,
    p: float | None = None,
    beta: float | None = None,
) -> tuple[DagValue, float, float, float]:
    """(DAG, ln M_Q, ln candidate space, ln match probability) at one setting.

    With ``beta`` the match count is the power-law lower bound, so the DAG is
    an upper bound."""
    ln_space = ln_falling(n, n_Q)
    if beta is not None:
        if not isinstance(spec.edge, ExactPartial) or not isinstance(spec.attribute, AttrIgnored):
            raise ValueError("the power-law bound covers exact-partial, attribute-ignored knowledge only")
        bound, value = powerlaw_match_lower_bound(n, beta, n_Q, m_Q)
        return value, bound.ln, ln_space, bound.ln - ln_space
    if p is None:
        raise ValueError("either p (G(n,p)) or beta (power-law) is required")
    edge = edge_match_probability(spec.edge, n_Q, m_Q, p)
    attr = attribute_match_probability(spec, n_Q=n_Q)
    mq = expected_match_count(n, n_Q, edge, attr)
    return dag(n, n_Q, mq), mq.ln, ln_space, edge.ln + attr.ln


def sweep(
    spec: KnowledgeSpec,
    axis: str,
    values: Iterable[float],
    n: int,
    p: float | None = None,
    beta: float | None = None,
    n_Q: int = 50,
    p_q: float = 0.3,
    m_Q: int | None = None,
) -> SweepCurve:
    """DAG at every grid value of ``axis`` with the other parameters fixed.

    ``n_Q``: query size varies, ``m_Q = round(p_q m0)``; ``p_q``: density
    varies at fixed ``n_Q``; ``r``: three-level ratio varies. Failing points
    carry status ``"error"`` and do not stop the sweep.
    """
    axis = normalize_axis(axis)
    if axis == "r" and not isinstance(spec.edge, ProbThreeLevel):
        raise ValueError("the r axis needs three-level probabilistic knowledge")
    points = []
    for x in values:
        k, mq, s = n_Q, m_Q, spec
        try:
            if axis == "n_Q":
                if x != int(x):
                    raise ValueError(f"n_Q must be an integer, got {x}")
                k = int(x)
                mq = m_Q if m_Q is not None else edges_from_density(k, p_q)
            elif axis == "p_q":
                mq = edges_from_density(k, x)
            else:
                s = replace(spec, edge=replace(spec.edge, r=float(x), x1=None, x0=None))
                mq = mq if mq is not None else edges_from_density(k, p_q)
            value, ln_mq, ln_space, ln_prob = evaluate_point(s, n, k, mq, p, beta)
            points.append(SweepPoint(x, value, k, mq, ln_mq, ln_space, ln_prob))
        except (ValueError, ArithmeticError) as exc:
            points.append(SweepPoint(x, DagValue(math.nan, ERROR), k, mq, math.nan, math.nan, math.nan, str(exc)))
    fixed = {"n": n, "p": p, "beta": beta, "n_Q": n_Q, "p_q": p_q, "m_Q": m_Q, "spec": spec.to_dict()}
    return SweepCurve(axis, points, {k: v for k, v in fixed.items() if v is not None})


def find_critical_points(curve: SweepCurve | Sequence) -> CriticalPoints:
    """Valley: the smallest normal-status DAG, if it is interior, meaning both
    grid neighbours are strictly larger (ties go to the smaller x). Vanish:
    the first x where the analytic match count drops below one."""
    pts = curve.points if isinstance(curve, SweepCurve) else list(curve)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    xs = [p.x for p in pts]
    step = xs[1] - xs[0] if len(set(round(b - a, 9) for a, b in zip(xs, xs[1:]))) == 1 else None
    vanish = next((p.x for p in pts if p.dag.status == DagValue.BEYOND_VANISH), None)
    normal = [i for i, p in enumerate(pts) if p.dag.status == DagValue.NORMAL]
    valley = None
    if normal:
        best = min(normal, key=lambda i: (pts[i].dag.value, i))
        if 0 < best < len(pts) - 1:
            left, right = pts[best - 1].dag, pts[best + 1].dag
            v = pts[best].dag.value
            if all(nb.status != ERROR and nb.value > v for nb in (left, right)):
                valley = pts[best].x
    return CriticalPoints(valley, vanish, step)


# -- CSV ---------------------------------------------------------------------

CSV_COLUMNS = ["n_Q", "m_Q", "ln_MQ", "DAG", "status", "ln_candidates", "ln_match_prob"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if v == NEG_INF:
            return "-inf"
        return repr(v)
    return str(v)


def write_curve_csv(curve: SweepCurve, path) -> None:
    """Write to a path, or to an open text stream."""
    if hasattr(path, "write"):
        _write_rows(curve, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(curve, fh)


def _write_rows(curve: SweepCurve, fh) -> None:
    cols = ([curve.axis] if curve.axis != "n_Q" else []) + CSV_COLUMNS
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for p in curve.points:
        row = [p.n_Q, p.m_Q, p.ln_match_count, p.dag.value, p.dag.status, p.ln_candidates, p.ln_match_probability]
        if curve.axis != "n_Q":
            row = [p.x] + row
        w.writerow([_fmt(v) for v in row])


def read_curve_csv(path) -> SweepCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty curve")
    axis = next((a for a in ("p_q", "r") if a in rows[0]), "n_Q")

    def num(s):
        return float(s) if s not in ("", None) else math.nan

    points = []
    for r in rows:
        points.append(
            SweepPoint(
                x=num(r[axis]) if axis != "n_Q" else int(r["n_Q"]),
                dag=DagValue(num(r["DAG"]), r["status"]),
                n_Q=int(r["n_Q"]),
                m_Q=int(r["m_Q"]) if r.get("m_Q") else None,
                ln_match_count=num(r.get("ln_MQ")),
                ln_candidates=num(r.get("ln_candidates")),
                ln_match_probability=num(r.get("ln_match_prob")),
            )
        )
    return SweepCurve(axis, points)
