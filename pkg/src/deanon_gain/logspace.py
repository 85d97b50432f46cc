"""Nonnegative reals carried as natural logarithms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

NEG_INF = float("-inf")


def log_sum_exp(lns: Iterable[float]) -> float:
    """``ln(sum(exp(x)))`` with compensated summation of the shifted terms."""
    xs = [float(x) for x in lns]
    if not xs:
        return NEG_INF
    top = max(xs)
    if top == NEG_INF:
        return NEG_INF
    if math.isinf(top):
        return top
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


def ln_pow(base: float, exponent: float) -> float:
    """``exponent * ln(base)`` with ``0**0 == 1``."""
    if exponent == 0:
        return 0.0
    if base == 0:
        return NEG_INF
    return exponent * math.log(base)


def ln_binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return NEG_INF
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def ln_falling(n: int, k: int) -> float:
    """``ln(n (n-1) ... (n-k+1))``, summed term by term."""
    if k > n:
        return NEG_INF
    return math.fsum(math.log(n - i) for i in range(k))


@dataclass(frozen=True, order=True)
class LogScalar:
    ln: float

    @classmethod
    def of(cls, value: float) -> "LogScalar":
        if value < 0:
            raise ValueError("LogScalar holds nonnegative values only")
        return cls(math.log(value) if value > 0 else NEG_INF)

    @classmethod
    def zero(cls) -> "LogScalar":
        return cls(NEG_INF)

    @classmethod
    def one(cls) -> "LogScalar":
        return cls(0.0)

    @property
    def value(self) -> float:
        """Linear value; overflows to ``inf`` beyond double range."""
        if self.ln > 709.78:
            return math.inf
        return math.exp(self.ln)

    @property
    def is_zero(self) -> bool:
        return self.ln == NEG_INF

    @property
    def log10(self) -> float:
        return self.ln / math.log(10)

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        if not isinstance(other, LogScalar):
            return NotImplemented
        return LogScalar(self.ln + other.ln)

    def __truediv__(self, other: "LogScalar") -> "LogScalar":
        if not isinstance(other, LogScalar):
            return NotImplemented
        if other.is_zero:
            raise ZeroDivisionError("division by LogScalar zero")
        return LogScalar(self.ln - other.ln)

    def __add__(self, other: "LogScalar") -> "LogScalar":
        if not isinstance(other, LogScalar):
            return NotImplemented
        return LogScalar(log_sum_exp((self.ln, other.ln)))

    def __pow__(self, k: float) -> "LogScalar":
        if k == 0:
            return LogScalar.one()
        return LogScalar(self.ln * k)

    @staticmethod
    def sum(items: Iterable["LogScalar"]) -> "LogScalar":
        return LogScalar(log_sum_exp(x.ln for x in items))

    def __repr__(self) -> str:
        return f"LogScalar(ln={self.ln!r})"
