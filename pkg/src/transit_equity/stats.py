"""Pearson correlation with a Student-t p-value, and line rankings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import DegenerateInputError, InvalidInputError

P_FLOOR = 1e-300
_TINY = 1e-300


@dataclass(frozen=True)
class CorrelationReport:
    r: float
    p: float
    n: int

    def as_dict(self) -> dict:
        return {"r": self.r, "p": self.p, "n": self.n}


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    if n != len(ys) or n < 2:
        raise InvalidInputError("pearson needs two equal-length vectors of length >= 2")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInputError("zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _betacf(a: float, b: float, x: float, tol: float = 1e-10, max_iter: int = 300) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    return h


def _log_front(a: float, b: float, x: float, one_minus_x: float) -> float:
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + a * math.log(x) + b * math.log(one_minus_x))


def betainc(a: float, b: float, x: float, one_minus_x: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``one_minus_x`` may be passed when it is known more accurately than ``1 - x``.
    """
    if a <= 0 or b <= 0:
        raise InvalidInputError("betainc needs a, b > 0")
    if one_minus_x is None:
        one_minus_x = 1.0 - x
    if x <= 0.0:
        return 0.0
    if one_minus_x <= 0.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(_log_front(a, b, x, one_minus_x)) * _betacf(a, b, x) / a
    return 1.0 - math.exp(_log_front(a, b, x, one_minus_x)) * _betacf(b, a, one_minus_x) / b


def p_value(r: float, n: int) -> float:
    """Two-sided p-value of H0: no correlation, via Student-t with n - 2 dof."""
    if n < 3:
        raise InvalidInputError("p_value needs n >= 3")
    if not -1.0 <= r <= 1.0:
        raise InvalidInputError("|r| must be <= 1")
    if abs(r) == 1.0:
        return 0.0
    if r == 0.0:
        return 1.0
    dof = n - 2
    # with t = r sqrt(dof / (1 - r^2)): dof / (dof + t^2) = 1 - r^2 exactly
    one_minus_r2 = (1.0 - abs(r)) * (1.0 + abs(r))
    p = betainc(dof / 2.0, 0.5, one_minus_r2, r * r)
    return min(1.0, max(P_FLOOR, p))


def correlate(xs: Sequence[float], ys: Sequence[float]) -> CorrelationReport:
    r = pearson(xs, ys)
    n = len(xs)
    return CorrelationReport(r, p_value(r, n) if n >= 3 else float("nan"), n)


def rank_lines(scores: Mapping[str, float]) -> list[tuple[str, float]]:
    """Descending by value; ties by line id ascending."""
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
