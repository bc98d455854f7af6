"""Closed-interval arithmetic on finite endpoints.

Intervals are immutable values and every operation returns a fresh interval
that encloses the exact range of the corresponding real operation.  Endpoint
arithmetic is plain floating point (no directed rounding); downstream
tolerances absorb rounding-scale error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

_HALF_PI = 0.5 * math.pi
_TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Operand leaves the domain of the requested operation."""


class IntervalDivisionError(ZeroDivisionError):
    """Division by an interval containing zero."""


@dataclass(frozen=True)
class Interval:
    """Nonempty closed interval [lo, hi] with finite endpoints."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"empty interval: lo={lo} > hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, v: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= v <= self.hi + slack

    def encloses(self, other: "Interval", slack: float = 0.0) -> bool:
        return self.lo - slack <= other.lo and other.hi <= self.hi + slack

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other: "Interval") -> "Interval":
        p1 = self.lo * other.lo
        p2 = self.lo * other.hi
        p3 = self.hi * other.lo
        p4 = self.hi * other.hi
        return Interval(min(p1, p2, p3, p4), max(p1, p2, p3, p4))

    def __truediv__(self, other: "Interval") -> "Interval":
        if other.lo <= 0.0 <= other.hi:
            raise IntervalDivisionError(
                f"division by interval [{other.lo}, {other.hi}] containing zero"
            )
        q1 = self.lo / other.lo
        q2 = self.lo / other.hi
        q3 = self.hi / other.lo
        q4 = self.hi / other.hi
        return Interval(min(q1, q2, q3, q4), max(q1, q2, q3, q4))

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def sin_bounds(lo: float, hi: float) -> tuple[float, float]:
    """Exact range of sin over [lo, hi] up to floating-point evaluation.

    Critical points at multiples of pi/2 inside the argument are enumerated;
    arguments at least one full period wide short-circuit to [-1, 1].
    """
    if hi - lo >= _TWO_PI:
        return (-1.0, 1.0)
    vmin = vmax = math.sin(lo)
    s = math.sin(hi)
    if s < vmin:
        vmin = s
    elif s > vmax:
        vmax = s
    k = math.ceil(lo / _HALF_PI)
    kmax = math.floor(hi / _HALF_PI)
    while k <= kmax:
        s = math.sin(k * _HALF_PI)
        if s < vmin:
            vmin = s
        elif s > vmax:
            vmax = s
        k += 1
    return (vmin, vmax)


def cos_bounds(lo: float, hi: float) -> tuple[float, float]:
    """Exact range of cos over [lo, hi], same scheme as :func:`sin_bounds`."""
    if hi - lo >= _TWO_PI:
        return (-1.0, 1.0)
    vmin = vmax = math.cos(lo)
    c = math.cos(hi)
    if c < vmin:
        vmin = c
    elif c > vmax:
        vmax = c
    k = math.ceil(lo / _HALF_PI)
    kmax = math.floor(hi / _HALF_PI)
    while k <= kmax:
        c = math.cos(k * _HALF_PI)
        if c < vmin:
            vmin = c
        elif c > vmax:
            vmax = c
        k += 1
    return (vmin, vmax)


def neg(a: Interval) -> Interval:
    return -a


def sin(a: Interval) -> Interval:
    return Interval(*sin_bounds(a.lo, a.hi))


def cos(a: Interval) -> Interval:
    return Interval(*cos_bounds(a.lo, a.hi))


def sqrt(a: Interval) -> Interval:
    if a.lo < 0.0:
        raise DomainError(f"sqrt of interval [{a.lo}, {a.hi}] with negative lower bound")
    return Interval(math.sqrt(a.lo), math.sqrt(a.hi))


def exp(a: Interval) -> Interval:
    return Interval(math.exp(a.lo), math.exp(a.hi))


ELEMENTARY = {"neg": neg, "sin": sin, "cos": cos, "sqrt": sqrt, "exp": exp}


def elementary(op: str, a: Interval) -> Interval:
    """Apply a named unary operation with a tight interval range."""
    try:
        fn = ELEMENTARY[op]
    except KeyError:
        raise ValueError(f"unknown elementary operation {op!r}") from None
    return fn(a)


def linear_natural_extension(coeffs: Sequence[float], box: Sequence[Interval]) -> Interval:
    """Range of z -> sum_i coeffs[i] * z[i] over a box, computed componentwise.

    For a linear map this equals the exact range: each term contributes
    [a*lo, a*hi] for a >= 0 and [a*hi, a*lo] otherwise, and the endpoint
    sums are attained.
    """
    if len(coeffs) != len(box):
        raise ValueError(f"dimension mismatch: {len(coeffs)} coefficients, {len(box)} components")
    lo = 0.0
    hi = 0.0
    for a, z in zip(coeffs, box):
        if a >= 0.0:
            lo += a * z.lo
            hi += a * z.hi
        else:
            lo += a * z.hi
            hi += a * z.lo
    return Interval(lo, hi)


@dataclass(frozen=True)
class IntervalVector:
    """Box in R^n as an ordered tuple of intervals, n >= 1."""

    components: tuple[Interval, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("interval vector needs at least one component")
        for c in comps:
            if not isinstance(c, Interval):
                raise TypeError(f"components must be Interval, got {type(c).__name__}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_bounds(cls, lower: Sequence[float], upper: Sequence[float]) -> "IntervalVector":
        if len(lower) != len(upper):
            raise ValueError("lower/upper length mismatch")
        return cls(tuple(Interval(lo, hi) for lo, hi in zip(lower, upper)))

    @property
    def dim(self) -> int:
        return len(self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.components)

    def __getitem__(self, i: int) -> Interval:
        return self.components[i]

    def lower(self) -> list[float]:
        return [c.lo for c in self.components]

    def upper(self) -> list[float]:
        return [c.hi for c in self.components]

    def contains_point(self, p: Sequence[float], slack: float = 0.0) -> bool:
        if len(p) != len(self.components):
            raise ValueError("dimension mismatch")
        return all(c.contains(v, slack) for c, v in zip(self.components, p))

    def encloses(self, other: "IntervalVector", slack: float = 0.0) -> bool:
        if len(other) != len(self.components):
            raise ValueError("dimension mismatch")
        return all(a.encloses(b, slack) for a, b in zip(self.components, other))

    def __repr__(self) -> str:
        return " x ".join(repr(c) for c in self.components)
