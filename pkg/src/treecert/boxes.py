"""Interval and hyperrectangle abstract domain.

Intervals carry per-endpoint inclusivity flags so that half-open leaf
regions (induced by ``<=`` splits) and open perturbation sets can both be
represented exactly instead of being widened to closed intervals.  Boxes
are Cartesian products of intervals; ``meet`` is exact set intersection
and ``join`` is the component-wise interval hull.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass(frozen=True, slots=True)
class Interval:
    """A rational interval with per-endpoint inclusivity.

    Infinite endpoints are always exclusive (enforced at construction).
    The interval is empty iff ``lo > hi``, or ``lo == hi`` with at least
    one exclusive endpoint.
    """

    lo: float = NEG_INF
    hi: float = POS_INF
    lo_inclusive: bool = False
    hi_inclusive: bool = False

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if math.isinf(self.lo) and self.lo_inclusive:
            object.__setattr__(self, "lo_inclusive", False)
        if math.isinf(self.hi) and self.hi_inclusive:
            object.__setattr__(self, "hi_inclusive", False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, True, True)

    @classmethod
    def open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, False)

    @classmethod
    def open_closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, True)

    @classmethod
    def closed_open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, True, False)

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v, True, True)

    @classmethod
    def unbounded(cls) -> "Interval":
        return cls()

    @classmethod
    def empty(cls) -> "Interval":
        return cls(POS_INF, NEG_INF, False, False)

    @property
    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        if self.lo == self.hi:
            return not (self.lo_inclusive and self.hi_inclusive)
        return True

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi and self.lo_inclusive and self.hi_inclusive

    def contains(self, x: float) -> bool:
        if self.lo_inclusive:
            if not x >= self.lo:
                return False
        elif not x > self.lo:
            return False
        if self.hi_inclusive:
            return x <= self.hi
        return x < self.hi

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo:
            lo, lo_inc = self.lo, self.lo_inclusive
        elif self.lo < other.lo:
            lo, lo_inc = other.lo, other.lo_inclusive
        else:
            lo, lo_inc = self.lo, self.lo_inclusive and other.lo_inclusive
        if self.hi < other.hi:
            hi, hi_inc = self.hi, self.hi_inclusive
        elif self.hi > other.hi:
            hi, hi_inc = other.hi, other.hi_inclusive
        else:
            hi, hi_inc = self.hi, self.hi_inclusive and other.hi_inclusive
        return Interval(lo, hi, lo_inc, hi_inc)

    def hull(self, other: "Interval") -> "Interval":
        """Least interval containing both operands; empty operands are identities."""
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        if self.lo < other.lo:
            lo, lo_inc = self.lo, self.lo_inclusive
        elif self.lo > other.lo:
            lo, lo_inc = other.lo, other.lo_inclusive
        else:
            lo, lo_inc = self.lo, self.lo_inclusive or other.lo_inclusive
        if self.hi > other.hi:
            hi, hi_inc = self.hi, self.hi_inclusive
        elif self.hi < other.hi:
            hi, hi_inc = other.hi, other.hi_inclusive
        else:
            hi, hi_inc = self.hi, self.hi_inclusive or other.hi_inclusive
        return Interval(lo, hi, lo_inc, hi_inc)

    def encloses(self, other: "Interval") -> bool:
        """True iff ``other`` is a subset of this interval."""
        if other.is_empty:
            return True
        if self.is_empty:
            return False
        if other.lo < self.lo:
            return False
        if other.lo == self.lo and other.lo_inclusive and not self.lo_inclusive:
            return False
        if other.hi > self.hi:
            return False
        if other.hi == self.hi and other.hi_inclusive and not self.hi_inclusive:
            return False
        return True

    @property
    def width(self) -> float:
        if self.is_empty:
            return 0.0
        return self.hi - self.lo

    @property
    def is_finite(self) -> bool:
        return not self.is_empty and math.isfinite(self.lo) and math.isfinite(self.hi)

    def inner_point(self) -> float:
        """A member of the interval: the midpoint, nudged inward off
        exclusive endpoints by the smallest representable step."""
        if self.is_empty:
            raise ValueError("empty interval has no inner point")
        lo, hi = self.lo, self.hi
        if math.isinf(lo) and math.isinf(hi):
            return 0.0
        if math.isinf(lo):
            return hi if self.hi_inclusive else math.nextafter(hi, NEG_INF)
        if math.isinf(hi):
            return lo if self.lo_inclusive else math.nextafter(lo, POS_INF)
        mid = lo + (hi - lo) / 2.0
        if mid == lo and not self.lo_inclusive:
            mid = math.nextafter(mid, POS_INF)
        if mid == hi and not self.hi_inclusive:
            mid = math.nextafter(mid, NEG_INF)
        if not self.contains(mid):
            raise ValueError(f"no representable point inside {self}")
        return mid

    def __str__(self) -> str:
        lb = "[" if self.lo_inclusive else "("
        rb = "]" if self.hi_inclusive else ")"
        return f"{lb}{self.lo!r}, {self.hi!r}{rb}"


@dataclass(frozen=True, slots=True)
class Box:
    """An n-dimensional hyperrectangle: a product of intervals.

    The box is empty iff any component is empty.  Membership of a vector
    is component-wise interval membership.
    """

    dims: tuple[Interval, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.dims, tuple):
            object.__setattr__(self, "dims", tuple(self.dims))

    @classmethod
    def unbounded(cls, n: int) -> "Box":
        return cls(tuple(Interval() for _ in range(n)))

    @classmethod
    def closed(cls, bounds: Iterable[tuple[float, float]]) -> "Box":
        return cls(tuple(Interval.closed(lo, hi) for lo, hi in bounds))

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def is_empty(self) -> bool:
        return any(iv.is_empty for iv in self.dims)

    @property
    def is_point(self) -> bool:
        return all(iv.is_point for iv in self.dims)

    def contains(self, x: Sequence[float]) -> bool:
        if len(x) != len(self.dims):
            raise ValueError(f"point has {len(x)} components, box has {len(self.dims)}")
        return all(iv.contains(v) for iv, v in zip(self.dims, x))

    def inner_point(self) -> tuple[float, ...]:
        return tuple(iv.inner_point() for iv in self.dims)

    def corners(self) -> Iterator[tuple[float, ...]]:
        """The 2^n corner points.  Requires a non-empty box with finite
        endpoints; inclusivity is ignored (corners of the closure)."""
        if self.is_empty:
            raise ValueError("empty box has no corners")
        for iv in self.dims:
            if not iv.is_finite:
                raise ValueError("corners require finite endpoints")

        def rec(i: int, prefix: tuple[float, ...]) -> Iterator[tuple[float, ...]]:
            if i == len(self.dims):
                yield prefix
                return
            iv = self.dims[i]
            yield from rec(i + 1, prefix + (iv.lo,))
            if iv.hi != iv.lo:
                yield from rec(i + 1, prefix + (iv.hi,))

        return rec(0, ())

    def replace(self, i: int, iv: Interval) -> "Box":
        dims = list(self.dims)
        dims[i] = iv
        return Box(tuple(dims))

    def __str__(self) -> str:
        return " x ".join(str(iv) for iv in self.dims)


def _check_same_dim(a: Box, b: Box) -> None:
    if len(a.dims) != len(b.dims):
        raise ValueError(f"dimension mismatch: {len(a.dims)} vs {len(b.dims)}")


def meet(a: Box, b: Box) -> Box:
    """Exact intersection: gamma(meet(a, b)) = gamma(a) & gamma(b)."""
    _check_same_dim(a, b)
    return Box(tuple(x.intersect(y) for x, y in zip(a.dims, b.dims)))


def join(a: Box, b: Box) -> Box:
    """Component-wise interval hull; an over-approximation of the union.

    Empty operands act as identity elements.
    """
    _check_same_dim(a, b)
    if a.is_empty:
        return b
    if b.is_empty:
        return a
    return Box(tuple(x.hull(y) for x, y in zip(a.dims, b.dims)))


def from_points(points: Iterable[Sequence[float]]) -> Box:
    """Smallest closed box containing every point (the abstraction map).

    The empty set has no abstraction here; bottom is an explicit empty Box.
    """
    it = iter(points)
    try:
        first = next(it)
    except StopIteration:
        raise ValueError("from_points requires a non-empty set of points") from None
    los = list(first)
    his = list(first)
    n = len(los)
    for p in it:
        if len(p) != n:
            raise ValueError("points have inconsistent dimensionality")
        for i, v in enumerate(p):
            if v < los[i]:
                los[i] = v
            if v > his[i]:
                his[i] = v
    return Box(tuple(Interval.closed(lo, hi) for lo, hi in zip(los, his)))


@dataclass
class TransformStats:
    """Diagnostics for one verification run.

    ``max_recursion_depth`` counts simultaneously pinned trees, so it is
    bounded by the ensemble size on every run.
    """

    refinement_count: int = 0
    max_recursion_depth: int = 0
    checker_calls: int = 0
