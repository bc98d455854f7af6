"""Box faces and single-pass tightening against linear inequalities.

Two geometric primitives drive the observer dynamics:

* ``face`` pins one coordinate of a box to an endpoint.  When the input
  bounds cross, each crossed component is first repaired to its midpoint,
  so the output box is always nonempty.
* ``tighten_box`` shrinks a box against constraints ``M z <= d`` in a single
  sweep (rows outer, columns inner, sequential in-place updates).  The
  median-of-three update can only move an endpoint inside the box, so the
  result is a nonempty subset of the input containing every feasible point.

``measurement_constraints`` specializes the constraints to the slab
``y - v_hi <= C z <= y - v_lo`` implied by a bounded-error measurement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .interval import Interval, IntervalVector

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class FaceBox:
    """A box with one component collapsed to a single point."""

    box: IntervalVector
    fixed_index: int
    fixed_side: str

    def __post_init__(self) -> None:
        c = self.box[self.fixed_index]
        if c.lo != c.hi:
            raise ValueError("fixed component of a face must be degenerate")


@dataclass(frozen=True)
class LinearConstraints:
    """Rows of ``M z <= d``."""

    M: tuple[tuple[float, ...], ...]
    d: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.M) != len(self.d):
            raise ValueError("row count of M must equal length of d")

    @classmethod
    def from_arrays(cls, M, d) -> "LinearConstraints":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        d = np.atleast_1d(np.asarray(d, dtype=float))
        return cls(tuple(tuple(row) for row in M), tuple(d))


def _face_bounds(
    v: Sequence[float], w: Sequence[float], index: int, side: str
) -> tuple[list[float], list[float]]:
    """Midpoint-repaired bounds with component ``index`` pinned."""
    vhat = []
    what = []
    for vj, wj in zip(v, w):
        m = 0.5 * (vj + wj)
        vhat.append(vj if vj <= m else m)
        what.append(wj if wj >= m else m)
    if side == LOWER:
        what[index] = vhat[index]
    else:
        vhat[index] = what[index]
    return vhat, what


def face(v: Sequence[float], w: Sequence[float], index: int, side: str) -> FaceBox:
    """The ``index``-th lower/upper face of [v, w] (0-based index).

    For v <= w this is exactly {z in [v, w] : z_index = v_index} (or the
    upper analog).  Crossed components are repaired to their midpoints
    before the face is taken.
    """
    if len(v) != len(w):
        raise ValueError("dimension mismatch")
    if not 0 <= index < len(v):
        raise IndexError(f"face index {index} out of range for dimension {len(v)}")
    if side not in (LOWER, UPPER):
        raise ValueError(f"side must be {LOWER!r} or {UPPER!r}")
    vhat, what = _face_bounds(v, w, index, side)
    return FaceBox(IntervalVector.from_bounds(vhat, what), index, side)


def _tighten_bounds(
    vhat: list[float],
    what: list[float],
    rows: Sequence[tuple[tuple[int, ...], tuple[float, ...]]],
    d: Sequence[float],
) -> int:
    """Single tightening sweep, mutating vhat/what in place.

    ``rows[i]`` holds the nonzero column indices and coefficients of row i.
    Later columns and rows see earlier updates.  Returns how many updates
    clamped at a box endpoint because the constraint cut past the box
    (the signature of an infeasible slab).
    """
    clamped = 0
    for (cols, coeffs), di in zip(rows, d):
        for pos, j in enumerate(cols):
            mij = coeffs[pos]
            acc = di
            for qos, k in enumerate(cols):
                if k == j:
                    continue
                mik = coeffs[qos]
                a = -mik * vhat[k]
                b = -mik * what[k]
                acc += a if a >= b else b
            c = acc / mij
            vj = vhat[j]
            wj = what[j]
            if mij > 0.0:
                # gamma = median{vj, wj, c}; update the upper endpoint
                if c < vj:
                    what[j] = vj
                    clamped += 1
                elif c < wj:
                    what[j] = c
            else:
                if c > wj:
                    vhat[j] = wj
                    clamped += 1
                elif c > vj:
                    vhat[j] = c
    return clamped


def _constraint_rows(
    constraints: LinearConstraints,
) -> list[tuple[tuple[int, ...], tuple[float, ...]]]:
    rows = []
    for row in constraints.M:
        nz = [(j, m) for j, m in enumerate(row) if m != 0.0]
        rows.append((tuple(j for j, _ in nz), tuple(m for _, m in nz)))
    return rows


def tighten_box(box: IntervalVector, constraints: LinearConstraints) -> IntervalVector:
    """Shrink ``box`` against ``M z <= d``; feasible points are never cut."""
    n = box.dim
    for row in constraints.M:
        if len(row) != n:
            raise ValueError("constraint column count must equal box dimension")
    vhat = box.lower()
    what = box.upper()
    _tighten_bounds(vhat, what, _constraint_rows(constraints), constraints.d)
    return IntervalVector.from_bounds(vhat, what)


def measurement_constraints(C, y, v_lo, v_hi) -> LinearConstraints:
    """Slab ``y - v_hi <= C z <= y - v_lo`` as stacked rows [C; -C]."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    v_lo = np.atleast_1d(np.asarray(v_lo, dtype=float))
    v_hi = np.atleast_1d(np.asarray(v_hi, dtype=float))
    n_y = C.shape[0]
    if not (len(y) == len(v_lo) == len(v_hi) == n_y):
        raise ValueError("y and noise bounds must match the output dimension")
    if np.any(v_lo > v_hi):
        raise ValueError("noise bounds must satisfy v_lo <= v_hi")
    M = np.vstack([C, -C])
    d = np.concatenate([y - v_lo, -y + v_hi])
    return LinearConstraints.from_arrays(M, d)


def apply_measurement_constraints(box: IntervalVector, C, y, v_lo, v_hi) -> IntervalVector:
    """Tighten a box against the measurement slab; result is within ``box``."""
    return tighten_box(box, measurement_constraints(C, y, v_lo, v_hi))
