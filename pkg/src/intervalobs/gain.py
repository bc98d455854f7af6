"""Observer gain synthesis by linear programming.

A gain L certifies contraction of the estimate width for the linear part
(A, C) when every row i satisfies

    m_ii + sum_{j != i} |m_ij| < 0,      M = A - L C,

a Gershgorin-type bound on the width dynamics.  ``synthesize_gain`` finds
such an L by minimizing an upper bound s on the row expressions subject to
linear constraints; the optimum s* < 0 certifies the gain.  The LP is tiny
(tens of variables), so a dense two-phase simplex with Bland's rule is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SynthesisFailed(RuntimeError):
    """No gain certificate at the given bounds (optimal s* >= 0)."""

    def __init__(self, message: str, result: "GainResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass
class LinearObserverData:
    """Linear dynamics matrix A and output matrix C."""

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self) -> None:
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.C.shape[1] != n:
            raise ValueError("C column count must match A")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


@dataclass
class GainResult:
    L: np.ndarray
    s_star: float
    margin: float
    certified: bool


@dataclass
class DenseLP:
    """min objective @ x  s.t.  rows @ x <= rhs,  lower <= x <= upper."""

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        self.rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = len(self.objective)
        if n < 1:
            raise ValueError("LP needs at least one variable")
        if self.rows.size and self.rows.shape[1] != n:
            raise ValueError("row width must match variable count")
        if len(self.rhs) != self.rows.shape[0]:
            raise ValueError("rhs length must match row count")
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bound vectors must match variable count")


@dataclass
class LPSolution:
    values: np.ndarray
    objective: float
    status: str  # optimal | infeasible | unbounded


_PIVOT_TOL = 1e-10


def _simplex(tableau: np.ndarray, basis: list[int], ncols: int) -> str:
    """Minimize the cost row in place with Bland's rule; returns a status."""
    m = tableau.shape[0] - 1
    for _ in range(100_000):
        cost = tableau[-1, :ncols]
        enter = -1
        for j in range(ncols):
            if cost[j] < -_PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave = -1
        best = math.inf
        for i in range(m):
            a = tableau[i, enter]
            if a > _PIVOT_TOL:
                ratio = tableau[i, -1] / a
                if ratio < best - _PIVOT_TOL or (
                    abs(ratio - best) <= _PIVOT_TOL and (leave < 0 or basis[i] < basis[leave])
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        piv = tableau[leave, enter]
        tableau[leave] /= piv
        for i in range(m + 1):
            if i != leave and tableau[i, enter] != 0.0:
                tableau[i] -= tableau[i, enter] * tableau[leave]
        basis[leave] = enter
    raise RuntimeError("simplex iteration cap exceeded")


def solve_lp(lp: DenseLP) -> LPSolution:
    """Dense two-phase simplex over bounded variables.

    Variables are shifted/mirrored/split to nonnegative form, slacks turn
    inequalities into equations, and artificials make phase 1 feasible.
    """
    n = len(lp.objective)
    nan = float("nan")

    # Nonnegative substitution per variable: x = offset + sign * z  (or split).
    col_of: list[list[tuple[int, float]]] = []
    offsets = np.zeros(n)
    extra_rows: list[tuple[int, float]] = []  # (z column, upper bound on z)
    nz = 0
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo > hi:
            return LPSolution(np.full(n, nan), nan, "infeasible")
        if math.isfinite(lo):
            col_of.append([(nz, 1.0)])
            offsets[j] = lo
            if math.isfinite(hi):
                extra_rows.append((nz, hi - lo))
            nz += 1
        elif math.isfinite(hi):
            col_of.append([(nz, -1.0)])
            offsets[j] = hi
            nz += 1
        else:
            col_of.append([(nz, 1.0), (nz + 1, -1.0)])
            nz += 2

    m_in = lp.rows.shape[0]
    m = m_in + len(extra_rows)
    A = np.zeros((m, nz))
    b = np.zeros(m)
    for i in range(m_in):
        b[i] = lp.rhs[i]
        for j in range(n):
            a = lp.rows[i, j]
            if a != 0.0:
                b[i] -= a * offsets[j]
                for col, sign in col_of[j]:
                    A[i, col] += sign * a
    for k, (col, ub) in enumerate(extra_rows):
        A[m_in + k, col] = 1.0
        b[m_in + k] = ub

    # Slacks; flip rows with negative rhs and give them artificials.
    flip = b < 0.0
    A[flip] *= -1.0
    b[flip] *= -1.0
    art_rows = np.nonzero(flip)[0]
    n_art = len(art_rows)
    ncols = nz + m
    tableau = np.zeros((m + 1, ncols + n_art + 1))
    tableau[:m, :nz] = A
    for i in range(m):
        tableau[i, nz + i] = -1.0 if flip[i] else 1.0
    for k, i in enumerate(art_rows):
        tableau[i, ncols + k] = 1.0
    tableau[:m, -1] = b
    basis = [ncols + list(art_rows).index(i) if flip[i] else nz + i for i in range(m)]

    if n_art:
        # Phase 1: minimize the artificial sum.
        tableau[-1, :] = 0.0
        for i in art_rows:
            tableau[-1, :] -= tableau[i, :]
        tableau[-1, ncols : ncols + n_art] = 0.0
        status = _simplex(tableau, basis, ncols + n_art)
        if status != "optimal" or tableau[-1, -1] < -1e-8:
            return LPSolution(np.full(n, nan), nan, "infeasible")
        # Pivot any artificial still basic at level zero out of the basis.
        # An all-zero row (redundant constraint) keeps its artificial; the
        # phase-2 entering scan never touches artificial columns.
        for i in range(m):
            if basis[i] >= ncols:
                for j in range(ncols):
                    if abs(tableau[i, j]) > _PIVOT_TOL:
                        piv = tableau[i, j]
                        tableau[i] /= piv
                        for r in range(m + 1):
                            if r != i and tableau[r, j] != 0.0:
                                tableau[r] -= tableau[r, j] * tableau[i]
                        basis[i] = j
                        break

    # Phase 2 cost row: reduced costs for the true objective.
    cz = np.zeros(ncols)
    for j in range(n):
        cj = lp.objective[j]
        if cj != 0.0:
            for col, sign in col_of[j]:
                cz[col] += sign * cj
    tableau[-1, :] = 0.0
    tableau[-1, :ncols] = cz
    for i in range(tableau.shape[0] - 1):
        bj = basis[i]
        if bj < ncols and cz[bj] != 0.0:
            tableau[-1, :] -= cz[bj] * tableau[i, :]
    status = _simplex(tableau, basis, ncols)
    if status == "unbounded":
        return LPSolution(np.full(n, nan), -math.inf, "unbounded")

    z = np.zeros(ncols)
    for i in range(tableau.shape[0] - 1):
        if basis[i] < ncols:
            z[basis[i]] = tableau[i, -1]
    x = offsets.copy()
    for j in range(n):
        for col, sign in col_of[j]:
            x[j] += sign * z[col]
    return LPSolution(x, float(lp.objective @ x), "optimal")


def build_gain_lp(data: LinearObserverData, s_min: float, l_bound: float) -> DenseLP:
    """LP over (L entries, off-diagonal slack matrix B, upper bound s).

    Constraint families, with C_j the j-th column of C and l_i row i of L:

        l_i' C_j - b_ij <= a_ij          for all i, j != i
       -l_i' C_j - b_ij <= -a_ij         for all i, j != i
       -l_i' C_i + sum_{j != i} b_ij - s <= -a_ii   for all i

    so b_ij >= |a_ij - l_i' C_j| and s bounds every row expression.
    Diagonal b_ii never enter and are not created.
    """
    if s_min >= 0:
        raise ValueError("s_min must be negative")
    if l_bound <= 0:
        raise ValueError("l_bound must be positive")
    n, p = data.n_x, data.n_y
    A, C = data.A, data.C

    def l_idx(i: int, q: int) -> int:
        return i * p + q

    b_index: dict[tuple[int, int], int] = {}
    for i in range(n):
        for j in range(n):
            if j != i:
                b_index[(i, j)] = n * p + len(b_index)
    s_idx = n * p + len(b_index)
    nv = s_idx + 1

    rows = []
    rhs = []
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            r1 = np.zeros(nv)
            for q in range(p):
                r1[l_idx(i, q)] = C[q, j]
            r1[b_index[(i, j)]] = -1.0
            rows.append(r1)
            rhs.append(A[i, j])
            r2 = -r1.copy()
            r2[b_index[(i, j)]] = -1.0
            rows.append(r2)
            rhs.append(-A[i, j])
    for i in range(n):
        r = np.zeros(nv)
        for q in range(p):
            r[l_idx(i, q)] = -C[q, i]
        for j in range(n):
            if j != i:
                r[b_index[(i, j)]] = 1.0
        r[s_idx] = -1.0
        rows.append(r)
        rhs.append(-A[i, i])

    objective = np.zeros(nv)
    objective[s_idx] = 1.0
    lower = np.concatenate([np.full(n * p, -l_bound), np.zeros(len(b_index)), [s_min]])
    upper = np.concatenate([np.full(n * p, l_bound), np.full(len(b_index), math.inf), [math.inf]])
    return DenseLP(objective, np.array(rows), np.array(rhs), lower, upper)


def margin_of(data: LinearObserverData, L) -> float:
    """Worst row of the Gershgorin expression for M = A - L C."""
    L = np.atleast_2d(np.asarray(L, dtype=float)).reshape(data.n_x, data.n_y)
    M = data.A - L @ data.C
    rows = np.diag(M) + np.sum(np.abs(M), axis=1) - np.abs(np.diag(M))
    return float(np.max(rows))


def synthesize_gain(
    data: LinearObserverData, s_min: float = -10.0, l_bound: float = 100.0
) -> GainResult:
    """Solve the gain LP and certify the result against the row test.

    Raises :class:`SynthesisFailed` when the optimum s* is nonnegative, in
    which case no gain within the bounds contracts the width dynamics.
    """
    lp = build_gain_lp(data, s_min, l_bound)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise SynthesisFailed(f"gain LP terminated with status {sol.status}")
    n, p = data.n_x, data.n_y
    L = sol.values[: n * p].reshape(n, p)
    s_star = float(sol.objective)
    margin = margin_of(data, L)
    result = GainResult(L=L, s_star=s_star, margin=margin, certified=margin < 0.0)
    if s_star >= 0.0:
        raise SynthesisFailed(
            f"no certificate: optimal bound s* = {s_star:.6g} is nonnegative", result
        )
    return result
