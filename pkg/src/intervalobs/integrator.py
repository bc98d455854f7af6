"""Adaptive explicit Runge-Kutta integration with breakpoint-aware stepping.

A Dormand-Prince 5(4) embedded pair with PI step-size control drives both
the truth simulations and the coupled bound ODEs.  The horizon is split at
the supplied breakpoints and integration restarts on each segment, so
piecewise-constant inputs are never smeared across a switch.  Each accepted
step stores a quartic dense-output polynomial, used both for the requested
output grid and for arbitrary post-hoc queries.

The bound dynamics are only piecewise smooth, so failures are reported as
status codes instead of exceptions and partial results are kept.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .interval import DomainError, IntervalDivisionError

# Dormand-Prince 5(4) tableau (FSAL: the 7th stage is the next step's first).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Coefficients of the degree-4 dense-output polynomial in the step fraction.
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_MAX_CONSECUTIVE_REJECTS = 50
_RHS_ERRORS = (DomainError, IntervalDivisionError, ZeroDivisionError, OverflowError)

COMPLETED = "completed"
DIVERGED = "diverged"
STEP_UNDERFLOW = "step_underflow"
RHS_FAILURE = "rhs_failure"

Rhs = Callable[[float, np.ndarray], np.ndarray]


class _RhsFailed(Exception):
    pass


@dataclass
class IntegConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    max_step: float = math.inf
    blow_up_threshold: float = 1e12
    breakpoints: tuple[float, ...] = ()
    output_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass
class _Step:
    t: float
    h: float
    y: np.ndarray
    q: np.ndarray  # (n, 4) dense coefficients


@dataclass
class Solution:
    """Integration result: accepted grid, output samples, and status."""

    times: np.ndarray
    states: np.ndarray
    status: str
    failure_time: float | None
    output_times: np.ndarray
    output_states: np.ndarray
    steps: list[_Step] = field(repr=False, default_factory=list)

    def dense(self, t: float) -> np.ndarray:
        """Evaluate the piecewise dense-output interpolant at ``t``."""
        if not self.steps:
            raise ValueError("empty solution")
        t0 = self.steps[0].t
        t_end = self.times[-1]
        if not (t0 <= t <= t_end) and not math.isclose(t, t_end, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"time {t} outside integrated range [{t0}, {t_end}]")
        idx = bisect_right([s.t for s in self.steps], t) - 1
        idx = max(idx, 0)
        step = self.steps[idx]
        return _dense_point(step, min(t, step.t + step.h))


def _dense_point(step: _Step, t: float) -> np.ndarray:
    theta = (t - step.t) / step.h
    p = np.array([theta, theta**2, theta**3, theta**4])
    return step.y + step.h * (step.q @ p)


def dense_eval(solution: Solution, t: float) -> np.ndarray:
    return solution.dense(t)


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(rhs, t0, t_end, y, f0, rtol, atol, max_step) -> float:
    scale = atol + rtol * np.abs(y)
    d0 = _rms(y / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0, max_step)
    try:
        f1 = rhs(t0 + h0, y + h0 * f0)
        d2 = _rms((f1 - f0) / scale) / h0
    except _RHS_ERRORS:
        d2 = d1
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100 * h0, h1, t_end - t0, max_step)


def integrate(
    rhs: Rhs,
    y0: Sequence[float],
    t0: float,
    tf: float,
    config: IntegConfig,
) -> Solution:
    """Integrate y' = rhs(t, y) from t0 to tf.

    Returns partial results with a non-``completed`` status when the state
    norm passes the blow-up threshold, the controller stalls, or the RHS
    raises a domain error.
    """
    if tf <= t0:
        raise ValueError("horizon must satisfy t0 < tf")
    y = np.array(y0, dtype=float)
    n = len(y)

    cuts = sorted({b for b in config.breakpoints if t0 < b < tf})
    segments = list(zip([t0] + cuts, cuts + [tf]))

    out_all = [t for t in config.output_times if t0 <= t <= tf + 1e-12]
    out_i = 0
    out_times: list[float] = []
    out_states: list[np.ndarray] = []
    if out_all and out_all[0] <= t0:
        while out_i < len(out_all) and out_all[out_i] <= t0:
            out_times.append(out_all[out_i])
            out_states.append(y.copy())
            out_i += 1

    steps: list[_Step] = []
    grid_t = [t0]
    grid_y = [y.copy()]
    status = COMPLETED
    failure_time: float | None = None
    h: float | None = None

    def wrapped(t: float, state: np.ndarray) -> np.ndarray:
        try:
            return np.asarray(rhs(t, state), dtype=float)
        except _RHS_ERRORS as exc:
            raise _RhsFailed(str(exc)) from exc

    for seg_a, seg_b in segments:
        if status != COMPLETED:
            break
        t = seg_a
        # Evaluate the first stage just above the segment start so step
        # inputs switched exactly at the breakpoint take their new value.
        t_first = min(math.nextafter(seg_a, math.inf), seg_b)
        try:
            k1 = wrapped(t_first, y)
            if h is None:
                h = _initial_step(
                    wrapped, t_first, seg_b, y, k1, config.rel_tol, config.abs_tol, config.max_step
                )
        except _RhsFailed:
            status = RHS_FAILURE
            failure_time = t
            break

        err_prev = 1e-4
        rejects = 0
        K = np.empty((7, n))
        while t < seg_b:
            if status != COMPLETED:
                break
            h = min(h, seg_b - t, config.max_step)
            if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
                status = STEP_UNDERFLOW
                failure_time = t
                break
            K[0] = k1
            try:
                for s in range(1, 6):
                    arg = y + h * (_A[s] @ K[:s])
                    K[s] = wrapped(t + _C[s] * h, arg)
                y1 = y + h * (_A[6] @ K[:6])
                K[6] = wrapped(t + h, y1)
            except _RhsFailed:
                status = RHS_FAILURE
                failure_time = t
                break
            err_vec = h * (_E @ K)
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y1))
            with np.errstate(invalid="ignore", over="ignore"):
                err = _rms(err_vec / scale)
            if not math.isfinite(err):
                err = math.inf

            if err <= 1.0:
                q = K.T @ _P
                steps.append(_Step(t, h, y.copy(), q))
                t_new = t + h
                if t_new >= seg_b - 1e-14 * max(abs(seg_b), 1.0):
                    t_new = seg_b
                while out_i < len(out_all) and out_all[out_i] <= t_new + 1e-14:
                    tq = min(out_all[out_i], t_new)
                    out_times.append(out_all[out_i])
                    out_states.append(_dense_point(steps[-1], tq))
                    out_i += 1
                t = t_new
                y = y1
                k1 = K[6]
                grid_t.append(t)
                grid_y.append(y.copy())
                if np.max(np.abs(y)) > config.blow_up_threshold:
                    status = DIVERGED
                    failure_time = t
                    break
                if err == 0.0:
                    factor = 10.0
                else:
                    factor = 0.9 * err ** (-0.17) * err_prev**0.04
                    factor = min(10.0, max(0.2, factor))
                if rejects:
                    factor = min(factor, 1.0)
                h *= factor
                err_prev = max(err, 1e-4)
                rejects = 0
            else:
                rejects += 1
                if rejects > _MAX_CONSECUTIVE_REJECTS:
                    status = STEP_UNDERFLOW
                    failure_time = t
                    break
                h *= max(0.2, 0.9 * err**-0.2)

    return Solution(
        times=np.array(grid_t),
        states=np.array(grid_y),
        status=status,
        failure_time=failure_time,
        output_times=np.array(out_times),
        output_states=np.array(out_states) if out_states else np.empty((0, n)),
        steps=steps,
    )
