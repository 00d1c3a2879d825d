"""Crank-Nicolson reference solver for the boundary-controlled heat equation.

Used only as an independent check on the modal solution.  Neumann data enter
through ghost nodes; the time grid is aligned with the control's switches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .spectral_heat import BangBangControl, CosineSeries

MIN_SEGMENT_FRACTION = 1e-10


@dataclass
class SegmentPlan:
    durations: list
    values: list
    steps: list
    defect: float  # L1 change of the control caused by merging tiny segments


def plan_segments(control: BangBangControl, nt: int, min_steps: int = 1) -> SegmentPlan:
    """Distribute ``nt`` steps over the control's segments, merging those shorter than ``T * 1e-10``."""
    if nt < 1:
        raise ValueError("nt must be at least 1")
    dt_min = control.T * MIN_SEGMENT_FRACTION
    durations, values, defect = [], [], 0.0
    for th_a, th_b, u in control.segments():
        dur = th_a - th_b
        if dur < dt_min and durations:
            durations[-1] += dur
            defect += 2 * dur
            continue
        if values and values[-1] == u:
            durations[-1] += dur
        else:
            durations.append(dur)
            values.append(u)
    steps = [max(min_steps, int(round(nt * d / control.T))) for d in durations]
    return SegmentPlan(durations, values, steps, defect)


def _operator(nx: int):
    """Banded second-difference matrix with ghost-node Neumann rows, and the flux vector."""
    h = 1.0 / (nx - 1)
    lower = np.full(nx, 1.0)
    diag = np.full(nx, -2.0)
    upper = np.full(nx, 1.0)
    upper[1] = 2.0  # row 0: (2 y1 - 2 y0) / h^2
    lower[-2] = 2.0  # row nx-1: (2 y_{nx-2} - 2 y_{nx-1}) / h^2
    ab = np.vstack([upper, diag, lower]) / h**2
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0
    flux = np.zeros(nx)
    flux[-1] = 2.0 / h
    return ab, flux


def _apply(ab: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = ab[1] * y
    out[:-1] += ab[0, 1:] * y[1:]
    out[1:] += ab[2, :-1] * y[:-1]
    return out


def crank_nicolson_solve(control: BangBangControl, nx: int, nt: int, min_steps: int = 1) -> np.ndarray:
    """Terminal values ``y(T, x_i)`` on the uniform grid ``x_i = i / (nx - 1)``."""
    if nx < 3:
        raise ValueError("nx must be at least 3")
    plan = plan_segments(control, nt, min_steps)
    ab, flux = _operator(nx)
    y = np.zeros(nx)
    for dur, u, n in zip(plan.durations, plan.values, plan.steps):
        dt = dur / n
        lhs = -0.5 * dt * ab
        lhs[1] += 1.0
        src = dt * u * flux
        for _ in range(n):
            rhs = y + 0.5 * dt * _apply(ab, y) + src
            y = solve_banded((1, 1), lhs, rhs)
    return y


def grid(nx: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, nx)


def trapezoid_l2(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=float)
    h = 1.0 / (v.size - 1)
    sq = v**2
    return math.sqrt(h * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


def compare_l2(grid_values, series: CosineSeries) -> float:
    """Trapezoidal L2(0, 1) distance between grid values and the series at the nodes."""
    g = np.asarray(grid_values, dtype=float)
    _, s = series.sample_uniform(g.size)
    return trapezoid_l2(g - s)


def observed_orders(errors) -> list[float]:
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]
