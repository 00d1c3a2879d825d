"""Assembly of a boundary control problem whose optimal control is the given bang-bang law.

The terminal datum ``w`` makes the adjoint trace equal to ``P_L``; the control is
minus its sign, ``y_d`` is chosen as ``ybar(T) - w`` so that this control is optimal.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from mpmath import mp

from .fd_oracle import compare_l2, crank_nicolson_solve
from .sequence import ChatterSequence
from .series_eval import find_sign_changes, partial_sum_delta
from .spectral_heat import (
    PI2,
    BangBangControl,
    CosineSeries,
    forward_terminal_state,
    terminal_datum_w,
    trace_abs_values,
    trace_slope_bound,
    trace_values,
)


class InstanceError(ValueError):
    pass


@dataclass
class Diagnostics:
    objective_value: float
    interior_switch_count: int
    sign_residual: Optional[float] = None
    oracle_l2_gap: Optional[float] = None
    forward_truncation: float = 0.0


@dataclass
class ChatteringInstance:
    T: float
    L: int
    seq: ChatterSequence
    w: CosineSeries
    control: BangBangControl
    terminal_state: CosineSeries
    y_d: CosineSeries
    diagnostics: Diagnostics

    def to_json(self, samples: int = 1001) -> dict:
        x, yd = self.y_d.sample_uniform(samples)
        _, wv = self.w.sample_uniform(samples)
        return {
            "T": repr(self.T),
            "L": self.L,
            "sequence": self.seq.to_json(),
            "w": self.w.to_json(),
            "y_d": {**self.y_d.to_json(), "grid": {"x": x.tolist(), "value": yd.tolist()}},
            "w_grid": {"x": x.tolist(), "value": wv.tolist()},
            "terminal_state": self.terminal_state.to_json(),
            "control": self.control.to_json(),
            "diagnostics": asdict(self.diagnostics),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ChatteringInstance":
        return cls(
            T=float(doc["T"]),
            L=int(doc["L"]),
            seq=ChatterSequence.from_json(doc["sequence"]),
            w=CosineSeries.from_json(doc["w"]),
            control=BangBangControl.from_json(doc["control"]),
            terminal_state=CosineSeries.from_json(doc["terminal_state"]),
            y_d=CosineSeries.from_json(doc["y_d"]),
            diagnostics=Diagnostics(**doc["diagnostics"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def minimal_horizon(seq: ChatterSequence) -> float:
    """``ln(1/z_1) / pi^2``: below this the first probe time is not positive."""
    with mp.workprec(seq.precision_bits):
        return float(-mp.log1p(-seq.delta(1)) / mp.pi**2)


def switch_offsets(seq: ChatterSequence, L: int, T: float, root_sampling: int = 64) -> tuple[list, int]:
    """Offsets ``T - t`` of the sign changes of the adjoint trace on ``(0, T)``, and ``-sign`` at ``t = 0``."""
    with mp.workprec(seq.precision_bits):
        delta_start = -mp.expm1(-mp.pi**2 * mp.mpf(T))  # 1 - z at t = 0
        scan = find_sign_changes(seq, L, root_sampling, delta_hi=delta_start, include_tail=True)
        offsets = [float(-mp.log1p(-d) / mp.pi**2) for d in scan.deltas]
        start = partial_sum_delta(seq, L, delta_start)[0]
    offsets = sorted({th for th in offsets if 0 < th < T}, reverse=True)
    if start == 0:
        raise InstanceError("adjoint trace vanishes at t = 0")
    return offsets, -1 if start > 0 else 1


def build_instance(
    seq: ChatterSequence,
    L: int,
    T: float = 1.0,
    root_sampling: int = 64,
    *,
    mode_tol: float = 1e-6,
    oracle_nx: Optional[int] = None,
    oracle_nt: int = 2000,
    oracle_min_steps: int = 200,
) -> ChatteringInstance:
    if not 1 <= L <= seq.K:
        raise InstanceError(f"L={L} outside 1..{seq.K}")
    bound = minimal_horizon(seq)
    if not T > bound:
        raise InstanceError(f"T={T} must exceed ln(1/z_1)/pi^2 = {bound:.6g}")
    w = terminal_datum_w(seq, L)
    offsets, initial_sign = switch_offsets(seq, L, T, root_sampling)
    control = BangBangControl(T, initial_sign, tuple(offsets))
    ybar = forward_terminal_state(control, tol=mode_tol)
    y_d = ybar.subtract(w)
    diag = Diagnostics(
        objective_value=0.5 * w.norm2(),
        interior_switch_count=len(offsets),
        forward_truncation=ybar.truncation,
    )
    inst = ChatteringInstance(T, L, seq, w, control, ybar, y_d, diag)
    if oracle_nx is not None:
        fd = crank_nicolson_solve(control, oracle_nx, oracle_nt, oracle_min_steps)
        diag.oracle_l2_gap = compare_l2(fd, ybar)
    return inst


def exact_objective(seq: ChatterSequence, L: int) -> Fraction:
    """``(1/4) sum_{m <= r_L} m^-2`` as an exact rational."""
    return sum((Fraction(1, h * h) for _, h, _ in seq.nonzero(L)), Fraction(0)) / 4


def _segment_integral(seq: ChatterSequence, L: int, th_a, th_b) -> np.ndarray:
    """``int psi(t, 1) dt`` over offsets ``[th_b, th_a]`` in closed form."""
    th_a, th_b = np.asarray(th_a, dtype=float), np.asarray(th_b, dtype=float)
    out = np.zeros(np.broadcast(th_a, th_b).shape)
    for m, h, sign in seq.nonzero(L):
        lam = float(m) ** 2 * PI2
        out += sign / h * (-np.exp(-lam * th_b) * np.expm1(-lam * (th_a - th_b))) / lam
    return out


@dataclass
class OptimalityReport:
    sign_residual: float
    sign_points: int
    vi_min: float
    vi_eps: float
    vi_exact_min: float
    vi_exact_eps: float
    opposite_control_value: float
    terminal_defect: float
    terminal_exact: bool
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _sign_law_grid(inst: ChatteringInstance, n: int) -> np.ndarray:
    T = inst.T
    uniform = T - np.arange(n) * (T / n)
    # the switches crowd at t = T, so sample the offset logarithmically as well
    smallest = min([*inst.control.offsets, T]) * 1e-3
    logs = np.geomspace(smallest, T, n)
    return np.concatenate([uniform, logs])


def verify_optimality(
    inst: ChatteringInstance,
    t_grid_size: int = 10_000,
    control_samples: int = 100,
    seed: int = 0,
    collar: float = 1e-12,
) -> OptimalityReport:
    """Check the bang-bang sign law, the variational inequality and the adjoint terminal datum."""
    seq, L, T, ctrl = inst.seq, inst.L, inst.T, inst.control

    # (a) ubar = -sgn psi(., 1) away from the switches
    theta = _sign_law_grid(inst, t_grid_size)
    sw = np.asarray(ctrl.offsets)
    if sw.size:
        near = np.min(np.abs(theta[:, None] - sw[None, :]), axis=1) < collar
        theta = theta[~near]
    psi = trace_values(seq, L, theta)
    mismatch = ctrl.value_at_offset(theta) != -np.sign(psi)
    sign_residual = float(np.count_nonzero(mismatch)) / theta.size

    # (b) discrete variational inequality on a uniform cell grid
    n = t_grid_size
    h = T / n
    th_left = T - np.arange(n) * h  # offset at the left end of each cell
    th_right = np.maximum(th_left - h, 0.0)
    th_mid = th_left - 0.5 * h
    psi_mid = trace_values(seq, L, th_mid)
    ubar_mid = ctrl.value_at_offset(th_mid)
    lip = trace_slope_bound(seq, L, th_right)
    has_switch = np.zeros(n, dtype=bool)
    if sw.size:
        idx = np.clip(((T - sw) / h).astype(int), 0, n - 1)
        has_switch[idx] = True
    # smooth cells: midpoint error <= h^2/4 * Lip * |u - ubar|; switch cells: crude L1 bound
    cell_eps = np.where(has_switch, 4 * h * (np.abs(psi_mid) + 0.5 * h * lip), 0.5 * h**2 * lip)
    eps_quad = float(cell_eps.sum())

    cell_int = _segment_integral(seq, L, th_left, th_right)
    ubar_int = sum(u * _segment_integral(seq, L, a, b) for a, b, u in ctrl.segments())
    rounding = 64 * np.finfo(float).eps * float(np.sum(trace_abs_values(seq, L, th_mid)) * h + 1.0)

    rng = np.random.default_rng(seed)
    trials = [rng.uniform(-1, 1, n) for _ in range(control_samples)]
    trials.append(-np.sign(cell_int))  # best grid-constant competitor
    trials.append(ubar_mid.astype(float))
    vi_mid, vi_exact = [], []
    for u in trials:
        vi_mid.append(float(np.sum(h * psi_mid * (u - ubar_mid))))
        vi_exact.append(float(np.sum(cell_int * u) - ubar_int))
    opposite = float(-2 * ubar_int)  # u = -ubar gives 2 int |psi|

    # (c) terminal datum of the adjoint: ybar(T) - y_d reproduces w up to the rounding of y_d
    exact, defect = True, 0.0
    modes = np.union1d(inst.terminal_state.n, inst.w.n)
    for k in np.concatenate([[0], modes]):
        yb = Fraction(inst.terminal_state.coefficient(int(k)))
        yd = inst.y_d.coefficient(int(k))
        wv = Fraction(inst.w.coefficient(int(k)))
        gap = abs(yb - Fraction(yd) - wv)
        half_ulp = Fraction(math.ulp(yd)) / 2 if yd != 0 else Fraction(0)
        exact = exact and gap <= half_ulp
        defect = max(defect, float(gap))

    report = OptimalityReport(
        sign_residual=sign_residual,
        sign_points=int(theta.size),
        vi_min=min(vi_mid),
        vi_eps=eps_quad,
        vi_exact_min=min(vi_exact),
        vi_exact_eps=rounding,
        opposite_control_value=opposite,
        terminal_defect=defect,
        terminal_exact=exact,
    )
    report.checks = {
        "sign_law": sign_residual == 0.0,
        "variational_inequality": report.vi_min >= -eps_quad,
        "variational_inequality_exact": bool(report.vi_exact_min >= -rounding),
        "opposite_control_positive": opposite > 0,
        "adjoint_terminal_datum": exact,
    }
    inst.diagnostics.sign_residual = sign_residual
    return report


@dataclass
class PositivityCertificate:
    parseval: float
    quadrature: float
    exact: Fraction

    @property
    def value(self) -> float:
        return self.parseval


def positivity_certificate(inst: ChatteringInstance, tol: float = 1e-8) -> PositivityCertificate:
    """``||w||^2`` by Parseval on the blocks and by trapezoidal quadrature of samples.

    The trapezoidal rule on more than ``q_L`` intervals is exact for ``w^2``, so
    the two values agree to rounding.
    """
    exact = 2 * exact_objective(inst.seq, inst.L)
    parseval = inst.w.norm2()
    points = 4 * inst.w.N + 1
    _, vals = inst.w.sample_uniform(points)
    sq = vals**2
    quad = (sq.sum() - 0.5 * (sq[0] + sq[-1])) / (points - 1)
    if abs(quad - parseval) > tol * max(1.0, parseval):
        raise InstanceError(f"Parseval {parseval} and quadrature {quad} disagree")
    if not parseval > 0:
        raise InstanceError("terminal datum vanishes")
    return PositivityCertificate(parseval, float(quad), exact)
