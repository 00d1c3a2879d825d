"""Cosine-series machinery for the heat equation on (0, 1) with Neumann boundaries.

Times close to the horizon are handled through the offset ``theta = T - t``,
which is what every formula here actually consumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from mpmath import mp

from .sequence import ChatterSequence
from .series_eval import partial_sum_delta

PI2 = math.pi**2
MAX_MODES = 100_000
_CHUNK = 4096


def _cos_n_pi_x(n: np.ndarray, x: np.ndarray) -> np.ndarray:
    # reduce n*x mod 2 first so integer multiples of pi are exact
    return np.cos(np.pi * np.mod(np.multiply.outer(x, n), 2.0))


@dataclass(frozen=True)
class CosineSeries:
    """``a0 + sum_n a_n cos(n pi x)`` on (0, 1), stored as (mode, coefficient) pairs."""

    a0: float
    n: np.ndarray
    a: np.ndarray
    N: int
    truncation: float = 0.0  # reported bound on the neglected modes

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64)
        a = np.asarray(self.a, dtype=float)
        if n.shape != a.shape:
            raise ValueError("mode and coefficient arrays differ in length")
        if n.size and (n.min() < 1 or np.any(np.diff(n) <= 0)):
            raise ValueError("mode numbers must be positive and strictly increasing")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "a", a)

    @classmethod
    def dense(cls, a0: float, coeffs: Sequence[float], truncation: float = 0.0) -> "CosineSeries":
        coeffs = np.asarray(coeffs, dtype=float)
        return cls(float(a0), np.arange(1, coeffs.size + 1), coeffs, int(coeffs.size), truncation)

    def coefficient(self, n: int) -> float:
        if n == 0:
            return self.a0
        i = np.searchsorted(self.n, n)
        return float(self.a[i]) if i < self.n.size and self.n[i] == n else 0.0

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full(x.shape, self.a0)
        for i in range(0, self.n.size, _CHUNK):
            n, a = self.n[i : i + _CHUNK], self.a[i : i + _CHUNK]
            out += _cos_n_pi_x(n, x) @ a
        return out

    def sample_uniform(self, points: int) -> tuple[np.ndarray, np.ndarray]:
        """Values on ``x_j = j / (points - 1)`` via aliasing onto a DCT-I grid."""
        from scipy.fft import dct

        M = points - 1
        if M < 1:
            raise ValueError("need at least two grid points")
        folded = np.zeros(M + 1)
        r = np.mod(self.n, 2 * M)
        r = np.where(r > M, 2 * M - r, r)
        np.add.at(folded, r, self.a)
        folded[0] += self.a0
        # DCT-I halves the end weights relative to a plain cosine sum
        c = folded.copy()
        c[0] *= 2.0
        c[-1] *= 2.0
        y = dct(c, type=1) / 2.0
        return np.linspace(0.0, 1.0, points), y

    def norm2(self) -> float:
        """Squared L2(0, 1) norm by Parseval."""
        return math.fsum([self.a0**2] + list(0.5 * self.a**2))

    def subtract(self, other: "CosineSeries") -> "CosineSeries":
        n = np.union1d(self.n, other.n)
        a = np.zeros(n.size)
        a[np.searchsorted(n, self.n)] += self.a
        a[np.searchsorted(n, other.n)] -= other.a
        return CosineSeries(self.a0 - other.a0, n, a, max(self.N, other.N), self.truncation + other.truncation)

    def to_json(self) -> dict:
        return {
            "a0": self.a0,
            "N": self.N,
            "truncation": self.truncation,
            "modes": [{"n": int(k), "a_n": float(v)} for k, v in zip(self.n, self.a) if v != 0.0],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CosineSeries":
        modes = doc["modes"]
        return cls(
            float(doc["a0"]),
            np.array([m["n"] for m in modes], dtype=np.int64),
            np.array([m["a_n"] for m in modes], dtype=float),
            int(doc["N"]),
            float(doc.get("truncation", 0.0)),
        )


@dataclass(frozen=True)
class BangBangControl:
    """Piecewise constant control with values in {-1, +1} on (0, T).

    Switches are kept as offsets ``theta_j = T - t_j`` (strictly decreasing),
    which stay accurate when switches crowd towards ``T``.
    """

    T: float
    initial_sign: int
    offsets: tuple = field(default=())

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if self.initial_sign not in (1, -1):
            raise ValueError("initial sign must be +1 or -1")
        th = tuple(float(v) for v in self.offsets)
        if any(not 0 < v < self.T for v in th):
            raise ValueError("switching times must lie strictly inside (0, T)")
        if any(b >= a for a, b in zip(th, th[1:])):
            raise ValueError("switching times must be strictly increasing")
        object.__setattr__(self, "offsets", th)

    @classmethod
    def from_times(cls, T: float, initial_sign: int, switch_times: Sequence[float]) -> "BangBangControl":
        return cls(T, initial_sign, tuple(T - t for t in switch_times))

    @property
    def switch_times(self) -> tuple:
        return tuple(self.T - th for th in self.offsets)

    def segments(self) -> list[tuple[float, float, int]]:
        """``(theta_start, theta_end, value)`` per segment, ``theta_start > theta_end``."""
        bounds = [self.T, *self.offsets, 0.0]
        return [(bounds[i], bounds[i + 1], self.initial_sign * (-1) ** i) for i in range(len(bounds) - 1)]

    def value_at_offset(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        passed = np.searchsorted(-np.asarray(self.offsets), -theta, side="right")
        return self.initial_sign * np.where(passed % 2 == 0, 1, -1)

    def __call__(self, t) -> np.ndarray:
        return self.value_at_offset(self.T - np.asarray(t, dtype=float))

    def integral(self) -> float:
        return math.fsum(u * (a - b) for a, b, u in self.segments())

    def to_json(self) -> dict:
        return {
            "T": repr(self.T),
            "initial_sign": self.initial_sign,
            "switch_offsets": [repr(v) for v in self.offsets],
            "switch_times": [repr(v) for v in self.switch_times],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BangBangControl":
        return cls(float(doc["T"]), int(doc["initial_sign"]), tuple(float(v) for v in doc["switch_offsets"]))


def terminal_datum_w(seq: ChatterSequence, L: int) -> CosineSeries:
    """Truncated terminal datum with coefficients ``(-1)**m beta_m``, ``m <= q_L``."""
    if not 1 <= L <= seq.K:
        raise ValueError(f"L={L} outside 1..{seq.K}")
    n, a = [], []
    for m, h, sign in seq.nonzero(L):
        n.append(m)
        a.append((-1) ** m * sign / h)
    return CosineSeries(0.0, np.array(n), np.array(a), seq.q(L))


@dataclass(frozen=True)
class SwitchSample:
    k: int
    t: float
    theta: float
    interior: bool


def switching_samples(seq: ChatterSequence, L: int, T: float) -> list[SwitchSample]:
    """Times ``t_k = T + log(z_k) / pi**2`` where the adjoint trace has sign ``(-1)**(k+1)``."""
    if T <= 0:
        raise ValueError("T must be positive")
    out = []
    with mp.workprec(seq.precision_bits):
        for k in range(1, L + 1):
            theta = float(-mp.log1p(-seq.delta(k)) / mp.pi**2)
            out.append(SwitchSample(k, T - theta, theta, theta < T))
    return out


def greens_mode_cutoff(s: float, tol: float = 1e-16) -> int:
    N = 1
    while greens_truncation_bound(s, N) > tol:
        N *= 2
    return N


def greens_truncation_bound(s: float, N: int) -> float:
    return 2 * math.exp(-((N + 1) ** 2) * PI2 * s) / (-math.expm1(-(2 * N + 3) * PI2 * s))


def greens_kernel(x, xi, s: float, N: Optional[int] = None) -> tuple[np.ndarray, float]:
    """Neumann heat kernel ``1 + 2 sum_{n<=N} cos(n pi x) cos(n pi xi) exp(-n^2 pi^2 s)``.

    Returns the truncated value and a bound on the neglected modes.
    """
    if s <= 0:
        raise ValueError("the heat kernel needs s > 0")
    N = greens_mode_cutoff(s) if N is None else N
    n = np.arange(1, N + 1)
    decay = np.exp(-(n**2) * PI2 * s)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    val = 1 + 2 * (_cos_n_pi_x(n, x) * decay) @ _cos_n_pi_x(n, xi).T
    return np.squeeze(val), greens_truncation_bound(s, N)


def adjoint_trace_offset(seq: ChatterSequence, L: int, theta):
    """``psi(T - theta, 1) = P_L(exp(-pi^2 theta))`` at the sequence precision."""
    with mp.workprec(seq.precision_bits):
        theta = mp.mpf(theta)
        if theta <= 0:
            raise ValueError("the adjoint trace is evaluated for t < T")
        return partial_sum_delta(seq, L, -mp.expm1(-mp.pi**2 * theta))[0]


def adjoint_trace(seq: ChatterSequence, L: int, T: float, t: float):
    if not 0 <= t < T:
        raise ValueError(f"t={t} outside [0, T)")
    return adjoint_trace_offset(seq, L, T - t)


def trace_values(seq: ChatterSequence, L: int, theta) -> np.ndarray:
    """Double-precision ``psi(T - theta, 1)`` for an array of offsets."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape)
    terms = sorted(seq.nonzero(L), key=lambda t: -t[0])
    for m, h, sign in terms:
        out += sign / h * np.exp(-float(m) ** 2 * PI2 * theta)
    return out


def trace_abs_values(seq: ChatterSequence, L: int, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return sum(np.exp(-float(m) ** 2 * PI2 * theta) / h for m, h, _ in seq.nonzero(L))


def trace_slope_bound(seq: ChatterSequence, L: int, theta) -> np.ndarray:
    """Bound on ``|d psi(t, 1) / dt|`` for offsets at least ``theta``."""
    theta = np.asarray(theta, dtype=float)
    return sum(float(m) ** 2 * PI2 / h * np.exp(-float(m) ** 2 * PI2 * theta) for m, h, _ in seq.nonzero(L))


def adjoint_state(seq: ChatterSequence, L: int, T: float, t: float, xs) -> np.ndarray:
    """``psi(t, x) = sum (-1)^m beta_m cos(m pi x) exp(-m^2 pi^2 (T - t))``."""
    if not 0 <= t < T:
        raise ValueError(f"t={t} outside [0, T)")
    theta = T - t
    w = terminal_datum_w(seq, L)
    decay = np.exp(-w.n.astype(float) ** 2 * PI2 * theta)
    return CosineSeries(0.0, w.n, w.a * decay, w.N)(xs)


def forward_mode_cutoff(tol: float = 1e-6, cap: int = MAX_MODES) -> tuple[int, float]:
    """Modes needed so the neglected tail ``sum_{n>N} 4/(n pi)^2 <= 4/(pi^2 N)`` is below ``tol/2``."""
    N = min(int(math.ceil(8.0 / (PI2 * tol))), cap)
    return N, 4.0 / (PI2 * N)


def forward_terminal_state(control: BangBangControl, N: Optional[int] = None, tol: float = 1e-6) -> CosineSeries:
    """Exact modal solution ``y(T, .)`` of the boundary-controlled heat equation.

    Zero initial state, ``y_x(., 0) = 0`` and ``y_x(., 1) = u``.  Each mode is
    ``2 (-1)^n int_0^T exp(-n^2 pi^2 (T - s)) u(s) ds``, integrated exactly per segment.
    """
    if N is None:
        N, residual = forward_mode_cutoff(tol)
    else:
        residual = 4.0 / (PI2 * N)
    n = np.arange(1, N + 1, dtype=float)
    lam = n**2 * PI2
    acc = np.zeros(N)
    for th_a, th_b, u in control.segments():
        # exp(-lam th_b) - exp(-lam th_a) without cancellation
        acc += u * (-np.exp(-lam * th_b) * np.expm1(-lam * (th_a - th_b)))
    sign = np.where(np.arange(1, N + 1) % 2 == 0, 1.0, -1.0)
    return CosineSeries.dense(control.integral(), 2.0 * sign * acc / lam, residual)


def write_grid_csv(path, x, values, header=("x", "value")) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for xi, vi in zip(x, values):
            fh.write(f"{xi:.12g},{vi:.17g}\n")


def dumps_series(series: CosineSeries) -> str:
    return json.dumps(series.to_json())
