"""Evaluation of the partial sums ``P_L`` and their sign structure."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import mp

from ._numerics import PrecisionError, log_z, noise_floor, to_mpf
from .sequence import SQUARES, ChatterSequence, ExponentSpec, block_sum


class IndeterminateSignError(PrecisionError):
    pass


def _check_level(seq: ChatterSequence, L: int) -> None:
    if not 1 <= L <= seq.K:
        raise ValueError(f"truncation level L={L} outside 1..{seq.K}")


def tail_bound_delta(delta, p: int, exponents: ExponentSpec = SQUARES):
    """Upper bound for ``sum_{m >= p} z**alpha_m`` with ``z = 1 - delta``.

    Squares and other strictly increasing maps give ``z**alpha_p / (1 - z)``;
    otherwise only ``alpha_m >= m`` is usable and the bound is ``z**p / (1 - z)``.
    """
    delta = to_mpf(delta)
    alpha = exponents.alpha(p) if exponents.increasing else p
    return mp.exp(alpha * log_z(delta)) / delta


def tail_bound(z, p: int, exponents: ExponentSpec = SQUARES):
    z = to_mpf(z)
    if not 0 < z < 1:
        raise ValueError("tail_bound needs z in (0, 1)")
    return tail_bound_delta(1 - z, p, exponents)


def partial_sum_delta(seq: ChatterSequence, L: int, delta) -> tuple:
    """``(P_L(1 - delta), sum of absolute terms)`` at the sequence precision."""
    _check_level(seq, L)
    with mp.workprec(seq.precision_bits):
        delta = to_mpf(delta)
        if delta == 1:
            return mp.zero, mp.zero
        return block_sum(seq.blocks[:L], seq.exponents, log_z(delta))


def eval_partial_sum(seq: ChatterSequence, L: int, z):
    """``P_L(z) = sum_{m <= q_L} beta_m z**alpha_m`` for ``z`` in ``[0, 1)``."""
    with mp.workprec(seq.precision_bits):
        z = to_mpf(z)
        if not 0 <= z < 1:
            raise ValueError(f"P_L is evaluated on [0, 1), got z={z}")
        return partial_sum_delta(seq, L, 1 - z)[0]


@dataclass
class SignReport:
    ok: bool
    L: int
    values: list
    floors: list

    def rows(self, seq: ChatterSequence):
        for k, v in enumerate(self.values, start=1):
            yield k, seq.z(k), v, int(mp.sign(v))


def verify_sign_pattern(seq: ChatterSequence, L: int) -> SignReport:
    """Check ``sign P_L(z_k) = (-1)**(k+1)`` for ``k = 1..L``."""
    _check_level(seq, L)
    values, floors, ok = [], [], True
    for k in range(1, L + 1):
        v, a = partial_sum_delta(seq, L, seq.delta(k))
        floor = noise_floor(a, seq.precision_bits)
        if abs(v) <= floor:
            raise IndeterminateSignError(
                f"|P_{L}(z_{k})| = {mp.nstr(abs(v), 3)} is below the noise floor {mp.nstr(floor, 3)}"
            )
        values.append(v)
        floors.append(floor)
        ok = ok and (v > 0) == (k % 2 == 1)
    return SignReport(ok, L, values, floors)


def harmonic_power_sum(r: int, gamma, precision_bits: int = 128):
    """``sum_{m=1}^r m**-gamma``; exact ``Fraction`` for integer ``gamma``."""
    if float(gamma) == int(gamma):
        g = int(gamma)
        return sum((Fraction(1, m**g) for m in range(1, r + 1)), Fraction(0))
    with mp.workprec(precision_bits):
        return mp.fsum(mp.power(m, -to_mpf(gamma)) for m in range(1, r + 1))


def coefficient_power_sum(seq: ChatterSequence, gamma, k: int):
    """``sum_{m <= q_k} |beta_m|**gamma`` read off the block structure."""
    _check_level(seq, k)
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    with mp.workprec(seq.precision_bits):
        g = to_mpf(gamma)
        return mp.fsum(mp.power(h, -g) for _, h, _ in seq.nonzero(k))


@dataclass
class RootScan:
    """Sign changes of ``P_L`` located in distance-from-one coordinates.

    ``deltas`` are ``1 - zbar``, sorted so the roots ``zbar`` ascend.  Only
    odd-multiplicity crossings separated by at least one sample are seen.
    """

    L: int
    deltas: list
    brackets: list
    samples_per_interval: int
    advisory: str = field(default="even-multiplicity crossings between samples are not detected")

    @property
    def roots(self) -> list:
        return [1 - d for d in self.deltas]

    def __len__(self):
        return len(self.deltas)


def _bisect(f, s_a, s_b, f_a, rel_width):
    # bracket in s = -log(delta); stop on relative width in delta
    while True:
        d_a, d_b = mp.exp(-s_a), mp.exp(-s_b)
        if abs(d_a - d_b) <= rel_width * min(d_a, d_b):
            return s_a, s_b
        s_m = (s_a + s_b) / 2
        f_m = f(s_m)
        if f_m == 0:
            return s_m, s_m
        if (f_m > 0) == (f_a > 0):
            s_a, f_a = s_m, f_m
        else:
            s_b = s_m


def tail_delta_floor(seq: ChatterSequence, L: int):
    """Distance below which ``P_L`` stays within half of ``P_L(1)`` (so has no roots)."""
    with mp.workprec(seq.precision_bits):
        total = seq.coefficient_sum(L)
        s1 = abs(mp.mpf(total.numerator) / total.denominator)
        weight = mp.fsum(mp.mpf(seq.exponents.alpha(m)) / h for m, h, _ in seq.nonzero(L))
        # 1 - z**a <= a * (-log z), and -log(1-d) <= 2d for d <= 1/2
        return s1 / (4 * weight)


def find_sign_changes(
    seq: ChatterSequence,
    L: int,
    samples_per_interval: int = 64,
    *,
    delta_hi=1,
    include_tail: bool = False,
    rel_width: float = 1e-14,
) -> RootScan:
    """Bracket and bisect the sign changes of ``P_L`` on ``(1 - delta_hi, z_L)``.

    The search runs over ``(0, z_1)`` and every ``(z_k, z_{k+1})``, sampled
    uniformly in ``s = -log(1 - z)``.  With ``include_tail`` the interval
    ``(z_L, 1)`` is scanned as well, down to the distance where ``P_L`` is
    provably bounded away from zero.
    """
    _check_level(seq, L)
    if samples_per_interval < 2:
        raise ValueError("need at least two samples per interval")
    with mp.workprec(seq.precision_bits):
        delta_hi = to_mpf(delta_hi)
        edges = [delta_hi] + [d for d in seq.deltas[:L] if d < delta_hi]
        if include_tail:
            floor = tail_delta_floor(seq, L)
            if floor < edges[-1]:
                edges.append(floor)

        def f(s):
            return partial_sum_delta(seq, L, mp.exp(-s))[0]

        found, brackets = [], []
        for d_a, d_b in zip(edges[:-1], edges[1:]):
            s_a, s_b = -mp.log(d_a), -mp.log(d_b)
            n = samples_per_interval
            ss = [s_a + (s_b - s_a) * i / n for i in range(n + 1)]
            if d_a == 1:
                ss = ss[1:]  # P_L(0) = 0 is not a sign change
            vals = [f(s) for s in ss]
            for i in range(len(ss) - 1):
                if vals[i] == 0:
                    if i > 0:
                        found.append(mp.exp(-ss[i]))
                        brackets.append((mp.exp(-ss[i]), mp.exp(-ss[i])))
                    continue
                if vals[i + 1] != 0 and (vals[i] > 0) != (vals[i + 1] > 0):
                    lo, hi = _bisect(f, ss[i], ss[i + 1], vals[i], rel_width)
                    found.append(mp.exp(-(lo + hi) / 2))
                    brackets.append((mp.exp(-lo), mp.exp(-hi)))
        order = sorted(range(len(found)), key=lambda i: -found[i])
        return RootScan(L, [found[i] for i in order], [brackets[i] for i in order], samples_per_interval)


def write_sign_csv(path, rows, value_header: str = "z") -> None:
    """Write ``(k, z, value, sign)`` rows with full-precision decimal strings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", value_header, "value", "sign"])
        for k, z, v, s in rows:
            w.writerow([k, mp.nstr(z, 30), mp.nstr(v, 20), s])


def root_rows(seq: ChatterSequence, scan: RootScan):
    for i, d in enumerate(scan.deltas, start=1):
        v, _ = partial_sum_delta(seq, scan.L, d)
        with mp.workprec(seq.precision_bits):
            yield i, 1 - d, v, int(mp.sign(v))
