"""Block-harmonic construction of a power series with sign changes at chosen points.

Each outer iteration appends a run of zero coefficients followed by a block of
consecutive harmonic reciprocals with alternating sign.  The run length is
chosen so the old partial sum dominates the whole remaining tail at the current
probe point, the block length so its harmonic mass exceeds the old coefficient
sum, and the next probe point (closer to 1) so the new block wins there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from mpmath import mp

from ._numerics import DEFAULT_PRECISION_BITS, PrecisionError, log_z, to_mpf, working_precision
from .sequence import SQUARES, Block, ChatterSequence, ExponentSpec, block_sum
from .series_eval import harmonic_power_sum, tail_bound_delta

log = logging.getLogger(__name__)

DEFAULT_J_MAX = 256
DEFAULT_R_CAP = 100_000


class BuildError(RuntimeError):
    """A selection step failed; ``iteration`` is the outer loop counter ``k``."""

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message if iteration is None else f"iteration k={iteration}: {message}")
        self.iteration = iteration


@dataclass
class BuilderState:
    exponents: ExponentSpec
    precision_bits: int
    blocks: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    S_z: object = None  # sum_{m <= q_k} beta_m z_k**alpha_m
    S_1: Fraction = Fraction(0)  # sum_{m <= q_k} beta_m, exact

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def delta(self):
        return self.deltas[-1]

    @property
    def last(self) -> Block:
        return self.blocks[-1]

    def sequence(self) -> ChatterSequence:
        return ChatterSequence(self.exponents, tuple(self.blocks), tuple(self.deltas), self.precision_bits)


def init_builder(z1, exponents: ExponentSpec = SQUARES, precision_bits: int = DEFAULT_PRECISION_BITS) -> BuilderState:
    with working_precision(precision_bits):
        z1 = to_mpf(z1)
        if not 0 < z1 < 1:
            raise ValueError(f"z1 must lie in (0, 1), got {z1}")
        exponents.alpha(1)
        delta = 1 - z1
        state = BuilderState(exponents, precision_bits)
        state.blocks.append(Block(1, 1, 1, 1, 1))
        state.deltas.append(delta)
        state.S_z = mp.exp(exponents.alpha(1) * log_z(delta))
        state.S_1 = Fraction(1)
        return state


def _search_p(state: BuilderState, target) -> int:
    lo = state.last.q  # tail bound fails (or is not admissible) here
    hi = lo + 1
    while not tail_bound_delta(state.delta, hi, state.exponents) < target:
        lo, hi = hi, 2 * hi
        if hi > 1 << 62:
            raise BuildError("no admissible p below 2**62", state.k)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_bound_delta(state.delta, mid, state.exponents) < target:
            hi = mid
        else:
            lo = mid
    return hi


def select_p_next(state: BuilderState) -> int:
    """Start index of the next block, beyond which the tail is dominated by ``|S_z|``."""
    with working_precision(state.precision_bits):
        target = abs(state.S_z)
        if target == 0:
            raise BuildError("partial sum at the probe point underflowed; raise precision_bits", state.k)
        q = state.last.q
        if not state.exponents.is_squares:
            return _search_p(state, target)
        # ln((1-z)|S|) / ln(z): both logs negative unless (1-z)|S| >= 1
        ratio = mp.log(state.delta * target) / mp.log1p(-state.delta)
        root = int(mp.floor(mp.sqrt(ratio))) if ratio > 0 else 0
        p = max(q + 1, root + 1)
        while not tail_bound_delta(state.delta, p, state.exponents) < target:
            p += 1
        return p


def select_r_next(state: BuilderState, r_cap: int = DEFAULT_R_CAP) -> int:
    """Last harmonic index of the next block; its harmonic mass beats ``|S_1|``."""
    with working_precision(state.precision_bits):
        r = state.last.h_end
        s1 = abs(state.S_1)
        guess = int(mp.floor(mp.exp(mp.mpf(s1.numerator) / s1.denominator + mp.log(r + 1))))
        r_next = max(r + 2, guess)
        if r_next > r_cap:
            raise BuildError(f"r_(k+1) = {r_next} exceeds the cap {r_cap}", state.k)
        mass = sum((Fraction(1, m) for m in range(r + 1, r_next + 1)), Fraction(0))
        while not mass > s1:
            r_next += 1
            mass += Fraction(1, r_next)
            if r_next > r_cap:
                raise BuildError(f"r_(k+1) exceeds the cap {r_cap}", state.k)
        return r_next


def _new_block_sum(state: BuilderState, p_next: int, r_next: int, logz):
    r = state.last.h_end
    shift = p_next - r - 1
    return mp.fsum(
        mp.exp(state.exponents.alpha(m + shift) * logz) / m for m in range(r + 1, r_next + 1)
    )


def select_z_next(state: BuilderState, p_next: int, r_next: int, j_max: int = DEFAULT_J_MAX):
    """Halve the distance to 1 until the new block dominates the old partial sum.

    Returns ``delta_{k+1} = delta_k * 2**-j`` for the smallest such ``j >= 1``.
    """
    with working_precision(state.precision_bits):
        for j in range(1, j_max + 1):
            delta = mp.ldexp(state.delta, -j)
            logz = log_z(delta)
            old, _ = block_sum(state.blocks, state.exponents, logz)
            if abs(old) < _new_block_sum(state, p_next, r_next, logz):
                return delta
        raise BuildError(f"no probe point found within {j_max} halvings; precision exhausted", state.k)


def extend_block(state: BuilderState, p_next: int, r_next: int, delta_next) -> BuilderState:
    """Install the zero gap, the next harmonic block and the new probe point."""
    k = state.k
    r = state.last.h_end
    sign = 1 if (k + 1) % 2 == 1 else -1
    block = Block(sign, p_next, p_next + r_next - r - 1, r + 1, r_next)
    with working_precision(state.precision_bits):
        state.blocks.append(block)
        state.deltas.append(to_mpf(delta_next))
        state.S_z, _ = block_sum(state.blocks, state.exponents, log_z(state.delta))
        state.S_1 = state.S_1 + block.exact_sum()
    return state


def step(state: BuilderState, j_max: int = DEFAULT_J_MAX, r_cap: int = DEFAULT_R_CAP) -> BuilderState:
    k = state.k
    p_next = select_p_next(state)
    r_next = select_r_next(state, r_cap)
    delta_next = select_z_next(state, p_next, r_next, j_max)
    extend_block(state, p_next, r_next, delta_next)
    expected = 1 if state.k % 2 == 1 else -1
    if mp.sign(state.S_z) != expected:
        raise BuildError("partial sum at the new probe point has the wrong sign", k)
    log.debug("k=%d p=%d q=%d r=%d delta=%s", state.k, state.last.p, state.last.q, r_next, mp.nstr(delta_next, 5))
    return state


def run(
    z1=0.5,
    exponents: ExponentSpec = SQUARES,
    K: int = 6,
    precision_bits: int = DEFAULT_PRECISION_BITS,
    *,
    j_max: int = DEFAULT_J_MAX,
    r_cap: int = DEFAULT_R_CAP,
) -> ChatterSequence:
    """Run ``K - 1`` outer iterations, returning blocks and probe points ``1..K``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    state = init_builder(z1, exponents, precision_bits)
    while state.k < K:
        try:
            step(state, j_max, r_cap)
        except PrecisionError as exc:
            raise BuildError(str(exc), state.k) from exc
    return state.sequence()


def check_invariants(seq: ChatterSequence, gammas=(1, 1.5, 2, 3), rtol: float = 1e-12) -> list[str]:
    """Evaluate the iterate properties of the construction; returns the violations found."""
    bad = []
    first = seq.blocks[0]
    if (first.sign, first.p, first.q, first.h_start, first.h_end) != (1, 1, 1, 1, 1):
        bad.append("block 1 is not beta_1 = 1")
    with mp.workprec(seq.precision_bits):
        for k in range(1, seq.K + 1):
            b, d = seq.block(k), seq.delta(k)
            if not 0 < d < 1:
                bad.append(f"k={k}: z_k outside (0, 1)")
            if b.sign != (1 if k % 2 else -1):
                bad.append(f"k={k}: block sign {b.sign}")
            if k >= 2:
                prev = seq.block(k - 1)
                if not d < seq.delta(k - 1):
                    bad.append(f"k={k}: z_k not increasing")
                if not b.p > prev.q:
                    bad.append(f"k={k}: p_k <= q_(k-1)")
                if not b.q > b.p:
                    bad.append(f"k={k}: q_k <= p_k")
                if not b.h_end > prev.h_end + 1:
                    bad.append(f"k={k}: r_k <= r_(k-1) + 1")
                if b.h_start != prev.h_end + 1 or b.q != b.p + b.h_end - prev.h_end - 1:
                    bad.append(f"k={k}: block indices inconsistent")
                prev_sum, _ = block_sum(seq.blocks[: k - 1], seq.exponents, log_z(seq.delta(k - 1)))
                if not abs(prev_sum) > tail_bound_delta(seq.delta(k - 1), b.p, seq.exponents):
                    bad.append(f"k={k}: tail not dominated at z_(k-1)")
            # coefficients are 1/h with h >= 1, and zero between blocks by construction
            if min(x.h_start for x in seq.blocks[:k]) < 1:
                bad.append(f"k={k}: |beta_m| > 1")
            s, _ = block_sum(seq.blocks[:k], seq.exponents, log_z(d))
            if mp.sign(s) != (1 if k % 2 else -1):
                bad.append(f"k={k}: sign of partial sum at z_k")
            for g in gammas:
                lhs = mp.fsum(mp.power(h, -mp.mpf(g)) for _, h, _ in seq.nonzero(k))
                rhs = harmonic_power_sum(b.h_end, g, seq.precision_bits)
                rhs = mp.mpf(rhs.numerator) / rhs.denominator if isinstance(rhs, Fraction) else rhs
                if abs(lhs - rhs) > rtol * abs(rhs):
                    bad.append(f"k={k}: power-sum identity fails for gamma={g}")
    return bad
