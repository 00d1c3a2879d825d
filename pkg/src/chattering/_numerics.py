"""Extended-precision helpers shared by the series modules.

Probe points live extremely close to 1, so every power ``z**alpha`` is taken
as ``exp(alpha * log1p(-delta))`` with ``delta = 1 - z`` held exactly.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import mpmath
from mpmath import mp

DEFAULT_PRECISION_BITS = 128


class PrecisionError(ArithmeticError):
    """Raised when the working precision cannot resolve a required comparison."""


@contextmanager
def working_precision(bits: int):
    if bits < 24:
        raise ValueError(f"precision_bits must be at least 24, got {bits}")
    with mp.workprec(bits):
        yield


def to_mpf(value) -> mpmath.mpf:
    """Convert floats, ints, decimal strings and mpf values at the current precision."""
    if isinstance(value, mpmath.mpf):
        return +value
    if isinstance(value, str):
        return mp.mpf(value)
    return mp.mpf(value)


def log_z(delta) -> mpmath.mpf:
    return mp.log1p(-delta)


def power_from_log(alpha: int, logz) -> mpmath.mpf:
    return mp.exp(alpha * logz)


def decimal_digits(bits: int) -> int:
    """Digits needed so that a decimal string round-trips at ``bits`` of precision."""
    return int(math.ceil(bits * math.log10(2))) + 2


def encode_mpf(x, bits: int) -> str:
    with mp.workprec(bits):
        x = x if isinstance(x, mpmath.mpf) else mp.mpf(x)
    return mpmath.libmp.to_str(x._mpf_, decimal_digits(bits))


def decode_mpf(s: str, bits: int) -> mpmath.mpf:
    with mp.workprec(bits):
        return mp.mpf(s)


def noise_floor(abs_sum, bits: int):
    """Forward-error envelope for a sum whose absolute terms add to ``abs_sum``."""
    return mp.ldexp(abs_sum, 3 - bits)
