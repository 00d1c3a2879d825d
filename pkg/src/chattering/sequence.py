"""Block-harmonic coefficient sequences and their exponent maps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

from mpmath import mp

from ._numerics import decode_mpf, encode_mpf, log_z


@dataclass(frozen=True)
class ExponentSpec:
    """Integer exponents ``alpha_m`` of the power series, with ``alpha_m >= m``.

    ``kind="squares"`` is the model case ``alpha_m = m**2``.  A custom map is
    given either as integer polynomial ``coefficients`` (``alpha_m = sum c_i m**i``,
    serializable) or as an arbitrary callable ``func``.  Set ``increasing`` when
    the map is strictly increasing; this enables the sharper tail bound.
    """

    kind: str = "squares"
    coefficients: Optional[tuple[int, ...]] = None
    func: Optional[Callable[[int], int]] = field(default=None, compare=False)
    increasing: bool = False

    def __post_init__(self):
        if self.kind not in ("squares", "custom"):
            raise ValueError(f"unknown exponent kind {self.kind!r}")
        if self.kind == "custom" and self.coefficients is None and self.func is None:
            raise ValueError("custom exponents need coefficients or func")

    @classmethod
    def squares(cls) -> "ExponentSpec":
        return cls("squares", increasing=True)

    @classmethod
    def polynomial(cls, *coefficients: int, increasing: bool = True) -> "ExponentSpec":
        return cls("custom", coefficients=tuple(int(c) for c in coefficients), increasing=increasing)

    @classmethod
    def custom(cls, func: Callable[[int], int], increasing: bool = False) -> "ExponentSpec":
        return cls("custom", func=func, increasing=increasing)

    @property
    def is_squares(self) -> bool:
        return self.kind == "squares"

    def alpha(self, m: int) -> int:
        if m < 1:
            raise ValueError(f"exponent index must be positive, got {m}")
        if self.kind == "squares":
            return m * m
        if self.func is not None:
            a = int(self.func(m))
        else:
            a = sum(c * m**i for i, c in enumerate(self.coefficients))
        if a < m:
            raise ValueError(f"exponent alpha_{m} = {a} violates alpha_m >= m")
        return a

    def to_json(self) -> dict:
        if self.kind == "squares":
            return {"kind": "squares"}
        if self.coefficients is None:
            raise TypeError("callable exponent maps cannot be serialized")
        return {"kind": "custom", "coefficients": list(self.coefficients), "increasing": self.increasing}

    @classmethod
    def from_json(cls, doc: dict) -> "ExponentSpec":
        if doc["kind"] == "squares":
            return cls.squares()
        return cls.polynomial(*doc["coefficients"], increasing=bool(doc.get("increasing", False)))


SQUARES = ExponentSpec.squares()


@dataclass(frozen=True)
class Block:
    """Nonzero run ``beta_p..beta_q = sign/h_start, ..., sign/h_end``."""

    sign: int
    p: int
    q: int
    h_start: int
    h_end: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("block sign must be +1 or -1")
        if self.q - self.p != self.h_end - self.h_start or self.p > self.q:
            raise ValueError(f"inconsistent block bounds {self}")

    def terms(self) -> Iterator[tuple[int, int]]:
        """Yield ``(m, h)``: position ``m`` carries coefficient ``sign / h``."""
        for i in range(self.h_end - self.h_start + 1):
            yield self.p + i, self.h_start + i

    def exact_sum(self) -> Fraction:
        return self.sign * sum((Fraction(1, h) for h in range(self.h_start, self.h_end + 1)), Fraction(0))


def block_sum(blocks: Sequence[Block], exponents: ExponentSpec, logz) -> tuple:
    """Return ``(sum beta_m z**alpha_m, sum |beta_m| z**alpha_m)`` for ``log(z) = logz``."""
    signed, absolute = [], []
    for b in blocks:
        for m, h in b.terms():
            t = mp.exp(exponents.alpha(m) * logz) / h
            signed.append(t if b.sign > 0 else -t)
            absolute.append(t)
    return mp.fsum(signed), mp.fsum(absolute)


@dataclass(frozen=True)
class ChatterSequence:
    """Output of the block-harmonic construction.

    ``deltas[k-1]`` is ``1 - z_k``; ``blocks[k-1]`` is the k-th nonzero block.
    """

    exponents: ExponentSpec
    blocks: tuple[Block, ...]
    deltas: tuple
    precision_bits: int

    @property
    def K(self) -> int:
        return len(self.deltas)

    def block(self, k: int) -> Block:
        return self.blocks[k - 1]

    def p(self, k: int) -> int:
        return self.blocks[k - 1].p

    def q(self, k: int) -> int:
        return self.blocks[k - 1].q

    def r(self, k: int) -> int:
        return self.blocks[k - 1].h_end

    def delta(self, k: int):
        return self.deltas[k - 1]

    def z(self, k: int):
        with mp.workprec(self.precision_bits):
            return 1 - self.deltas[k - 1]

    def log_z(self, k: int):
        with mp.workprec(self.precision_bits):
            return log_z(self.deltas[k - 1])

    def beta(self, m: int) -> Fraction:
        """Exact coefficient ``beta_m`` (zero outside the blocks or beyond ``q_K``)."""
        for b in self.blocks:
            if b.p <= m <= b.q:
                return Fraction(b.sign, b.h_start + (m - b.p))
        return Fraction(0)

    def nonzero(self, L: Optional[int] = None) -> Iterator[tuple[int, int, int]]:
        """Yield ``(m, h, sign)`` for every nonzero coefficient of ``P_L``."""
        L = self.K if L is None else L
        for b in self.blocks[:L]:
            for m, h in b.terms():
                yield m, h, b.sign

    def coefficient_sum(self, L: int) -> Fraction:
        """Exact ``sum_{m <= q_L} beta_m``."""
        return sum((b.exact_sum() for b in self.blocks[:L]), Fraction(0))

    def truncate(self, K: int) -> "ChatterSequence":
        if not 1 <= K <= self.K:
            raise ValueError(f"cannot truncate a K={self.K} sequence to {K}")
        return ChatterSequence(self.exponents, self.blocks[:K], self.deltas[:K], self.precision_bits)

    def to_json(self) -> dict:
        return {
            "exponents": self.exponents.to_json(),
            "blocks": [
                {"sign": b.sign, "p": b.p, "q": b.q, "h_start": b.h_start, "h_end": b.h_end}
                for b in self.blocks
            ],
            "deltas": [encode_mpf(d, self.precision_bits) for d in self.deltas],
            "K": self.K,
            "precision_bits": self.precision_bits,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ChatterSequence":
        bits = int(doc["precision_bits"])
        seq = cls(
            exponents=ExponentSpec.from_json(doc["exponents"]),
            blocks=tuple(Block(**b) for b in doc["blocks"]),
            deltas=tuple(decode_mpf(s, bits) for s in doc["deltas"]),
            precision_bits=bits,
        )
        if seq.K != int(doc.get("K", seq.K)):
            raise ValueError("K does not match the number of stored probe points")
        return seq

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "ChatterSequence":
        return cls.from_json(json.loads(text))
