"""Quantization method definitions and the 4-bit weight code layout.

Weight codes are 4-bit fields. Bit 3 (MSB) is always the sign, applied to
the whole level. The remaining three bits depend on the method:

* qkeras: bits 2..0 hold a single shift term ``s`` in 0..7; the level
  magnitude is ``2**s`` and there is no zero level.
* msq: bits 2..1 hold the first shift term ``e1`` (0 means the term is
  zero, otherwise magnitude ``2**-e1``); bit 0 enables a fixed second
  term of magnitude ``2**-1``.
* apot: same field split as msq, but ``e1 == 3`` selects shift 4
  (magnitude ``2**-4``), and the second term is ``2**-3``.

Level magnitudes are dyadic rationals; ``decode`` returns an exact
:class:`fractions.Fraction`. Multiplying by ``2**fraction_bits`` turns
every level into an integer, which is how the processing elements do all
arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidInput

CODE_BITS = 4
N_CODES = 1 << CODE_BITS  # 16 raw patterns


class PoTMethod(enum.Enum):
    """Weight quantization schemes (stable ids used in the POTQ file header)."""

    QKERAS_8_4 = 0
    MSQ_8_4 = 1
    APOT_8_4 = 2
    UNIFORM_8_8 = 3

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "PoTMethod":
        try:
            return _NAME_TO_METHOD[name.lower()]
        except KeyError:
            raise InvalidInput(f"unknown method {name!r}; expected one of {sorted(_NAME_TO_METHOD)}")


_SHORT_NAMES = {
    PoTMethod.QKERAS_8_4: "qkeras",
    PoTMethod.MSQ_8_4: "msq",
    PoTMethod.APOT_8_4: "apot",
    PoTMethod.UNIFORM_8_8: "uniform",
}
_NAME_TO_METHOD = {v: k for k, v in _SHORT_NAMES.items()}

POT_METHODS = (PoTMethod.QKERAS_8_4, PoTMethod.MSQ_8_4, PoTMethod.APOT_8_4)


class PEKind(enum.Enum):
    """Processing-element datapaths; each pairs with one method."""

    SHIFT_QKERAS = "shift_qkeras"
    SHIFT_MSQ = "shift_msq"
    SHIFT_APOT = "shift_apot"
    MULT_UNIFORM = "mult_uniform"


KIND_TO_METHOD = {
    PEKind.SHIFT_QKERAS: PoTMethod.QKERAS_8_4,
    PEKind.SHIFT_MSQ: PoTMethod.MSQ_8_4,
    PEKind.SHIFT_APOT: PoTMethod.APOT_8_4,
    PEKind.MULT_UNIFORM: PoTMethod.UNIFORM_8_8,
}
METHOD_TO_KIND = {m: k for k, m in KIND_TO_METHOD.items()}


@dataclass(frozen=True)
class MethodSpec:
    """Static description of one 4-bit PoT method.

    ``first_term_values`` / ``second_term_values`` are the selectable term
    magnitudes (0 marks the skip option). ``fraction_bits`` is the smallest
    F with every level * 2**F an integer. ``default_scale_exp`` is the
    power-of-two per-tensor scale the pipeline uses by default.
    """

    method: PoTMethod
    first_term_values: tuple[Fraction, ...]
    second_term_values: tuple[Fraction, ...]
    fraction_bits: int
    default_scale_exp: int


_F = Fraction

METHOD_SPECS = {
    PoTMethod.QKERAS_8_4: MethodSpec(
        method=PoTMethod.QKERAS_8_4,
        first_term_values=tuple(_F(2) ** s for s in range(8)),
        second_term_values=(),
        fraction_bits=0,
        default_scale_exp=-8,
    ),
    PoTMethod.MSQ_8_4: MethodSpec(
        method=PoTMethod.MSQ_8_4,
        first_term_values=(_F(0), _F(1, 2), _F(1, 4), _F(1, 8)),
        second_term_values=(_F(0), _F(1, 2)),
        fraction_bits=3,
        default_scale_exp=0,
    ),
    PoTMethod.APOT_8_4: MethodSpec(
        method=PoTMethod.APOT_8_4,
        first_term_values=(_F(0), _F(1, 2), _F(1, 4), _F(1, 16)),
        second_term_values=(_F(0), _F(1, 8)),
        fraction_bits=4,
        default_scale_exp=0,
    ),
}

# The 8-bit multiplier baseline carries plain int8 weights, F = 0.
UNIFORM_FRACTION_BITS = 0


def spec_for(method: PoTMethod) -> MethodSpec:
    try:
        return METHOD_SPECS[method]
    except KeyError:
        raise InvalidInput(f"{method} has no 4-bit code table")


def fraction_bits(method: PoTMethod) -> int:
    if method is PoTMethod.UNIFORM_8_8:
        return UNIFORM_FRACTION_BITS
    return METHOD_SPECS[method].fraction_bits


@dataclass(frozen=True)
class WeightCode:
    """One 4-bit encoded weight."""

    raw: int
    method: PoTMethod

    def __post_init__(self):
        if not 0 <= self.raw < N_CODES:
            raise InvalidInput(f"raw code {self.raw} outside 4-bit range")
        if self.method not in METHOD_SPECS:
            raise InvalidInput(f"{self.method} has no 4-bit code table")

    @property
    def sign(self) -> int:
        return (self.raw >> 3) & 1

    @property
    def shift(self) -> int:
        """Single shift term (qkeras only)."""
        return self.raw & 0b111

    @property
    def e1(self) -> int:
        """First-term field (msq/apot)."""
        return (self.raw >> 1) & 0b11

    @property
    def e2(self) -> int:
        """Second-term field (msq/apot)."""
        return self.raw & 1

    def value(self) -> Fraction:
        return decode(self.raw, self.method)

    def negated(self) -> "WeightCode":
        return WeightCode(self.raw ^ 0b1000, self.method)


def qkeras_code(sign: int, shift: int) -> WeightCode:
    return WeightCode((sign & 1) << 3 | (shift & 0b111), PoTMethod.QKERAS_8_4)


def two_term_code(sign: int, e1: int, e2: int, method: PoTMethod) -> WeightCode:
    return WeightCode((sign & 1) << 3 | (e1 & 0b11) << 1 | (e2 & 1), method)


def decode(raw: int, method: PoTMethod) -> Fraction:
    """Exact level value of a raw 4-bit pattern. Total over all 16 patterns."""
    if not 0 <= raw < N_CODES:
        raise InvalidInput(f"raw code {raw} outside 4-bit range")
    spec = spec_for(method)
    sign = -1 if raw & 0b1000 else 1
    if method is PoTMethod.QKERAS_8_4:
        return sign * spec.first_term_values[raw & 0b111]
    e1 = (raw >> 1) & 0b11
    e2 = raw & 1
    t1 = spec.first_term_values[e1]
    t2 = spec.second_term_values[e2]
    return sign * (t1 + t2)


def decode_int(raw: int, method: PoTMethod) -> int:
    """Level value scaled by 2**fraction_bits (always an integer)."""
    v = decode(raw, method) * (1 << fraction_bits(method))
    assert v.denominator == 1
    return v.numerator


def level_int_table(method: PoTMethod) -> tuple[int, ...]:
    """16-entry lookup: raw code -> integer level (scaled by 2**F)."""
    return tuple(decode_int(raw, method) for raw in range(N_CODES))


def enumerate_levels(method: PoTMethod) -> list[tuple[Fraction, int]]:
    """All distinct level values with their canonical raw codes.

    When several patterns decode to the same value the lowest raw wins,
    so zero canonicalizes to 0b0000 (never the negative-zero 0b1000).
    Sorted ascending by value.
    """
    canonical: dict[Fraction, int] = {}
    for raw in range(N_CODES):
        v = decode(raw, method)
        if v not in canonical:
            canonical[v] = raw
    return sorted(canonical.items())


def encode_level(value: Fraction, method: PoTMethod) -> WeightCode:
    """Code for an exact level value; InvalidInput if not a level."""
    for level, raw in enumerate_levels(method):
        if level == value:
            return WeightCode(raw, method)
    raise InvalidInput(f"{value} is not a {method.short_name} level")
