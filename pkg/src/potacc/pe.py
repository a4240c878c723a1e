"""Bit-exact emulation of the shift-based processing elements.

Each PE multiplies an 8-bit two's-complement activation by a 4-bit weight
code using only arithmetic shifts, an adder, and a sign-correction step.
Fractional terms are realized exactly by pre-scaling: a PE with F fraction
bits returns ``act * level * 2**F``, which is always an integer. Shifts act
on the sign-extended activation, so negative activations are exact.

The datapaths:

* shift_qkeras (F=0): one 3-bit shifter, ``act << s``.
* shift_msq (F=3): first shifter ``act << (3 - e1)`` (skipped when e1=0),
  fixed second shifter ``act << 2`` (skipped when e2=0), one adder.
* shift_apot (F=4): first shift amount remapped 1->1, 2->2, 3->4 so the
  2-bit field can reach shift 4; second shifter ``act << 1``.
* mult_uniform: plain 8x8 signed multiply (F=0).

The sign bit is applied by conditional negation after the term sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AccumulatorOverflow, InvalidInput, LengthMismatch, MethodMismatch
from .methods import (
    KIND_TO_METHOD,
    N_CODES,
    PEKind,
    PoTMethod,
    WeightCode,
    decode,
    fraction_bits,
)

ACC_MIN = -(1 << 31)
ACC_MAX = (1 << 31) - 1

_APOT_SHIFT_REMAP = (0, 1, 2, 4)  # field value -> first shift term


def _check_act(act: int) -> int:
    act = int(act)
    if not -128 <= act <= 127:
        raise InvalidInput(f"activation {act} outside int8 range")
    return act


def pe_multiply(act: int, weight, kind: PEKind) -> int:
    """One shift-or-multiply step; returns act * level * 2**F as an integer.

    ``weight`` is a WeightCode for the shift kinds and a plain int8 value
    for mult_uniform.
    """
    act = _check_act(act)
    if kind is PEKind.MULT_UNIFORM:
        w = int(weight)
        if not -128 <= w <= 127:
            raise InvalidInput(f"uniform weight {w} outside int8 range")
        return act * w
    if not isinstance(weight, WeightCode):
        raise InvalidInput(f"{kind.value} expects a WeightCode, got {type(weight).__name__}")
    if weight.method is not KIND_TO_METHOD[kind]:
        raise MethodMismatch(f"{weight.method.short_name} code fed to a {kind.value} PE")

    raw = weight.raw
    negative = bool(raw & 0b1000)
    if kind is PEKind.SHIFT_QKERAS:
        m = act << (raw & 0b111)
    else:
        e1 = (raw >> 1) & 0b11
        e2 = raw & 1
        if kind is PEKind.SHIFT_MSQ:
            t1 = 0 if e1 == 0 else act << (3 - e1)
            t2 = act << 2 if e2 else 0
        else:  # SHIFT_APOT
            t1 = 0 if e1 == 0 else act << (4 - _APOT_SHIFT_REMAP[e1])
            t2 = act << 1 if e2 else 0
        m = t1 + t2
    return -m if negative else m


def pe_mac(acc: int, act: int, weight, kind: PEKind) -> int:
    """Accumulate one PE product into a signed 32-bit accumulator."""
    result = int(acc) + pe_multiply(act, weight, kind)
    if not ACC_MIN <= result <= ACC_MAX:
        raise AccumulatorOverflow(f"accumulator {result} left the int32 range")
    return result


def dot_product(acts, weights, kind: PEKind) -> int:
    """Left fold of pe_mac from zero over paired operand vectors."""
    if len(acts) != len(weights):
        raise LengthMismatch(f"{len(acts)} activations vs {len(weights)} weights")
    acc = 0
    for a, w in zip(acts, weights):
        acc = pe_mac(acc, a, w, kind)
    return acc


@dataclass
class PECheckResult:
    kind: PEKind
    cases: int = 0
    failures: list = field(default_factory=list)  # (act, raw_or_weight, got, expected)

    @property
    def passed(self) -> bool:
        return not self.failures


SHIFT_KINDS = (PEKind.SHIFT_QKERAS, PEKind.SHIFT_MSQ, PEKind.SHIFT_APOT)


def exhaustive_pe_check(kinds=None, max_failures: int = 16) -> list[PECheckResult]:
    """Sweep every (activation, weight) pair against exact rational products.

    Shift kinds cover all 256 x 16 pairs; the uniform multiplier covers all
    256 x 256 int8 pairs. The reference side is computed from the decoded
    level with Fraction arithmetic, independent of the shifter datapath.
    """
    results = []
    for kind in kinds or (*SHIFT_KINDS, PEKind.MULT_UNIFORM):
        res = PECheckResult(kind=kind)
        if kind is PEKind.MULT_UNIFORM:
            for act in range(-128, 128):
                for w in range(-128, 128):
                    res.cases += 1
                    got = pe_multiply(act, w, kind)
                    if got != act * w and len(res.failures) < max_failures:
                        res.failures.append((act, w, got, act * w))
        else:
            method = KIND_TO_METHOD[kind]
            scale = Fraction(2) ** fraction_bits(method)
            for raw in range(N_CODES):
                expected_level = decode(raw, method) * scale
                code = WeightCode(raw, method)
                for act in range(-128, 128):
                    res.cases += 1
                    got = pe_multiply(act, code, kind)
                    expected = act * expected_level
                    if got != expected and len(res.failures) < max_failures:
                        res.failures.append((act, raw, got, expected))
        results.append(res)
    return results


def level_int_array(method: PoTMethod):
    """numpy int32 lookup table raw -> level * 2**F, for vectorized GEMM."""
    return np.array(
        [int(decode(raw, method) * (1 << fraction_bits(method))) for raw in range(N_CODES)],
        dtype=np.int32,
    )
