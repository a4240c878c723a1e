"""Quantization of real-valued weights to 4-bit codes and the POTQ container.

All rounding decisions are made with exact integer/dyadic arithmetic so the
codec is bit-reproducible across platforms:

* the single-term quantizer rounds ``log2(|x|)`` half-up, deciding the
  geometric-midpoint comparison ``|x| >= 2**(e + 0.5)`` through the exact
  integer test ``significand**2 >= 2**105``;
* the two-term methods snap to the nearest enumerated level in value space,
  ties toward the smaller magnitude; level boundaries are dyadic rationals
  and therefore exact as float64.

Per-tensor scales are restricted to powers of two (stored as the exponent),
so rescaling is always a shift.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidInput,
    NotPoTWeight,
    ZeroNotRepresentable,
    ZeroWeightNotRepresentable,
)
from .methods import (
    N_CODES,
    PoTMethod,
    WeightCode,
    decode,
    enumerate_levels,
    qkeras_code,
    spec_for,
)

POTQ_MAGIC = b"POTQ"
POTQ_VERSION = 1

# scale exponents are stored as a signed byte in the POTQ header
SCALE_EXP_MIN = -128
SCALE_EXP_MAX = 127


def _check_scale_exp(scale_exp: int) -> int:
    if not SCALE_EXP_MIN <= scale_exp <= SCALE_EXP_MAX:
        raise InvalidInput(f"scale exponent {scale_exp} outside signed-byte range")
    return int(scale_exp)


def _round_log2_half_up(x: float) -> int:
    """Nearest integer to log2(|x|), halves toward +inf. Exact for any float."""
    m, e = math.frexp(abs(x))  # |x| = m * 2**e with 0.5 <= m < 1
    sig = int(m * (1 << 53))  # exact 53-bit significand
    # log2|x| >= (e-1) + 0.5  <=>  m >= sqrt(1/2)  <=>  sig**2 >= 2**105
    if sig * sig >= 1 << 105:
        return e
    return e - 1


def quantize_pot_single(x: float, min_exp: int, max_exp: int) -> Fraction:
    """Quantize a nonzero real to the closest signed power of two.

    Closest in the log domain: the exponent is round(log2|x|) with halves
    rounding up, clamped to [min_exp, max_exp].
    """
    if isinstance(x, complex) or not math.isfinite(x):
        raise InvalidInput(f"cannot quantize non-finite value {x!r}")
    if min_exp > max_exp:
        raise InvalidInput(f"empty exponent range [{min_exp}, {max_exp}]")
    if x == 0:
        raise ZeroNotRepresentable("zero has no power-of-two representation")
    e = min(max(_round_log2_half_up(x), min_exp), max_exp)
    mag = Fraction(2) ** e
    return -mag if x < 0 else mag


@lru_cache(maxsize=None)
def _level_grid(method: PoTMethod):
    """Sorted unscaled levels as exact floats, their raw codes, and midpoints."""
    pairs = enumerate_levels(method)
    levels = np.array([float(v) for v, _ in pairs])
    raws = np.array([raw for _, raw in pairs], dtype=np.uint8)
    mids = (levels[:-1] + levels[1:]) / 2.0  # dyadic, exact
    return levels, raws, mids


def _nearest_level_codes(y: np.ndarray, method: PoTMethod) -> np.ndarray:
    """Vector version of nearest-level search in scale units.

    A value exactly on a boundary goes to the smaller-magnitude side; the
    zero-crossing boundary goes to the positive side.
    """
    levels, raws, mids = _level_grid(method)
    idx = np.searchsorted(mids, y, side="right")
    # side="right" already favors the upper level on ties, which is correct
    # for negative midpoints (upper = closer to zero) and for the midpoint
    # at zero (positive side). Positive midpoints must tie downward.
    if idx.size:
        prev = np.maximum(idx - 1, 0)
        down = (idx > 0) & (y == mids[prev]) & (mids[prev] > 0)
        idx = idx - down.astype(idx.dtype)
    return raws[idx]


def _ldexp_saturating(x: float, e: int) -> float:
    """math.ldexp that overflows to +-inf instead of raising."""
    try:
        return math.ldexp(x, e)
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def _qkeras_shift(y: float) -> int:
    """Clamped qkeras shift term for a nonzero value in scale units.

    Rescaling huge inputs can overflow to inf; that still means "beyond the
    top level", so it clamps like any other out-of-range magnitude.
    """
    if math.isinf(y):
        return 7
    return min(max(_round_log2_half_up(y), 0), 7)


def _qkeras_shift_codes(y: np.ndarray) -> np.ndarray:
    """Vector qkeras quantization in scale units (y = x / scale)."""
    out = np.zeros(y.shape, dtype=np.uint8)
    flat = y.reshape(-1)
    codes = out.reshape(-1)
    for i, v in enumerate(flat):
        if v == 0.0:
            codes[i] = 0  # positive smallest-magnitude level
            continue
        codes[i] = (0b1000 if v < 0 else 0) | _qkeras_shift(float(v))
    return out


def quantize_to_method(x: float, method: PoTMethod, scale_exp: int | None = None) -> WeightCode:
    """Quantize one real value to a 4-bit code of the given method.

    qkeras quantizes in the log domain (single shift term, exponent range
    0..7 after removing the tensor scale; zero maps to the positive
    smallest-magnitude level). msq/apot pick the nearest enumerated level
    by absolute distance, ties toward zero.
    """
    spec = spec_for(method)  # rejects uniform
    if isinstance(x, complex) or not math.isfinite(x):
        raise InvalidInput(f"cannot quantize non-finite value {x!r}")
    if scale_exp is None:
        scale_exp = spec.default_scale_exp
    _check_scale_exp(scale_exp)
    y = _ldexp_saturating(float(x), -scale_exp)  # exact: scale is a power of two
    if method is PoTMethod.QKERAS_8_4:
        if y == 0.0:
            return qkeras_code(0, 0)
        return qkeras_code(1 if y < 0 else 0, _qkeras_shift(y))
    raw = _nearest_level_codes(np.asarray([y]), method)[0]
    return WeightCode(int(raw), method)


@dataclass
class QuantizedTensor:
    """Packed 4-bit weight codes with shape and per-tensor power-of-two scale."""

    shape: tuple[int, ...]
    codes: np.ndarray  # uint8, flat row-major, one code per element
    scale_exp: int
    method: PoTMethod

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        if any(d < 0 for d in self.shape):
            raise InvalidInput(f"negative dimension in shape {self.shape}")
        self.codes = np.ascontiguousarray(self.codes, dtype=np.uint8).reshape(-1)
        if self.codes.size != self.n_elements:
            raise InvalidInput(
                f"{self.codes.size} codes for shape {self.shape} ({self.n_elements} elements)"
            )
        if self.codes.size and int(self.codes.max()) >= N_CODES:
            raise InvalidInput("code value outside 4-bit range")
        _check_scale_exp(self.scale_exp)
        spec_for(self.method)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def scale(self) -> float:
        return math.ldexp(1.0, self.scale_exp)

    def packed_nibbles(self) -> bytes:
        """Two codes per byte, even index in the low nibble."""
        c = self.codes
        if c.size % 2:
            c = np.concatenate([c, np.zeros(1, dtype=np.uint8)])
        return (c[0::2] | (c[1::2] << 4)).tobytes()

    @staticmethod
    def unpack_nibbles(data: bytes, n: int) -> np.ndarray:
        buf = np.frombuffer(data, dtype=np.uint8)
        if buf.size * 2 < n:
            raise InvalidInput(f"nibble payload too short for {n} codes")
        out = np.empty(buf.size * 2, dtype=np.uint8)
        out[0::2] = buf & 0x0F
        out[1::2] = buf >> 4
        return out[:n].copy()

    def level_values(self) -> np.ndarray:
        """Unscaled level value per element (float64, exact for these dyadics)."""
        table = np.array([float(decode(raw, self.method)) for raw in range(N_CODES)])
        return table[self.codes].reshape(self.shape)

    def dequantize(self) -> np.ndarray:
        return self.level_values() * self.scale


def quantize_array(
    values: np.ndarray, method: PoTMethod, scale_exp: int | None = None
) -> QuantizedTensor:
    """Quantize a real-valued tensor elementwise; see quantize_to_method."""
    spec = spec_for(method)
    if scale_exp is None:
        scale_exp = spec.default_scale_exp
    _check_scale_exp(scale_exp)
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidInput("tensor contains non-finite values")
    with np.errstate(over="ignore"):
        y = np.ldexp(arr, -scale_exp).reshape(-1)
    if method is PoTMethod.QKERAS_8_4:
        codes = _qkeras_shift_codes(y)
    else:
        codes = _nearest_level_codes(y, method)
    return QuantizedTensor(arr.shape, codes, scale_exp, method)


def preprocess_weights(weights: np.ndarray, scale_exp: int = -8) -> QuantizedTensor:
    """Convert integer weights of the form +-2**e (e in 0..7) to qkeras codes.

    The incoming tensor is the 8-bit shift-friendly weight layout; this
    stage only re-encodes exponents, it never rounds.
    """
    w = np.asarray(weights)
    if not np.issubdtype(w.dtype, np.integer):
        raise InvalidInput(f"expected an integer tensor, got dtype {w.dtype}")
    flat = w.reshape(-1).astype(np.int64)
    if flat.size == 0:
        return QuantizedTensor(w.shape if w.shape else (0,), np.empty(0, np.uint8), scale_exp, PoTMethod.QKERAS_8_4)
    mag = np.abs(flat)
    zeros = np.flatnonzero(mag == 0)
    if zeros.size:
        raise ZeroWeightNotRepresentable(f"weight 0 at flat index {int(zeros[0])}")
    bad = np.flatnonzero((mag > 128) | ((mag & (mag - 1)) != 0))
    if bad.size:
        i = int(bad[0])
        raise NotPoTWeight(i, int(flat[i]))
    shifts = np.round(np.log2(mag)).astype(np.uint8)  # exact for powers of two
    codes = np.where(flat < 0, 0b1000, 0).astype(np.uint8) | shifts
    return QuantizedTensor(w.shape, codes, scale_exp, PoTMethod.QKERAS_8_4)


def quantization_stats(original: np.ndarray, qt: QuantizedTensor) -> dict:
    """Error statistics plus a histogram over the hit levels."""
    orig = np.asarray(original, dtype=np.float64).reshape(-1)
    deq = qt.dequantize().reshape(-1)
    if orig.size != deq.size:
        raise InvalidInput("original and quantized sizes differ")
    if orig.size == 0:
        return {"count": 0, "mse": 0.0, "max_abs_error": 0.0, "levels": []}
    err = deq - orig
    values, counts = np.unique(deq, return_counts=True)
    return {
        "count": int(orig.size),
        "mse": float(np.mean(err * err)),
        "max_abs_error": float(np.max(np.abs(err))),
        "levels": [
            {"level": float(v), "count": int(c)} for v, c in zip(values, counts)
        ],
    }


# ---------------------------------------------------------------------------
# POTQ container
#
# magic "POTQ" | version u8 | method u8 | rank u32 LE | dims u32 LE each |
# scale_exp i8 | packed nibbles (two codes per byte, low nibble first)
# ---------------------------------------------------------------------------


def write_potq(qt: QuantizedTensor) -> bytes:
    header = POTQ_MAGIC + struct.pack("<BBI", POTQ_VERSION, qt.method.value, len(qt.shape))
    header += struct.pack(f"<{len(qt.shape)}I", *qt.shape)
    header += struct.pack("<b", qt.scale_exp)
    return header + qt.packed_nibbles()


def read_potq(data: bytes) -> QuantizedTensor:
    if len(data) < 10 or data[:4] != POTQ_MAGIC:
        raise InvalidInput("not a POTQ payload (bad magic)")
    try:
        version, method_id, rank = struct.unpack_from("<BBI", data, 4)
        if version != POTQ_VERSION:
            raise InvalidInput(f"unsupported POTQ version {version}")
        try:
            method = PoTMethod(method_id)
        except ValueError:
            raise InvalidInput(f"unknown method id {method_id}")
        offset = 10
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        (scale_exp,) = struct.unpack_from("<b", data, offset)
        offset += 1
    except struct.error as exc:
        raise InvalidInput(f"truncated POTQ header: {exc}")
    n = 1
    for d in dims:
        n *= d
    codes = QuantizedTensor.unpack_nibbles(data[offset:], n)
    return QuantizedTensor(dims, codes, scale_exp, method)


def save_potq(qt: QuantizedTensor, path) -> None:
    with open(path, "wb") as f:
        f.write(write_potq(qt))


def load_potq(path) -> QuantizedTensor:
    with open(path, "rb") as f:
        return read_potq(f.read())


def floats_from_bytes(data: bytes, shape) -> np.ndarray:
    """Raw little-endian float32 payload -> float64 tensor of the given shape."""
    arr = np.frombuffer(data, dtype="<f4")
    n = int(np.prod(shape)) if len(tuple(shape)) else 0
    if arr.size != n:
        raise InvalidInput(f"payload holds {arr.size} floats, shape {tuple(shape)} needs {n}")
    return arr.astype(np.float64).reshape(tuple(shape))
