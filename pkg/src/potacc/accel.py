"""Simulator for the four-unit shift accelerator (4 GEMM units x 64 MACs).

Convolutions lower onto the GEMM units through im2col; depthwise layers run
as one small GEMM per channel. The weight buffer holds a layer's weights
when they fit; otherwise weights stream once per output-column block, so
halving the weight bit-width halves the streamed bytes and can also drop
the number of streaming passes entirely once the 4-bit copy fits.

Transfers and compute are serialized by default (`overlap_transfers` turns
the sum into a max). Layers the accelerator cannot run are charged to the
host CPU as op_count * cpu_cycles_per_op.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .codec import QuantizedTensor
from .cost import (
    BASE_MAC_CYCLES,
    ClockConfig,
    TimingProfile,
    energy_per_mac_factor,
    mac_time_factor,
)
from .errors import (
    InvalidInput,
    MalformedModel,
    MethodMismatch,
    ShapeMismatch,
    UnsupportedLayer,
)
from .gemm import TileConfig, gemm_execute
from .methods import KIND_TO_METHOD, PEKind


class LayerKind(enum.Enum):
    CONV2D = "conv2d"
    DEPTHWISE_CONV2D = "depthwise_conv2d"
    DENSE = "dense"
    OTHER = "other"


CONV_KINDS = (LayerKind.CONV2D, LayerKind.DEPTHWISE_CONV2D)
ACCEL_KINDS = (*CONV_KINDS, LayerKind.DENSE)


def conv_output_dims(h: int, w: int, kh: int, kw: int, stride: int, padding: str):
    """Output spatial dims plus leading pad amounts (TF-style conventions)."""
    if padding == "same":
        h_out = math.ceil(h / stride)
        w_out = math.ceil(w / stride)
        pad_h = max((h_out - 1) * stride + kh - h, 0)
        pad_w = max((w_out - 1) * stride + kw - w, 0)
        return h_out, w_out, pad_h // 2, pad_w // 2, pad_h, pad_w
    if padding == "valid":
        if h < kh or w < kw:
            raise MalformedModel(f"valid conv kernel {kh}x{kw} larger than input {h}x{w}")
        return (h - kh) // stride + 1, (w - kw) // stride + 1, 0, 0, 0, 0
    raise MalformedModel(f"unknown padding {padding!r}")


@dataclass
class LayerConfig:
    """One resolved layer: input dims are already known."""

    kind: LayerKind
    name: str = ""
    h_in: int = 1
    w_in: int = 1
    c_in: int = 1
    c_out: int = 1
    kh: int = 1
    kw: int = 1
    stride: int = 1
    padding: str = "same"
    op_count: int | None = None  # required for OTHER; default 2*MACs otherwise
    requant_shift: int = 0
    out_h: int | None = None  # explicit output dims (OTHER layers)
    out_w: int | None = None
    out_c: int | None = None
    weights: object | None = None  # QuantizedTensor or int8 ndarray

    def __post_init__(self):
        dims = (self.h_in, self.w_in, self.c_in, self.c_out, self.kh, self.kw, self.stride)
        if any(d < 1 for d in dims):
            raise MalformedModel(f"layer {self.name!r} has non-positive dims")
        if self.kind is LayerKind.DEPTHWISE_CONV2D and self.c_out != self.c_in:
            raise MalformedModel(f"depthwise layer {self.name!r} must have c_out == c_in")
        if self.kind is LayerKind.OTHER and self.op_count is None:
            raise MalformedModel(f"layer {self.name!r} of kind 'other' needs op_count")

    def output_dims(self) -> tuple[int, int, int]:
        if self.kind in CONV_KINDS:
            h_out, w_out, *_ = conv_output_dims(
                self.h_in, self.w_in, self.kh, self.kw, self.stride, self.padding
            )
            return h_out, w_out, self.c_out
        if self.kind is LayerKind.DENSE:
            return 1, 1, self.c_out
        return (
            self.out_h if self.out_h is not None else self.h_in,
            self.out_w if self.out_w is not None else self.w_in,
            self.out_c if self.out_c is not None else self.c_in,
        )


@dataclass(frozen=True)
class GemmLowering:
    """GEMM dims for a lowered layer; `count` identical GEMMs run in sequence."""

    m: int
    k: int
    n: int
    count: int = 1

    @property
    def macs(self) -> int:
        return self.m * self.k * self.n * self.count


def im2col_lower(layer: LayerConfig) -> GemmLowering:
    """GEMM dims of a conv/dense layer: M = output channels, K = patch size,
    N = output pixels. Depthwise lowers to c_in single-row GEMMs."""
    if layer.kind is LayerKind.CONV2D:
        h_out, w_out, _ = layer.output_dims()
        return GemmLowering(layer.c_out, layer.kh * layer.kw * layer.c_in, h_out * w_out)
    if layer.kind is LayerKind.DEPTHWISE_CONV2D:
        h_out, w_out, _ = layer.output_dims()
        return GemmLowering(1, layer.kh * layer.kw, h_out * w_out, count=layer.c_in)
    if layer.kind is LayerKind.DENSE:
        return GemmLowering(layer.c_out, layer.h_in * layer.w_in * layer.c_in, 1)
    raise UnsupportedLayer(f"layer kind {layer.kind.value} has no GEMM lowering")


@dataclass
class AcceleratorConfig:
    n_gemm_units: int = 4
    macs_per_unit: int = 64
    weight_buffer_bytes: int = 131072
    bus_bytes_per_cycle: int = 4
    pe_kind: PEKind = PEKind.SHIFT_QKERAS
    clock: ClockConfig = field(default_factory=ClockConfig)
    tiles: TileConfig = field(default_factory=TileConfig)
    overlap_transfers: bool = False
    cpu_cycles_per_op: float = 2.0
    dram_energy_per_byte: float = 1e-10

    def __post_init__(self):
        positive = (
            self.n_gemm_units,
            self.macs_per_unit,
            self.weight_buffer_bytes,
            self.bus_bytes_per_cycle,
            self.cpu_cycles_per_op,
        )
        if any(v <= 0 for v in positive):
            raise InvalidInput("accelerator config fields must be positive")
        if self.dram_energy_per_byte < 0:
            raise InvalidInput("dram_energy_per_byte cannot be negative")

    @property
    def total_macs_per_cycle(self) -> int:
        return self.n_gemm_units * self.macs_per_unit

    @property
    def weight_bits(self) -> int:
        return 8 if self.pe_kind is PEKind.MULT_UNIFORM else 4

    def with_kind(self, kind: PEKind) -> "AcceleratorConfig":
        return replace(self, pe_kind=kind)


def weight_bytes_for(macs_shape_mk: int, weight_bits: int) -> int:
    """Bytes to hold M*K weight entries at the given bit-width, rounded up."""
    return math.ceil(macs_shape_mk * weight_bits / 8)


@dataclass
class LayerTiming:
    lowering: GemmLowering
    compute_cycles: float
    transfer_cycles: int
    weight_bytes: int  # one resident copy, all channel GEMMs included
    weight_transfer_bytes: int
    input_bytes: int
    output_bytes: int
    stream_passes: int

    @property
    def total_bytes(self) -> int:
        return self.input_bytes + self.output_bytes + self.weight_transfer_bytes


def layer_timing(
    layer: LayerConfig, config: AcceleratorConfig, profile: TimingProfile
) -> LayerTiming:
    """Compute and transfer cycle counts for one accelerator layer.

    Weights that fit the buffer load once; larger weights stream once per
    output-column block of tile_n columns. Inputs arrive as the im2col
    stream (K*N bytes) and outputs leave as requantized int8 (M*N bytes).
    """
    low = im2col_lower(layer)
    factor = mac_time_factor(config.pe_kind, profile)
    per_gemm_macs = low.m * low.k * low.n
    per_gemm_cycles = math.ceil(per_gemm_macs / config.total_macs_per_cycle) * BASE_MAC_CYCLES
    n_tiles = config.tiles.n_tiles(low.m, low.n, low.k)
    compute = low.count * (
        per_gemm_cycles * factor + n_tiles * config.tiles.per_tile_overhead_cycles
    )

    per_gemm_weight_bytes = weight_bytes_for(low.m * low.k, config.weight_bits)
    if per_gemm_weight_bytes <= config.weight_buffer_bytes:
        passes = 1
    else:
        passes = math.ceil(low.n / config.tiles.tile_n)
    weight_transfer = per_gemm_weight_bytes * passes * low.count

    input_bytes = low.k * low.n * low.count
    output_bytes = low.m * low.n * low.count
    transfer = math.ceil((input_bytes + output_bytes + weight_transfer) / config.bus_bytes_per_cycle)
    return LayerTiming(
        lowering=low,
        compute_cycles=compute,
        transfer_cycles=transfer,
        weight_bytes=per_gemm_weight_bytes * low.count,
        weight_transfer_bytes=weight_transfer,
        input_bytes=input_bytes,
        output_bytes=output_bytes,
        stream_passes=passes,
    )


# ---------------------------------------------------------------------------
# numeric execution
# ---------------------------------------------------------------------------


def _check_int8(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr)
    if not np.issubdtype(arr.dtype, np.integer):
        raise InvalidInput(f"{what} must be integers, got dtype {arr.dtype}")
    if arr.size and (arr.min() < -128 or arr.max() > 127):
        raise InvalidInput(f"{what} outside int8 range")
    return arr


def im2col(input_hwc: np.ndarray, layer: LayerConfig) -> np.ndarray:
    """Patch matrix of shape (kh*kw*c, h_out*w_out); zero padding."""
    x = _check_int8(input_hwc, "activations")
    if x.shape != (layer.h_in, layer.w_in, layer.c_in):
        raise ShapeMismatch(
            f"input {x.shape} does not match layer input {(layer.h_in, layer.w_in, layer.c_in)}"
        )
    h_out, w_out, pt, pl, ph, pw = conv_output_dims(
        layer.h_in, layer.w_in, layer.kh, layer.kw, layer.stride, layer.padding
    )
    padded = np.zeros((layer.h_in + ph, layer.w_in + pw, layer.c_in), dtype=x.dtype)
    padded[pt : pt + layer.h_in, pl : pl + layer.w_in, :] = x
    s = layer.stride
    rows = []
    for i in range(layer.kh):
        for j in range(layer.kw):
            window = padded[i : i + (h_out - 1) * s + 1 : s, j : j + (w_out - 1) * s + 1 : s, :]
            rows.append(window.reshape(h_out * w_out, layer.c_in))
    # (kh*kw, N, c) -> (kh, kw, c major order) x N
    patches = np.stack(rows, axis=0)  # (kh*kw, N, c)
    patches = patches.transpose(0, 2, 1).reshape(layer.kh * layer.kw * layer.c_in, h_out * w_out)
    return patches


def _weight_gemm_operand(weights, layer: LayerConfig, kind: PEKind, channel: int | None = None):
    """Weights as the (K, M) right-hand GEMM operand for gemm_execute."""
    if layer.kind is LayerKind.DEPTHWISE_CONV2D:
        expected = (layer.kh, layer.kw, layer.c_in)
    elif layer.kind is LayerKind.CONV2D:
        expected = (layer.kh, layer.kw, layer.c_in, layer.c_out)
    else:  # DENSE
        expected = (layer.h_in * layer.w_in * layer.c_in, layer.c_out)
    if kind is PEKind.MULT_UNIFORM:
        w = _check_int8(weights, "weights")
        if w.shape != expected:
            raise ShapeMismatch(f"weights {w.shape}, layer expects {expected}")
        if channel is not None:
            w = w[:, :, channel]
        return w.reshape(-1, 1 if channel is not None else expected[-1])
    if not isinstance(weights, QuantizedTensor):
        raise MethodMismatch(f"{kind.value} needs a QuantizedTensor of packed codes")
    if weights.method is not KIND_TO_METHOD[kind]:
        raise MethodMismatch(
            f"{weights.method.short_name} weights fed to a {kind.value} accelerator"
        )
    if weights.shape != expected:
        raise ShapeMismatch(f"weights {weights.shape}, layer expects {expected}")
    codes = weights.codes.reshape(weights.shape)
    if channel is not None:
        codes = codes[:, :, channel]
    flat = codes.reshape(-1, 1 if channel is not None else expected[-1])
    return QuantizedTensor(flat.shape, flat.reshape(-1), weights.scale_exp, weights.method)


def conv_execute(
    input_hwc: np.ndarray,
    weights,
    layer: LayerConfig,
    kind: PEKind,
    tiles: TileConfig = TileConfig(),
) -> np.ndarray:
    """Exact integer convolution via im2col on the GEMM engine.

    Returns the (h_out, w_out, c_out) int32 accumulator tensor, scaled by
    2**F for the shift kinds.
    """
    if layer.kind is LayerKind.DENSE:
        flat = _check_int8(input_hwc, "activations").reshape(1, -1)
        if flat.shape[1] != layer.h_in * layer.w_in * layer.c_in:
            raise ShapeMismatch(
                f"dense input has {flat.shape[1]} features, layer expects "
                f"{layer.h_in * layer.w_in * layer.c_in}"
            )
        out = gemm_execute(flat, _weight_gemm_operand(weights, layer, kind), kind, tiles)
        return out.reshape(1, 1, layer.c_out)
    if layer.kind not in CONV_KINDS:
        raise UnsupportedLayer(f"cannot execute layer kind {layer.kind.value}")
    h_out, w_out, _ = layer.output_dims()
    if layer.kind is LayerKind.DEPTHWISE_CONV2D:
        x = _check_int8(input_hwc, "activations")
        out = np.empty((h_out, w_out, layer.c_in), dtype=np.int32)
        sub = replace(layer, kind=LayerKind.CONV2D, c_in=1, c_out=1, weights=None)
        for c in range(layer.c_in):
            patches = im2col(x[:, :, c : c + 1], sub)
            wop = _weight_gemm_operand(weights, layer, kind, channel=c)
            res = gemm_execute(patches.T, wop, kind, tiles)
            out[:, :, c] = res.reshape(h_out, w_out)
        return out
    patches = im2col(input_hwc, layer)  # (K, N)
    wop = _weight_gemm_operand(weights, layer, kind)  # (K, M)
    res = gemm_execute(patches.T, wop, kind, tiles)  # (N, M)
    return res.reshape(h_out, w_out, layer.c_out)


def requantize_int8(acc: np.ndarray, shift: int) -> np.ndarray:
    """Shift-only requantization: round half away from zero, saturate to int8."""
    a = np.asarray(acc, dtype=np.int64)
    if shift > 0:
        mag = np.abs(a)
        rounded = (mag + (1 << (shift - 1))) >> shift
        a = np.sign(a) * rounded
    elif shift < 0:
        a = a << (-shift)
    return np.clip(a, -128, 127).astype(np.int8)


# ---------------------------------------------------------------------------
# whole-model runs
# ---------------------------------------------------------------------------


@dataclass
class LayerReport:
    index: int
    name: str
    kind: str
    placement: str  # "ACCEL" | "CPU"
    m: int | None
    k: int | None
    n: int | None
    macs: int
    compute_cycles: float
    transfer_cycles: int
    weight_bytes: int
    weight_transfer_bytes: int
    time_ms: float
    energy_joules: float
    numeric_executed: bool


@dataclass
class SimReport:
    model: str
    pe_kind: PEKind
    profile: TimingProfile
    placement: str
    layers: list[LayerReport] = field(default_factory=list)
    # final int8 activation of the numeric chain (None if it stopped); not serialized
    final_activation: np.ndarray | None = None

    @property
    def total_time_ms(self) -> float:
        return sum(l.time_ms for l in self.layers)

    @property
    def total_energy_joules(self) -> float:
        return sum(l.energy_joules for l in self.layers)

    def time_ms_for(self, placement: str) -> float:
        return sum(l.time_ms for l in self.layers if l.placement == placement)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "pe_kind": self.pe_kind.value,
            "profile": self.profile.value,
            "placement": self.placement,
            "layers": [
                {
                    "index": l.index,
                    "name": l.name,
                    "kind": l.kind,
                    "placement": l.placement,
                    "m": l.m,
                    "k": l.k,
                    "n": l.n,
                    "macs": l.macs,
                    "compute_cycles": l.compute_cycles,
                    "transfer_cycles": l.transfer_cycles,
                    "weight_bytes": l.weight_bytes,
                    "weight_transfer_bytes": l.weight_transfer_bytes,
                    "time_ms": l.time_ms,
                    "energy_joules": l.energy_joules,
                    "numeric_executed": l.numeric_executed,
                }
                for l in self.layers
            ],
            "totals": {
                "time_ms": self.total_time_ms,
                "energy_joules": self.total_energy_joules,
                "accel_time_ms": self.time_ms_for("ACCEL"),
                "cpu_time_ms": self.time_ms_for("CPU"),
                "compute_cycles": sum(l.compute_cycles for l in self.layers),
                "transfer_cycles": sum(l.transfer_cycles for l in self.layers),
            },
        }


def _weights_pair_with(weights, kind: PEKind) -> bool:
    if kind is PEKind.MULT_UNIFORM:
        return not isinstance(weights, QuantizedTensor)
    return isinstance(weights, QuantizedTensor) and weights.method is KIND_TO_METHOD[kind]


def _cpu_layer_cost(layer: LayerConfig, config: AcceleratorConfig) -> tuple[float, float, int]:
    """(time_ms, energy_joules, op_count) of running a layer on the host CPU."""
    if layer.op_count is not None:
        ops = layer.op_count
    elif layer.kind in ACCEL_KINDS:
        ops = 2 * im2col_lower(layer).macs  # multiply + add per MAC
    else:
        raise MalformedModel(f"layer {layer.name!r} has no op_count")
    cycles = ops * config.cpu_cycles_per_op
    seconds = cycles / config.clock.cpu_hz
    return seconds * 1e3, seconds * config.clock.cpu_power_watts, ops


def _accel_layer_cost(
    layer: LayerConfig, config: AcceleratorConfig, profile: TimingProfile
) -> tuple[LayerTiming, float, float]:
    """(timing, time_ms, energy_joules) of one accelerator layer."""
    timing = layer_timing(layer, config, profile)
    if config.overlap_transfers:
        cycles = max(timing.compute_cycles, timing.transfer_cycles)
    else:
        cycles = timing.compute_cycles + timing.transfer_cycles
    seconds = cycles / config.clock.accel_hz
    low = timing.lowering
    base_mac_cycles = (
        math.ceil(low.m * low.k * low.n / config.total_macs_per_cycle)
        * BASE_MAC_CYCLES
        * low.count
    )
    overhead_cycles = (
        config.tiles.n_tiles(low.m, low.n, low.k)
        * config.tiles.per_tile_overhead_cycles
        * low.count
    )
    compute_j = (
        base_mac_cycles / config.clock.accel_hz * config.clock.accel_power_watts
    ) * energy_per_mac_factor(config.pe_kind) + (
        overhead_cycles / config.clock.accel_hz * config.clock.accel_power_watts
    )
    transfer_j = timing.total_bytes * config.dram_energy_per_byte
    return timing, seconds * 1e3, compute_j + transfer_j


def run_model(
    layers: list[LayerConfig],
    config: AcceleratorConfig,
    profile: TimingProfile = TimingProfile.MEASURED,
    placement: str = "accel",
    input_tensor: np.ndarray | None = None,
    model_name: str = "",
) -> SimReport:
    """Simulate a whole model: conv/dense on the accelerator (unless forced
    to CPU), everything else on the CPU.

    When a layer carries weights matching the configured PE kind and an
    activation tensor is flowing, the layer also executes numerically and
    its int32 accumulator is requantized to int8 (per-layer power-of-two
    shift) before feeding the next layer. The numeric chain stops at layers
    that change dims without computing (e.g. pools given only an op count).
    """
    if placement not in ("accel", "cpu"):
        raise InvalidInput(f"placement must be 'accel' or 'cpu', got {placement!r}")
    report = SimReport(model=model_name, pe_kind=config.pe_kind, profile=profile, placement=placement)
    current = None
    if input_tensor is not None:
        current = _check_int8(input_tensor, "model input").astype(np.int8)

    for idx, layer in enumerate(layers):
        on_accel = placement == "accel" and layer.kind in ACCEL_KINDS
        low = im2col_lower(layer) if layer.kind in ACCEL_KINDS else None
        numeric = False
        if on_accel:
            timing, time_ms, energy_j = _accel_layer_cost(layer, config, profile)
            if (
                current is not None
                and layer.weights is not None
                and _weights_pair_with(layer.weights, config.pe_kind)
            ):
                acc = conv_execute(current, layer.weights, layer, config.pe_kind, config.tiles)
                current = requantize_int8(acc, layer.requant_shift)
                numeric = True
            elif current is not None:
                current = None  # no usable weights: numeric chain stops here
            report.layers.append(
                LayerReport(
                    index=idx,
                    name=layer.name,
                    kind=layer.kind.value,
                    placement="ACCEL",
                    m=low.m,
                    k=low.k,
                    n=low.n,
                    macs=low.macs,
                    compute_cycles=timing.compute_cycles,
                    transfer_cycles=timing.transfer_cycles,
                    weight_bytes=timing.weight_bytes,
                    weight_transfer_bytes=timing.weight_transfer_bytes,
                    time_ms=time_ms,
                    energy_joules=energy_j,
                    numeric_executed=numeric,
                )
            )
        else:
            time_ms, energy_j, _ = _cpu_layer_cost(layer, config)
            if current is not None:
                out_dims = layer.output_dims()
                if layer.kind is LayerKind.OTHER and out_dims == (layer.h_in, layer.w_in, layer.c_in):
                    numeric = True  # dimension-preserving pass-through
                else:
                    current = None
            report.layers.append(
                LayerReport(
                    index=idx,
                    name=layer.name,
                    kind=layer.kind.value,
                    placement="CPU",
                    m=low.m if low else None,
                    k=low.k if low else None,
                    n=low.n if low else None,
                    macs=low.macs if low else 0,
                    compute_cycles=0.0,
                    transfer_cycles=0,
                    weight_bytes=0,
                    weight_transfer_bytes=0,
                    time_ms=time_ms,
                    energy_joules=energy_j,
                    numeric_executed=numeric,
                )
            )
    report.final_activation = current
    return report
