"""Cycle model and bit-exact execution for the 64-PE matrix-multiply unit.

The unit computes C = A x W with 64 PEs working in parallel; operands
arrive tile by tile. Numeric execution is exact integer arithmetic, so the
result is independent of the tile schedule. Timing charges every MAC
relative to the 2-cycle multiplier baseline plus a fixed per-tile overhead;
data transfer time is out of scope here (the synthetic suite measures
compute only).

Energy is charged per MAC: the per-kind factor scales the baseline MAC
energy, so the measured energy-reduction ratios are reproduced instead of
being double-counted through the speedup.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .codec import QuantizedTensor
from .cost import BASE_MAC_CYCLES, ClockConfig, TimingProfile, energy_per_mac_factor, mac_time_factor
from .errors import AccumulatorOverflow, InvalidInput, MethodMismatch, ShapeMismatch
from .methods import KIND_TO_METHOD, PEKind
from .pe import ACC_MAX, ACC_MIN, level_int_array
from .rng import Xorshift64

N_PES = 64

SUITE_M = (128, 256, 512)
SUITE_N = (64, 256, 1024)
SUITE_K = (256, 512, 1024)


@dataclass(frozen=True)
class BenchmarkCase:
    m: int
    n: int
    k: int

    @property
    def macs(self) -> int:
        return self.m * self.n * self.k

    @property
    def label(self) -> str:
        return f"{self.m}x{self.n}x{self.k}"

    @classmethod
    def parse(cls, label: str) -> "BenchmarkCase":
        parts = label.lower().split("x")
        if len(parts) != 3:
            raise InvalidInput(f"case {label!r} is not of the form MxNxK")
        try:
            m, n, k = (int(p) for p in parts)
        except ValueError:
            raise InvalidInput(f"case {label!r} is not of the form MxNxK")
        if min(m, n, k) < 1:
            raise InvalidInput(f"case {label!r} has non-positive dims")
        return cls(m, n, k)


def benchmark_suite() -> list[BenchmarkCase]:
    """The 27 synthetic cases, enumerated m-major, then n, then k."""
    return [BenchmarkCase(m, n, k) for m in SUITE_M for n in SUITE_N for k in SUITE_K]


@dataclass(frozen=True)
class TileConfig:
    tile_m: int = 64
    tile_n: int = 64
    tile_k: int = 64
    per_tile_overhead_cycles: int = 16

    def __post_init__(self):
        if min(self.tile_m, self.tile_n, self.tile_k) < 1:
            raise InvalidInput("tile dims must be positive")
        if self.per_tile_overhead_cycles < 0:
            raise InvalidInput("per-tile overhead cannot be negative")

    def n_tiles(self, m: int, n: int, k: int) -> int:
        return (
            math.ceil(m / self.tile_m)
            * math.ceil(n / self.tile_n)
            * math.ceil(k / self.tile_k)
        )


def _weight_matrix(W, kind: PEKind) -> np.ndarray:
    """int64 weight matrix in PE units (level * 2**F for shift kinds)."""
    if kind is PEKind.MULT_UNIFORM:
        if isinstance(W, QuantizedTensor):
            raise MethodMismatch("mult_uniform takes a plain int8 matrix, not packed codes")
        Wm = np.asarray(W)
        if not np.issubdtype(Wm.dtype, np.integer):
            raise InvalidInput(f"uniform weights must be integers, got dtype {Wm.dtype}")
        if Wm.size and (Wm.min() < -128 or Wm.max() > 127):
            raise InvalidInput("uniform weight outside int8 range")
        return Wm.astype(np.int64)
    if not isinstance(W, QuantizedTensor):
        raise MethodMismatch(f"{kind.value} needs a QuantizedTensor of packed codes")
    if W.method is not KIND_TO_METHOD[kind]:
        raise MethodMismatch(f"{W.method.short_name} tensor fed to a {kind.value} array")
    table = level_int_array(W.method).astype(np.int64)
    return table[W.codes].reshape(W.shape)


def gemm_execute(A, W, kind: PEKind, tiles: TileConfig = TileConfig()) -> np.ndarray:
    """Tiled integer GEMM, bit-exact: C[i,j] = sum_l A[i,l] * level(W[l,j]) * 2**F.

    Integer addition commutes, so any tile schedule produces the identical
    int32 result; the tile loop here mirrors how operands are streamed.
    """
    A = np.asarray(A)
    if not np.issubdtype(A.dtype, np.integer):
        raise InvalidInput(f"activations must be integers, got dtype {A.dtype}")
    if A.ndim != 2:
        raise ShapeMismatch(f"A must be 2-D, got shape {A.shape}")
    if A.size and (A.min() < -128 or A.max() > 127):
        raise InvalidInput("activation outside int8 range")
    Wm = _weight_matrix(W, kind)
    if Wm.ndim != 2:
        raise ShapeMismatch(f"W must be 2-D, got shape {Wm.shape}")
    m, k = A.shape
    kw, n = Wm.shape
    if k != kw:
        raise ShapeMismatch(f"A is {m}x{k} but W is {kw}x{n}")

    Al = A.astype(np.int64)
    C = np.zeros((m, n), dtype=np.int64)
    for i0 in range(0, m, tiles.tile_m):
        i1 = min(i0 + tiles.tile_m, m)
        for j0 in range(0, n, tiles.tile_n):
            j1 = min(j0 + tiles.tile_n, n)
            for l0 in range(0, k, tiles.tile_k):
                l1 = min(l0 + tiles.tile_k, k)
                C[i0:i1, j0:j1] += Al[i0:i1, l0:l1] @ Wm[l0:l1, j0:j1]
    if C.size and (C.min() < ACC_MIN or C.max() > ACC_MAX):
        raise AccumulatorOverflow("GEMM result left the int32 accumulator range")
    return C.astype(np.int32)


def mac_cycles(macs: int) -> float:
    """Cycles to issue `macs` MACs across the 64 PEs at the baseline rate."""
    return math.ceil(macs / N_PES) * BASE_MAC_CYCLES


def gemm_compute_cycles(
    case: BenchmarkCase, kind: PEKind, tiles: TileConfig, profile: TimingProfile
) -> float:
    """Compute-only cycles: MAC issue slots scaled per kind, plus tile overhead."""
    return (
        mac_cycles(case.macs) * mac_time_factor(kind, profile)
        + tiles.n_tiles(case.m, case.n, case.k) * tiles.per_tile_overhead_cycles
    )


def gemm_energy_joules(
    case: BenchmarkCase, kind: PEKind, tiles: TileConfig, clock: ClockConfig
) -> float:
    """Compute energy: per-MAC baseline energy scaled by the kind's factor.

    Tile overhead cycles are charged at the baseline rate for every kind.
    """
    mac_j = mac_cycles(case.macs) / clock.accel_hz * clock.accel_power_watts
    ovh_j = (
        tiles.n_tiles(case.m, case.n, case.k)
        * tiles.per_tile_overhead_cycles
        / clock.accel_hz
        * clock.accel_power_watts
    )
    return mac_j * energy_per_mac_factor(kind) + ovh_j


@dataclass
class SuiteRow:
    case: BenchmarkCase
    kind: PEKind
    cycles: float
    uniform_cycles: float
    energy_joules: float
    uniform_energy_joules: float

    @property
    def speedup(self) -> float:
        return self.uniform_cycles / self.cycles

    @property
    def energy_reduction(self) -> float:
        return self.uniform_energy_joules / self.energy_joules


@dataclass
class SuiteResult:
    kind: PEKind
    profile: TimingProfile
    rows: list[SuiteRow] = field(default_factory=list)

    @property
    def average_speedup(self) -> float:
        return sum(r.speedup for r in self.rows) / len(self.rows)

    @property
    def average_energy_reduction(self) -> float:
        return sum(r.energy_reduction for r in self.rows) / len(self.rows)


def run_suite(
    kind: PEKind,
    profile: TimingProfile,
    tiles: TileConfig = TileConfig(),
    clock: ClockConfig | None = None,
    cases: list[BenchmarkCase] | None = None,
) -> SuiteResult:
    """Timing-model run of the synthetic suite against the uniform baseline."""
    clock = clock or ClockConfig()
    result = SuiteResult(kind=kind, profile=profile)
    for case in cases if cases is not None else benchmark_suite():
        result.rows.append(
            SuiteRow(
                case=case,
                kind=kind,
                cycles=gemm_compute_cycles(case, kind, tiles, profile),
                uniform_cycles=gemm_compute_cycles(case, PEKind.MULT_UNIFORM, tiles, profile),
                energy_joules=gemm_energy_joules(case, kind, tiles, clock),
                uniform_energy_joules=gemm_energy_joules(case, PEKind.MULT_UNIFORM, tiles, clock),
            )
        )
    return result


BENCH_CSV_COLUMNS = [
    "m", "n", "k", "kind", "profile", "cycles", "speedup", "energy_joules", "energy_reduction",
]


def suite_rows_to_csv(results: list[SuiteResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_CSV_COLUMNS)
    for res in results:
        for r in res.rows:
            writer.writerow(
                [
                    r.case.m,
                    r.case.n,
                    r.case.k,
                    r.kind.value,
                    res.profile.value,
                    repr(r.cycles),
                    repr(r.speedup),
                    repr(r.energy_joules),
                    repr(r.energy_reduction),
                ]
            )
    return buf.getvalue()


def random_case_operands(case: BenchmarkCase, kind: PEKind, seed: int, scale_exp: int = 0):
    """Deterministic stimuli for one case: int8 A and method-matched weights."""
    rng = Xorshift64(seed)
    A = rng.int8_array((case.m, case.k))
    if kind is PEKind.MULT_UNIFORM:
        W = rng.int8_array((case.k, case.n))
    else:
        codes = rng.nibble_array((case.k * case.n,))
        W = QuantizedTensor((case.k, case.n), codes, scale_exp, KIND_TO_METHOD[kind])
    return A, W
