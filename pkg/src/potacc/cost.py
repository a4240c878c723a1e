"""Per-PE hardware cost constants and the two timing profiles.

The resource/cycle numbers come from HLS synthesis of the four PE cores at
250 MHz and are frozen here; the measured speedup/energy factors come from
averaging a 27-case synthetic GEMM suite against the 8-bit multiplier PE.

The two sets disagree as pure ratios (the apot core needs the most cycles
yet measures faster than the multiplier, because shifter logic is much
cheaper than multiplier logic at a fixed clock). Both views are exposed:
ANALYTIC uses raw cycle counts, MEASURED uses the calibrated wall-clock
factors and is the default for simulator timing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import InvalidInput
from .methods import PEKind


class TimingProfile(enum.Enum):
    ANALYTIC = "analytic"
    MEASURED = "measured"

    @classmethod
    def from_name(cls, name: str) -> "TimingProfile":
        try:
            return cls(name.lower())
        except ValueError:
            raise InvalidInput(f"unknown profile {name!r}; expected 'analytic' or 'measured'")


@dataclass(frozen=True)
class PECostProfile:
    kind: PEKind
    lut: int
    ff: int
    shift_cycles: int
    measured_speedup: float
    measured_energy_reduction: float


PE_COST_TABLE = {
    PEKind.SHIFT_QKERAS: PECostProfile(PEKind.SHIFT_QKERAS, 33, 0, 1, 1.60, 1.55),
    PEKind.SHIFT_MSQ: PECostProfile(PEKind.SHIFT_MSQ, 89, 17, 2, 1.33, 1.31),
    PEKind.SHIFT_APOT: PECostProfile(PEKind.SHIFT_APOT, 118, 19, 3, 1.14, 1.14),
    PEKind.MULT_UNIFORM: PECostProfile(PEKind.MULT_UNIFORM, 41, 0, 2, 1.00, 1.00),
}

# Every MAC is charged relative to the multiplier PE's 2-cycle core.
BASE_MAC_CYCLES = PE_COST_TABLE[PEKind.MULT_UNIFORM].shift_cycles


def cost_profile(kind: PEKind) -> PECostProfile:
    return PE_COST_TABLE[kind]


def resource_estimate(kind: PEKind, n_pes: int) -> dict:
    """Linear LUT/FF extrapolation over identical PE instances."""
    if n_pes < 1:
        raise InvalidInput(f"n_pes must be >= 1, got {n_pes}")
    prof = PE_COST_TABLE[kind]
    return {"lut": prof.lut * n_pes, "ff": prof.ff * n_pes}


def mac_time_factor(kind: PEKind, profile: TimingProfile) -> float:
    """Time per MAC relative to the uniform multiplier PE (1.0)."""
    prof = PE_COST_TABLE[kind]
    if profile is TimingProfile.ANALYTIC:
        return prof.shift_cycles / BASE_MAC_CYCLES
    return 1.0 / prof.measured_speedup


def energy_per_mac_factor(kind: PEKind) -> float:
    """Energy per MAC relative to the uniform multiplier PE (1.0)."""
    return 1.0 / PE_COST_TABLE[kind].measured_energy_reduction


# Average power of the reference accelerator runs (energy / time quotients
# of three measured end-to-end executions).
ACCEL_POWER_WATTS_DEFAULT = 1.5685
# Same derivation for the embedded dual-core CPU.
CPU_POWER_WATTS_DEFAULT = 1.24


@dataclass
class ClockConfig:
    """Clocks, power draws and bus width shared by the simulators."""

    accel_hz: float = 250e6
    cpu_hz: float = 650e6
    accel_power_watts: float = ACCEL_POWER_WATTS_DEFAULT
    cpu_power_watts: float = CPU_POWER_WATTS_DEFAULT
    bus_bytes_per_cycle: int = 4

    def __post_init__(self):
        for name in ("accel_hz", "cpu_hz", "accel_power_watts", "cpu_power_watts", "bus_bytes_per_cycle"):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be positive")
