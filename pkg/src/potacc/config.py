"""Flat JSON run configuration shared by the CLI and the service.

Every knob of the two simulators lives in one flat object so a config file
is a plain key/value JSON document. The hardware cost table (LUT/FF/cycle
counts and measured factors) is intentionally NOT configurable; those are
frozen constants in :mod:`potacc.cost`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .accel import AcceleratorConfig
from .cost import ACCEL_POWER_WATTS_DEFAULT, CPU_POWER_WATTS_DEFAULT, ClockConfig
from .errors import InvalidInput
from .gemm import TileConfig
from .methods import PEKind


@dataclass
class SimConfig:
    seed: int = 1
    accel_hz: float = 250e6
    cpu_hz: float = 650e6
    accel_power_watts: float = ACCEL_POWER_WATTS_DEFAULT
    cpu_power_watts: float = CPU_POWER_WATTS_DEFAULT
    bus_bytes_per_cycle: int = 4
    weight_buffer_bytes: int = 131072
    n_gemm_units: int = 4
    macs_per_unit: int = 64
    tile_m: int = 64
    tile_n: int = 64
    tile_k: int = 64
    per_tile_overhead_cycles: int = 16
    cpu_cycles_per_op: float = 2.0
    dram_energy_per_byte: float = 1e-10
    overlap_transfers: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        if not isinstance(data, dict):
            raise InvalidInput("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise InvalidInput(f"bad config: {exc}")
        cfg.clock()  # validates positivity
        cfg.tiles()
        return cfg

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(Path(path)) as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(Path(path), "w") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")

    def clock(self) -> ClockConfig:
        return ClockConfig(
            accel_hz=self.accel_hz,
            cpu_hz=self.cpu_hz,
            accel_power_watts=self.accel_power_watts,
            cpu_power_watts=self.cpu_power_watts,
            bus_bytes_per_cycle=self.bus_bytes_per_cycle,
        )

    def tiles(self, overhead: int | None = None) -> TileConfig:
        return TileConfig(
            tile_m=self.tile_m,
            tile_n=self.tile_n,
            tile_k=self.tile_k,
            per_tile_overhead_cycles=(
                self.per_tile_overhead_cycles if overhead is None else overhead
            ),
        )

    def accelerator(self, kind: PEKind, overhead: int | None = None) -> AcceleratorConfig:
        return AcceleratorConfig(
            n_gemm_units=self.n_gemm_units,
            macs_per_unit=self.macs_per_unit,
            weight_buffer_bytes=self.weight_buffer_bytes,
            bus_bytes_per_cycle=self.bus_bytes_per_cycle,
            pe_kind=kind,
            clock=self.clock(),
            tiles=self.tiles(overhead),
            overlap_transfers=self.overlap_transfers,
            cpu_cycles_per_op=self.cpu_cycles_per_op,
            dram_energy_per_byte=self.dram_energy_per_byte,
        )
