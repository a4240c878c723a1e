"""Pydantic request/response models for the potacc service API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

MethodName = Literal["qkeras", "msq", "apot", "uniform"]
ProfileName = Literal["analytic", "measured"]


class LevelCount(BaseModel):
    level: float
    count: int


class QuantizeStats(BaseModel):
    count: int
    mse: float
    max_abs_error: float
    levels: list[LevelCount]


class QuantizeRequest(BaseModel):
    method: MethodName
    shape: list[int]
    data_b64: Optional[str] = None  # raw little-endian float32 (or int8 in PoT mode)
    values: Optional[list[float]] = None
    scale_exp: Optional[int] = None
    from_int8_pot: bool = False  # input is int8 +-2**e weights, re-encode only


class QuantizeResponse(BaseModel):
    potq_b64: str
    stats: QuantizeStats


class PECheckRequest(BaseModel):
    methods: Optional[list[MethodName]] = None


class PECheckFailure(BaseModel):
    act: int
    weight: int
    got: int
    expected: str


class PECheckKindResult(BaseModel):
    kind: str
    cases: int
    passed: bool
    failures: list[PECheckFailure]


class PECheckResponse(BaseModel):
    passed: bool
    results: list[PECheckKindResult]


class BenchRequest(BaseModel):
    methods: Optional[list[MethodName]] = None  # default: all four
    profile: ProfileName = "measured"
    overhead: Optional[int] = None  # per-tile overhead override
    seed: int = 1
    case: Optional[str] = None  # "MxNxK" single-case filter
    config: Optional[dict] = None  # SimConfig fields


class BenchRow(BaseModel):
    m: int
    n: int
    k: int
    kind: str
    cycles: float
    speedup: float
    energy_joules: float
    energy_reduction: float


class BenchKindSummary(BaseModel):
    kind: str
    average_speedup: float
    average_energy_reduction: float
    # frozen calibration constants, echoed so drift is visible in reports
    reference_speedup: float
    reference_energy_reduction: float


class BenchResponse(BaseModel):
    profile: ProfileName
    n_cases: int
    rows: list[BenchRow]
    summaries: list[BenchKindSummary]
    note: Optional[str] = None


class RunModelRequest(BaseModel):
    model_doc: Optional[dict] = None  # inline model document
    fixture: Optional[str] = None  # or one of the bundled fixtures
    method: MethodName = "qkeras"
    profile: ProfileName = "measured"
    placement: Literal["accel", "cpu"] = "accel"
    config: Optional[dict] = None
    input_b64: Optional[str] = None  # raw int8 input tensor for numeric runs


class RunModelResponse(BaseModel):
    report: dict


class CostTableRow(BaseModel):
    kind: str
    lut: int
    ff: int
    shift_cycles: int
    measured_speedup: float
    measured_energy_reduction: float


class ProfilesResponse(BaseModel):
    pe_costs: list[CostTableRow]
    base_mac_cycles: int
    defaults: dict = Field(default_factory=dict)
