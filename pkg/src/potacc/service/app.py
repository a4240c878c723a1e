"""FastAPI service wrapping the potacc library.

The handler functions (`do_*`) hold the request/response logic and are
plain callables, so the CLI can invoke them in-process; the routes only
add HTTP plumbing. Everything is stateless: each request carries its own
config and data.
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..codec import (
    QuantizedTensor,
    floats_from_bytes,
    preprocess_weights,
    quantization_stats,
    quantize_array,
    write_potq,
)
from ..config import SimConfig
from ..cost import BASE_MAC_CYCLES, PE_COST_TABLE, TimingProfile
from ..errors import InvalidInput, PotaccError
from ..gemm import BenchmarkCase, run_suite
from ..methods import PEKind, PoTMethod
from ..models import doc_to_layers, fixture_doc, resolve_layers
from ..pe import exhaustive_pe_check
from ..accel import run_model
from . import schemas

METHOD_TO_KIND = {
    "qkeras": PEKind.SHIFT_QKERAS,
    "msq": PEKind.SHIFT_MSQ,
    "apot": PEKind.SHIFT_APOT,
    "uniform": PEKind.MULT_UNIFORM,
}

ANALYTIC_NOTE = (
    "analytic cycle counts rank the PE cores by synthesized latency "
    "(qkeras < msq = uniform < apot); measured wall-clock inverts the apot/"
    "uniform order because shifter logic is cheaper than multiplier logic "
    "at the same clock. Use the measured profile for timing estimates."
)


def _sim_config(data: dict | None) -> SimConfig:
    return SimConfig.from_dict(data) if data else SimConfig()


def do_profiles() -> schemas.ProfilesResponse:
    return schemas.ProfilesResponse(
        pe_costs=[
            schemas.CostTableRow(
                kind=prof.kind.value,
                lut=prof.lut,
                ff=prof.ff,
                shift_cycles=prof.shift_cycles,
                measured_speedup=prof.measured_speedup,
                measured_energy_reduction=prof.measured_energy_reduction,
            )
            for prof in PE_COST_TABLE.values()
        ],
        base_mac_cycles=BASE_MAC_CYCLES,
        defaults=SimConfig().to_dict(),
    )


def do_quantize(req: schemas.QuantizeRequest) -> schemas.QuantizeResponse:
    if req.method == "uniform":
        raise InvalidInput("quantize needs a PoT method (qkeras, msq or apot)")
    method = PoTMethod.from_name(req.method)
    if (req.data_b64 is None) == (req.values is None):
        raise InvalidInput("provide exactly one of data_b64 or values")
    if req.from_int8_pot:
        if req.data_b64 is not None:
            raw = np.frombuffer(base64.b64decode(req.data_b64), dtype=np.int8)
        else:
            raw = np.asarray(req.values)
            if not np.all(raw == np.round(raw)):
                raise InvalidInput("int8 PoT mode expects integer values")
            raw = raw.astype(np.int64)
        n = int(np.prod(req.shape, dtype=np.int64))
        if raw.size != n:
            raise InvalidInput(f"payload holds {raw.size} values, shape needs {n}")
        if method is not PoTMethod.QKERAS_8_4:
            raise InvalidInput("int8 PoT re-encoding targets the qkeras method")
        scale_exp = req.scale_exp if req.scale_exp is not None else -8
        qt = preprocess_weights(raw.reshape(tuple(req.shape)), scale_exp)
        original = raw.astype(np.float64) * qt.scale
    else:
        if req.data_b64 is not None:
            arr = floats_from_bytes(base64.b64decode(req.data_b64), tuple(req.shape))
        else:
            arr = np.asarray(req.values, dtype=np.float64)
            n = int(np.prod(req.shape, dtype=np.int64))
            if arr.size != n:
                raise InvalidInput(f"{arr.size} values for shape {tuple(req.shape)} ({n} elements)")
            arr = arr.reshape(tuple(req.shape))
        qt = quantize_array(arr, method, req.scale_exp)
        original = arr
    stats = quantization_stats(original, qt)
    return schemas.QuantizeResponse(
        potq_b64=base64.b64encode(write_potq(qt)).decode("ascii"),
        stats=schemas.QuantizeStats(**stats),
    )


def do_pe_check(req: schemas.PECheckRequest) -> schemas.PECheckResponse:
    kinds = None
    if req.methods:
        kinds = [METHOD_TO_KIND[m] for m in req.methods]
    results = exhaustive_pe_check(kinds)
    out = [
        schemas.PECheckKindResult(
            kind=r.kind.value,
            cases=r.cases,
            passed=r.passed,
            failures=[
                schemas.PECheckFailure(act=a, weight=w, got=g, expected=str(e))
                for a, w, g, e in r.failures
            ],
        )
        for r in results
    ]
    return schemas.PECheckResponse(passed=all(r.passed for r in out), results=out)


def do_bench(req: schemas.BenchRequest) -> schemas.BenchResponse:
    cfg = _sim_config(req.config)
    profile = TimingProfile.from_name(req.profile)
    tiles = cfg.tiles(overhead=req.overhead)
    cases = [BenchmarkCase.parse(req.case)] if req.case else None
    methods = req.methods or ["qkeras", "msq", "apot", "uniform"]
    rows: list[schemas.BenchRow] = []
    summaries: list[schemas.BenchKindSummary] = []
    for m in methods:
        kind = METHOD_TO_KIND[m]
        result = run_suite(kind, profile, tiles, cfg.clock(), cases=cases)
        rows.extend(
            schemas.BenchRow(
                m=r.case.m,
                n=r.case.n,
                k=r.case.k,
                kind=kind.value,
                cycles=r.cycles,
                speedup=r.speedup,
                energy_joules=r.energy_joules,
                energy_reduction=r.energy_reduction,
            )
            for r in result.rows
        )
        prof = PE_COST_TABLE[kind]
        summaries.append(
            schemas.BenchKindSummary(
                kind=kind.value,
                average_speedup=result.average_speedup,
                average_energy_reduction=result.average_energy_reduction,
                reference_speedup=prof.measured_speedup,
                reference_energy_reduction=prof.measured_energy_reduction,
            )
        )
    return schemas.BenchResponse(
        profile=req.profile,
        n_cases=len(cases) if cases else 27,
        rows=rows,
        summaries=summaries,
        note=ANALYTIC_NOTE if profile is TimingProfile.ANALYTIC else None,
    )


def do_run_model(req: schemas.RunModelRequest) -> schemas.RunModelResponse:
    if (req.model_doc is None) == (req.fixture is None):
        raise InvalidInput("provide exactly one of model_doc or fixture")
    if req.fixture is not None:
        doc = fixture_doc(req.fixture)
        layers = resolve_layers(doc)
        name = doc.name
    else:
        layers = doc_to_layers(req.model_doc)
        name = req.model_doc.get("name", "")
    cfg = _sim_config(req.config)
    kind = METHOD_TO_KIND[req.method]
    profile = TimingProfile.from_name(req.profile)
    input_tensor = None
    if req.input_b64 is not None:
        first = layers[0]
        data = np.frombuffer(base64.b64decode(req.input_b64), dtype=np.int8)
        expected = first.h_in * first.w_in * first.c_in
        if data.size != expected:
            raise InvalidInput(f"input payload holds {data.size} values, model needs {expected}")
        input_tensor = data.reshape(first.h_in, first.w_in, first.c_in)
    report = run_model(
        layers,
        cfg.accelerator(kind),
        profile,
        placement=req.placement,
        input_tensor=input_tensor,
        model_name=name,
    )
    return schemas.RunModelResponse(report=report.to_dict())


def create_app() -> FastAPI:
    app = FastAPI(title="potacc", version=__version__)

    @app.exception_handler(PotaccError)
    async def potacc_error(request: Request, exc: PotaccError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(OSError)
    async def os_error(request: Request, exc: OSError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/profiles", response_model=schemas.ProfilesResponse)
    def profiles():
        return do_profiles()

    @app.post("/quantize", response_model=schemas.QuantizeResponse)
    def quantize(req: schemas.QuantizeRequest):
        return do_quantize(req)

    @app.post("/pe-check", response_model=schemas.PECheckResponse)
    def pe_check(req: schemas.PECheckRequest):
        return do_pe_check(req)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(req: schemas.BenchRequest):
        return do_bench(req)

    @app.post("/run-model", response_model=schemas.RunModelResponse)
    def run_model_route(req: schemas.RunModelRequest):
        return do_run_model(req)

    return app


app = create_app()
