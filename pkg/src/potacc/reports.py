"""Report serialization and the documented output schemas.

Two interchange formats exist:

* benchmark CSV (columns in ``gemm.BENCH_CSV_COLUMNS``), one row per
  (case, kind);
* simulation report JSON (``SIM_REPORT_SCHEMA``), one object per model
  run, plus a per-layer CSV flattening (``REPORT_CSV_COLUMNS``).

Floats serialize via ``repr`` so identical runs emit identical bytes.
"""

from __future__ import annotations

import csv
import io
import json

from .accel import SimReport

REPORT_CSV_COLUMNS = [
    "index", "name", "kind", "placement", "macs",
    "compute_cycles", "transfer_cycles", "weight_bytes",
    "weight_transfer_bytes", "time_ms", "energy_joules",
]

_LAYER_SCHEMA = {
    "type": "object",
    "required": [
        "index", "name", "kind", "placement", "macs", "compute_cycles",
        "transfer_cycles", "weight_bytes", "weight_transfer_bytes",
        "time_ms", "energy_joules", "numeric_executed",
    ],
    "properties": {
        "index": {"type": "integer", "minimum": 0},
        "name": {"type": "string"},
        "kind": {"enum": ["conv2d", "depthwise_conv2d", "dense", "other"]},
        "placement": {"enum": ["ACCEL", "CPU"]},
        "m": {"type": ["integer", "null"]},
        "k": {"type": ["integer", "null"]},
        "n": {"type": ["integer", "null"]},
        "macs": {"type": "integer", "minimum": 0},
        "compute_cycles": {"type": "number", "minimum": 0},
        "transfer_cycles": {"type": "integer", "minimum": 0},
        "weight_bytes": {"type": "integer", "minimum": 0},
        "weight_transfer_bytes": {"type": "integer", "minimum": 0},
        "time_ms": {"type": "number", "minimum": 0},
        "energy_joules": {"type": "number", "minimum": 0},
        "numeric_executed": {"type": "boolean"},
    },
}

SIM_REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["model", "pe_kind", "profile", "placement", "layers", "totals"],
    "properties": {
        "model": {"type": "string"},
        "pe_kind": {"enum": ["shift_qkeras", "shift_msq", "shift_apot", "mult_uniform"]},
        "profile": {"enum": ["analytic", "measured"]},
        "placement": {"enum": ["accel", "cpu"]},
        "layers": {"type": "array", "items": _LAYER_SCHEMA},
        "totals": {
            "type": "object",
            "required": [
                "time_ms", "energy_joules", "accel_time_ms", "cpu_time_ms",
                "compute_cycles", "transfer_cycles",
            ],
            "properties": {
                "time_ms": {"type": "number", "minimum": 0},
                "energy_joules": {"type": "number", "minimum": 0},
                "accel_time_ms": {"type": "number", "minimum": 0},
                "cpu_time_ms": {"type": "number", "minimum": 0},
                "compute_cycles": {"type": "number", "minimum": 0},
                "transfer_cycles": {"type": "number", "minimum": 0},
            },
        },
    },
}


def report_to_json(report: SimReport) -> str:
    # json emits floats via repr, the shortest exact round-trip form, so
    # identical runs serialize byte-identically
    return json.dumps(report.to_dict(), indent=1) + "\n"


def report_to_csv(report_dict: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_COLUMNS)
    for layer in report_dict["layers"]:
        writer.writerow([repr(layer[c]) if isinstance(layer[c], float) else layer[c] for c in REPORT_CSV_COLUMNS])
    return buf.getvalue()
