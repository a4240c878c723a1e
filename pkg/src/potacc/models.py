"""Model description files and the bundled architecture fixtures.

A model document is JSON:

    {
      "name": "resnet18",
      "input": {"h": 224, "w": 224, "c": 3},
      "layers": [
        {"name": "conv1", "kind": "conv2d", "c_out": 64, "kernel": [7, 7],
         "stride": 2, "padding": "same", "requant_shift": 8,
         "weights": {"potq_path": "conv1.potq"}},
        {"name": "pool1", "kind": "other", "op_count": 1806336,
         "output": {"h": 56, "w": 56, "c": 64}},
        ...
      ]
    }

Layer input dims flow from the previous layer's output; a record may set
"input": {h, w, c} to branch off an earlier point of the graph (the
simulator is sequential, the override only fixes the dims). Weights are
optional; layers without weights are simulated for time/energy only.
Weight payloads are either POTQ (4-bit codes) or raw int8, referenced by
path (relative to the document) or inlined base64.

The bundled fixtures (mobilenetv2 / resnet18 / inceptionv1 conv stacks)
carry dims and op counts only, no weight tensors.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .accel import LayerConfig, LayerKind
from .codec import QuantizedTensor, load_potq, read_potq
from .errors import MalformedModel

FIXTURE_NAMES = ("mobilenetv2", "resnet18", "inceptionv1")

MAX_REQUANT_SHIFT = 40


@dataclass
class ModelDoc:
    name: str
    input_h: int
    input_w: int
    input_c: int
    layers: list[dict] = field(default_factory=list)
    base_dir: Path | None = None  # for resolving relative weight paths


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise MalformedModel(f"{where}: missing required field {key!r}")
    return record[key]


def _dims(record: dict, where: str) -> tuple[int, int, int]:
    for key in ("h", "w", "c"):
        if key not in record or not isinstance(record[key], int) or record[key] < 1:
            raise MalformedModel(f"{where}: bad dimension field {key!r}")
    return record["h"], record["w"], record["c"]


def parse_model_doc(doc: dict, base_dir: Path | None = None) -> ModelDoc:
    if not isinstance(doc, dict):
        raise MalformedModel("model document must be a JSON object")
    name = doc.get("name", "")
    h, w, c = _dims(_require(doc, "input", "model"), "model input")
    layers = _require(doc, "layers", "model")
    if not isinstance(layers, list) or not layers:
        raise MalformedModel("model needs a non-empty layer list")
    return ModelDoc(name=name, input_h=h, input_w=w, input_c=c, layers=layers, base_dir=base_dir)


def load_model_doc(path) -> ModelDoc:
    path = Path(path)
    with open(path) as f:
        doc = json.load(f)
    return parse_model_doc(doc, base_dir=path.parent)


def _load_weights(spec: dict, base_dir: Path | None, where: str):
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise MalformedModel(f"{where}: weights must be an object")
    keys = [k for k in ("potq_path", "potq_b64", "int8_path", "int8_b64") if k in spec]
    if len(keys) != 1:
        raise MalformedModel(f"{where}: weights need exactly one of potq_path/potq_b64/int8_path/int8_b64")
    key = keys[0]
    if key == "potq_b64":
        return read_potq(base64.b64decode(spec[key]))
    if key == "int8_b64":
        data = base64.b64decode(spec[key])
        shape = tuple(_require(spec, "shape", where))
        arr = np.frombuffer(data, dtype=np.int8)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise MalformedModel(f"{where}: int8 payload does not match shape {shape}")
        return arr.reshape(shape).copy()
    path = Path(spec[key])
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if key == "potq_path":
        return load_potq(path)
    shape = tuple(_require(spec, "shape", where))
    arr = np.fromfile(path, dtype=np.int8)
    if arr.size != int(np.prod(shape, dtype=np.int64)):
        raise MalformedModel(f"{where}: int8 file does not match shape {shape}")
    return arr.reshape(shape)


def resolve_layers(model: ModelDoc) -> list[LayerConfig]:
    """Turn raw layer records into LayerConfigs with resolved input dims."""
    resolved = []
    h, w, c = model.input_h, model.input_w, model.input_c
    for i, record in enumerate(model.layers):
        where = f"layer {i} ({record.get('name', '?')})" if isinstance(record, dict) else f"layer {i}"
        if not isinstance(record, dict):
            raise MalformedModel(f"{where}: record must be an object")
        try:
            kind = LayerKind(_require(record, "kind", where))
        except ValueError:
            raise MalformedModel(f"{where}: unknown kind {record['kind']!r}")
        if "input" in record:
            h, w, c = _dims(record["input"], f"{where} input override")
        kernel = record.get("kernel", [1, 1])
        if not (isinstance(kernel, list) and len(kernel) == 2):
            raise MalformedModel(f"{where}: kernel must be [kh, kw]")
        shift = record.get("requant_shift", 0)
        if not isinstance(shift, int) or abs(shift) > MAX_REQUANT_SHIFT:
            raise MalformedModel(f"{where}: requant_shift out of range")
        out = record.get("output")
        out_h = out_w = out_c = None
        if out is not None:
            out_h, out_w, out_c = _dims(out, f"{where} output")
        if kind is LayerKind.DEPTHWISE_CONV2D:
            c_out = record.get("c_out", c)
        else:
            c_out = record.get("c_out", c if kind is LayerKind.OTHER else None)
        if c_out is None:
            raise MalformedModel(f"{where}: missing c_out")
        try:
            layer = LayerConfig(
                kind=kind,
                name=record.get("name", f"layer{i}"),
                h_in=h,
                w_in=w,
                c_in=c,
                c_out=c_out,
                kh=kernel[0],
                kw=kernel[1],
                stride=record.get("stride", 1),
                padding=record.get("padding", "same"),
                op_count=record.get("op_count"),
                requant_shift=shift,
                out_h=out_h,
                out_w=out_w,
                out_c=out_c,
                weights=_load_weights(record.get("weights"), model.base_dir, where),
            )
        except MalformedModel:
            raise
        except (TypeError, ValueError) as exc:
            raise MalformedModel(f"{where}: {exc}")
        resolved.append(layer)
        h, w, c = layer.output_dims()
    return resolved


def inline_weight_payloads(doc: dict, base_dir=None) -> dict:
    """Replace weight file references with inline base64 payloads.

    Lets a client ship a path-based model document to a server that has no
    access to the client's filesystem.
    """
    import copy

    out = copy.deepcopy(doc)
    base = Path(base_dir) if base_dir else None
    for rec in out.get("layers", []):
        w = rec.get("weights") if isinstance(rec, dict) else None
        if not isinstance(w, dict):
            continue
        for path_key, b64_key in (("potq_path", "potq_b64"), ("int8_path", "int8_b64")):
            if path_key in w:
                p = Path(w.pop(path_key))
                if not p.is_absolute() and base is not None:
                    p = base / p
                w[b64_key] = base64.b64encode(p.read_bytes()).decode("ascii")
    return out


def fixture_doc(name: str) -> ModelDoc:
    if name not in FIXTURE_NAMES:
        raise MalformedModel(f"unknown fixture {name!r}; available: {FIXTURE_NAMES}")
    payload = resources.files("potacc").joinpath(f"data/{name}.json").read_text()
    return parse_model_doc(json.loads(payload))


def fixture_layers(name: str) -> list[LayerConfig]:
    return resolve_layers(fixture_doc(name))


def doc_to_layers(doc: dict, base_dir=None) -> list[LayerConfig]:
    return resolve_layers(parse_model_doc(doc, base_dir=Path(base_dir) if base_dir else None))
