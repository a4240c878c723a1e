import base64
import json

import numpy as np
import pytest

from potacc.accel import LayerKind, im2col_lower
from potacc.codec import QuantizedTensor, write_potq
from potacc.errors import MalformedModel
from potacc.methods import PoTMethod
from potacc.models import (
    FIXTURE_NAMES,
    doc_to_layers,
    fixture_doc,
    fixture_layers,
    inline_weight_payloads,
    load_model_doc,
    resolve_layers,
)


def minimal_doc(**overrides):
    doc = {
        "name": "tiny",
        "input": {"h": 8, "w": 8, "c": 2},
        "layers": [
            {"name": "c1", "kind": "conv2d", "c_out": 4, "kernel": [3, 3], "stride": 1},
            {"name": "pool", "kind": "other", "op_count": 64, "output": {"h": 4, "w": 4, "c": 4}},
            {"name": "fc", "kind": "dense", "c_out": 10},
        ],
    }
    doc.update(overrides)
    return doc


def test_resolution_tracks_dims():
    layers = doc_to_layers(minimal_doc())
    assert (layers[0].h_in, layers[0].w_in, layers[0].c_in) == (8, 8, 2)
    assert layers[0].output_dims() == (8, 8, 4)
    assert (layers[2].h_in, layers[2].w_in, layers[2].c_in) == (4, 4, 4)
    assert im2col_lower(layers[2]).k == 64


def test_input_override_branches():
    doc = minimal_doc()
    doc["layers"].insert(1, {
        "name": "branch", "kind": "conv2d", "c_out": 4, "kernel": [1, 1],
        "input": {"h": 8, "w": 8, "c": 2},
    })
    layers = doc_to_layers(doc)
    assert (layers[1].h_in, layers[1].w_in, layers[1].c_in) == (8, 8, 2)


def test_depthwise_inherits_channels():
    doc = minimal_doc()
    doc["layers"] = [{"name": "dw", "kind": "depthwise_conv2d", "kernel": [3, 3], "stride": 2}]
    (layer,) = doc_to_layers(doc)
    assert layer.c_out == 2
    assert layer.output_dims() == (4, 4, 2)


def test_malformed_documents():
    with pytest.raises(MalformedModel):
        doc_to_layers({"layers": []})
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(layers=[]))
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(layers=[{"kind": "conv3d", "c_out": 1}]))
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(layers=[{"kind": "conv2d"}]))  # no c_out
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(layers=[{"kind": "other"}]))  # no op_count
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(input={"h": 0, "w": 8, "c": 2}))
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(layers=[{"kind": "conv2d", "c_out": 2, "kernel": [3]}]))
    with pytest.raises(MalformedModel):
        doc_to_layers(minimal_doc(layers=[{"kind": "conv2d", "c_out": 2, "requant_shift": 99}]))


def test_inline_weights_b64():
    codes = np.arange(8, dtype=np.uint8) % 16
    qt = QuantizedTensor((1, 1, 2, 4), codes, 0, PoTMethod.QKERAS_8_4)
    doc = minimal_doc()
    doc["layers"][0] = {
        "name": "c1", "kind": "conv2d", "c_out": 4, "kernel": [1, 1],
        "weights": {"potq_b64": base64.b64encode(write_potq(qt)).decode()},
    }
    layers = doc_to_layers(doc)
    assert isinstance(layers[0].weights, QuantizedTensor)
    assert np.array_equal(layers[0].weights.codes, codes)


def test_weight_paths_resolved_relative_to_doc(tmp_path):
    codes = np.zeros(8, dtype=np.uint8)
    qt = QuantizedTensor((1, 1, 2, 4), codes, 0, PoTMethod.MSQ_8_4)
    (tmp_path / "w").mkdir()
    (tmp_path / "w" / "c1.potq").write_bytes(write_potq(qt))
    doc = minimal_doc()
    doc["layers"][0]["kernel"] = [1, 1]
    doc["layers"][0]["weights"] = {"potq_path": "w/c1.potq"}
    path = tmp_path / "model.json"
    path.write_text(json.dumps(doc))
    model = load_model_doc(path)
    layers = resolve_layers(model)
    assert layers[0].weights.method is PoTMethod.MSQ_8_4


def test_int8_weights(tmp_path):
    w = np.arange(-4, 4, dtype=np.int8).reshape(1, 1, 2, 4)
    f = tmp_path / "w.bin"
    w.tofile(f)
    doc = minimal_doc()
    doc["layers"][0]["kernel"] = [1, 1]
    doc["layers"][0]["weights"] = {"int8_path": str(f), "shape": [1, 1, 2, 4]}
    layers = doc_to_layers(doc, base_dir=tmp_path)
    assert np.array_equal(layers[0].weights, w)


def test_weights_spec_validation():
    doc = minimal_doc()
    doc["layers"][0]["weights"] = {"potq_b64": "x", "int8_b64": "y"}
    with pytest.raises(MalformedModel):
        doc_to_layers(doc)


def test_inline_weight_payloads(tmp_path):
    codes = np.zeros(8, dtype=np.uint8)
    qt = QuantizedTensor((1, 1, 2, 4), codes, 0, PoTMethod.APOT_8_4)
    (tmp_path / "c1.potq").write_bytes(write_potq(qt))
    doc = minimal_doc()
    doc["layers"][0]["weights"] = {"potq_path": "c1.potq"}
    inlined = inline_weight_payloads(doc, tmp_path)
    assert "potq_b64" in inlined["layers"][0]["weights"]
    assert "potq_path" not in inlined["layers"][0]["weights"]
    # original untouched
    assert "potq_path" in doc["layers"][0]["weights"]
    layers = doc_to_layers(inlined)
    assert layers[0].weights.method is PoTMethod.APOT_8_4


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixtures_resolve(name):
    layers = fixture_layers(name)
    assert len(layers) > 10
    assert layers[-1].kind is LayerKind.DENSE
    assert layers[-1].c_out == 1000
    doc = fixture_doc(name)
    assert doc.name == name
    assert (doc.input_h, doc.input_w, doc.input_c) == (224, 224, 3)


def test_fixture_mac_counts_are_architecture_scale():
    """Conv+fc MAC totals should land near the published architecture sizes."""
    totals = {}
    for name in FIXTURE_NAMES:
        totals[name] = sum(
            im2col_lower(l).macs for l in fixture_layers(name) if l.kind is not LayerKind.OTHER
        )
    assert 0.25e9 < totals["mobilenetv2"] < 0.35e9
    assert 1.6e9 < totals["resnet18"] < 2.0e9
    assert 1.4e9 < totals["inceptionv1"] < 1.7e9


def test_unknown_fixture():
    with pytest.raises(MalformedModel):
        fixture_doc("vgg16")
