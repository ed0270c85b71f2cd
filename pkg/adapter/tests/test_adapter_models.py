"""Stub model behavior and artifact loading."""

import json
import math

import numpy as np
import pytest

from adapter_helpers import make_linear_artifact
from heatbench_adapter.container import write_tensor
from heatbench_adapter.errors import AdapterError, ArtifactError
from heatbench_adapter.models import (LinearModel, MeanThresholdModel,
                                      load_model)


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


# ---------------------------------------------------------------------------
# linear
# ---------------------------------------------------------------------------

def test_linear_matches_closed_form():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(2, 3, 3))
    x = rng.normal(size=(2, 3, 3))
    model = LinearModel(w, bias=0.4)
    p0, p1 = model.probs(x)
    expected = _sigmoid(float(np.sum(w * x)) + 0.4)
    assert p1 == pytest.approx(expected, abs=1e-15)
    assert p0 + p1 == pytest.approx(1.0, abs=1e-15)


def test_linear_zero_input_zero_bias_is_uniform():
    model = LinearModel(np.ones((2, 4, 4)))
    assert model.probs(np.zeros((2, 4, 4))) == [0.5, 0.5]


def test_linear_is_stable_at_huge_logits():
    model = LinearModel(np.full((1, 2, 2), 1e6))
    for sign in (1.0, -1.0):
        probs = model.probs(np.full((1, 2, 2), sign))
        assert all(np.isfinite(probs))
        assert min(probs) >= 0.0
        assert sum(probs) == pytest.approx(1.0)


def test_linear_rejects_wrong_shape():
    model = LinearModel(np.ones((2, 3, 3)))
    with pytest.raises(AdapterError, match="does not match model input"):
        model.probs(np.zeros((2, 4, 4)))


def test_linear_rejects_flat_weights():
    with pytest.raises(ArtifactError, match="volume-shaped"):
        LinearModel(np.ones(5))


def test_linear_rejects_modality_count_mismatch():
    with pytest.raises(ArtifactError, match="modality names"):
        LinearModel(np.ones((2, 3, 3)), modalities=("a", "b", "c"))


def test_linear_default_modality_names():
    model = LinearModel(np.ones((3, 2, 2)))
    assert model.modalities == ("mod0", "mod1", "mod2")
    assert model.input_shape == (3, 2, 2)
    assert model.n_classes == 2


# ---------------------------------------------------------------------------
# mean-threshold
# ---------------------------------------------------------------------------

def test_mean_threshold_defaults_give_uniform_on_zero():
    model = MeanThresholdModel()
    assert model.probs(np.zeros((4, 8, 8))) == [0.5, 0.5]
    assert model.probs(np.zeros((2, 2))) == [0.5, 0.5]    # any shape accepted


def test_mean_threshold_matches_closed_form():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 5, 5))
    model = MeanThresholdModel(modality=1, threshold=0.2, steepness=7.0)
    _, p1 = model.probs(x)
    assert p1 == pytest.approx(_sigmoid(7.0 * (float(np.mean(x[1])) - 0.2)), abs=1e-15)


def test_mean_threshold_whole_volume_when_no_modality():
    x = np.arange(8, dtype=np.float64).reshape(2, 2, 2)
    model = MeanThresholdModel(threshold=3.5)
    assert model.probs(x) == [0.5, 0.5]    # mean is exactly the threshold


def test_mean_threshold_enforces_declared_shape():
    model = MeanThresholdModel(input_shape=(2, 4, 4))
    with pytest.raises(AdapterError, match="does not match model input"):
        model.probs(np.zeros((2, 5, 5)))


def test_mean_threshold_rejects_missing_modality_axis():
    model = MeanThresholdModel(modality=3)
    with pytest.raises(AdapterError, match="no modality index 3"):
        model.probs(np.zeros((2, 4, 4)))


def test_mean_threshold_rejects_empty_tensor():
    model = MeanThresholdModel()
    with pytest.raises(AdapterError, match="empty tensor"):
        model.probs(np.zeros((0,)))


def test_mean_threshold_validates_artifact_consistency():
    with pytest.raises(ArtifactError, match="inconsistent with 3 modalities"):
        MeanThresholdModel(input_shape=(2, 4, 4), modalities=("a", "b", "c"))
    with pytest.raises(ArtifactError, match="out of range"):
        MeanThresholdModel(modality=5, input_shape=(2, 4, 4))


# ---------------------------------------------------------------------------
# artifact loading
# ---------------------------------------------------------------------------

def test_load_model_stub_accepts_any_shape():
    model = load_model("stub")
    assert model.input_shape == ()
    assert model.modalities == ()
    assert model.probs(np.zeros((7, 3, 2))) == [0.5, 0.5]


def test_load_linear_artifact(tmp_path):
    rng = np.random.default_rng(2)
    w = rng.normal(size=(2, 4, 4)).astype(np.float32)
    artifact = make_linear_artifact(tmp_path, w, bias=0.1,
                                    modalities=["T1", "T1C"])
    model = load_model(str(artifact))
    assert model.modalities == ("T1", "T1C")
    assert model.input_shape == (2, 4, 4)
    x = rng.normal(size=(2, 4, 4)).astype(np.float32)
    expected = _sigmoid(float(np.sum(w.astype(np.float64) * x)) + 0.1)
    assert model.probs(x)[1] == pytest.approx(expected, abs=1e-12)


def test_load_linear_resolves_weights_relative_to_artifact(tmp_path):
    sub = tmp_path / "deep" / "inside"
    sub.mkdir(parents=True)
    artifact = make_linear_artifact(sub, np.ones((2, 2, 2)))
    model = load_model(str(artifact))    # cwd is elsewhere; must still resolve
    assert model.input_shape == (2, 2, 2)


def test_load_mean_threshold_artifact_by_modality_name(tmp_path):
    doc = {"kind": "mean-threshold", "modality": "FLAIR", "threshold": 0.5,
           "steepness": 12.0, "input_shape": [4, 8, 8],
           "modalities": ["T1", "T1C", "T2", "FLAIR"]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    model = load_model(str(path))
    assert model.modality == 3
    assert model.input_shape == (4, 8, 8)


@pytest.mark.parametrize("doc, match", [
    ({"kind": "resnet"}, "unknown model kind"),
    ({}, "unknown model kind"),
    ({"kind": "linear"}, "missing 'weights_uri'"),
    ({"kind": "linear", "weights_uri": "nope.tns"}, "cannot read tensor"),
    ({"kind": "mean-threshold", "modality": "X",
      "modalities": ["a", "b"]}, "not in"),
])
def test_load_model_rejects_bad_artifacts(tmp_path, doc, match):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ArtifactError, match=match):
        load_model(str(path))


def test_load_model_rejects_unreadable_artifact(tmp_path):
    with pytest.raises(ArtifactError, match="cannot read model artifact"):
        load_model(str(tmp_path / "absent.json"))
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    with pytest.raises(ArtifactError, match="not valid JSON"):
        load_model(str(garbled))
    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    with pytest.raises(ArtifactError, match="must be a JSON object"):
        load_model(str(listy))


def test_loaded_weights_take_container_precision(tmp_path):
    # the artifact pipeline sees float32 weights even if written from float64
    w = np.full((2, 2, 2), 1.0 / 3.0, dtype=np.float64)
    artifact = make_linear_artifact(tmp_path, w)
    model = load_model(str(artifact))
    assert model.weights[0, 0, 0] == float(np.float32(1.0 / 3.0))
