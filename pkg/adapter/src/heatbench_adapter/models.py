"""Models the reference adapter can serve.

A real deployment wraps its trained network here; the built-in models are
deterministic closed-form scorers that need no ML framework, which makes
them usable as wire-level fixtures. Both are binary classifiers whose
class-1 probability comes out of a logistic, so probabilities are finite,
non-negative and sum to 1 by construction.

A model is anything with ``n_classes``, ``input_shape``, ``modalities`` and
``probs(volume) -> list[float]``. An empty ``input_shape`` means the model
accepts any shape and the handshake declares no constraint.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .container import read_tensor
from .errors import AdapterError, ArtifactError

MODEL_KINDS = ("linear", "mean-threshold")


def _sigmoid(x: float) -> float:
    # Stable in both tails.
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


class LinearModel:
    """logit = sum(weights * x) + bias; probabilities = softmax([0, logit])."""

    def __init__(self, weights: np.ndarray, bias: float = 0.0,
                 modalities: tuple[str, ...] | None = None) -> None:
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.ndim < 2:
            raise ArtifactError("linear weights must be volume-shaped ([modalities, ...])")
        if modalities and len(modalities) != self.weights.shape[0]:
            raise ArtifactError(
                f"{len(modalities)} modality names for {self.weights.shape[0]} weight planes")
        self.bias = float(bias)
        self.n_classes = 2
        self.input_shape = tuple(self.weights.shape)
        self.modalities = modalities or tuple(
            f"mod{i}" for i in range(self.weights.shape[0]))

    def probs(self, volume: np.ndarray) -> list[float]:
        if tuple(volume.shape) != self.input_shape:
            raise AdapterError(
                f"tensor shape {tuple(volume.shape)} does not match "
                f"model input {self.input_shape}")
        logit = float(np.sum(self.weights * volume)) + self.bias
        p1 = _sigmoid(logit)
        return [1.0 - p1, p1]


class MeanThresholdModel:
    """Thresholds the mean intensity of one modality (or the whole volume).

    p(class 1) = logistic(steepness * (mean - threshold)); with the default
    zero threshold a zero volume lands exactly on [0.5, 0.5].
    """

    def __init__(self, modality: int | None = None, threshold: float = 0.0,
                 steepness: float = 1.0, input_shape: tuple[int, ...] = (),
                 modalities: tuple[str, ...] = ()) -> None:
        self.modality = modality
        self.threshold = float(threshold)
        self.steepness = float(steepness)
        self.n_classes = 2
        self.input_shape = tuple(int(s) for s in input_shape)
        self.modalities = tuple(str(m) for m in modalities)
        if self.input_shape and self.modalities \
                and self.input_shape[0] != len(self.modalities):
            raise ArtifactError(
                f"input shape {list(self.input_shape)} inconsistent with "
                f"{len(self.modalities)} modalities")
        if modality is not None and self.input_shape \
                and not 0 <= modality < self.input_shape[0]:
            raise ArtifactError(
                f"modality index {modality} out of range for shape {list(self.input_shape)}")

    def probs(self, volume: np.ndarray) -> list[float]:
        if self.input_shape and tuple(volume.shape) != self.input_shape:
            raise AdapterError(
                f"tensor shape {tuple(volume.shape)} does not match "
                f"model input {self.input_shape}")
        if self.modality is None:
            x = volume
        else:
            if volume.ndim < 2 or not 0 <= self.modality < volume.shape[0]:
                raise AdapterError(
                    f"tensor shape {tuple(volume.shape)} has no modality index {self.modality}")
            x = volume[self.modality]
        if x.size == 0:
            raise AdapterError("cannot score an empty tensor")
        p1 = _sigmoid(self.steepness * (float(np.mean(x)) - self.threshold))
        return [1.0 - p1, p1]


def load_model(spec: str):
    """Build a model from an artifact path, or the built-in stub for "stub".

    The artifact is a JSON object naming the model kind plus its parameters;
    weight tensors live in containers referenced relative to the artifact
    file. See the package README for both schemas.
    """
    if spec == "stub":
        # whole-volume mean through a unit logistic; accepts any shape
        return MeanThresholdModel()

    path = Path(spec)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ArtifactError(f"cannot read model artifact {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"model artifact {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ArtifactError(f"model artifact {path} must be a JSON object")
    kind = doc.get("kind")

    if kind == "linear":
        if "weights_uri" not in doc:
            raise ArtifactError(f"linear artifact {path} is missing 'weights_uri'")
        wpath = Path(str(doc["weights_uri"]))
        if not wpath.is_absolute():
            wpath = path.parent / wpath
        try:
            weights = read_tensor(wpath)
        except AdapterError as exc:
            raise ArtifactError(str(exc)) from exc
        modalities = tuple(str(m) for m in doc.get("modalities", ())) or None
        return LinearModel(weights, float(doc.get("bias", 0.0)), modalities)

    if kind == "mean-threshold":
        modalities = tuple(str(m) for m in doc.get("modalities", ()))
        modality = doc.get("modality")
        if isinstance(modality, str):
            if modality not in modalities:
                raise ArtifactError(
                    f"modality {modality!r} not in {list(modalities)}")
            modality = modalities.index(modality)
        elif modality is not None:
            modality = int(modality)
        return MeanThresholdModel(
            modality, float(doc.get("threshold", 0.0)),
            float(doc.get("steepness", 1.0)),
            tuple(doc.get("input_shape", ())), modalities)

    raise ArtifactError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
