"""Tensor container and dataset manifest handling.

Centralizes all on-disk formats so nothing else in the package touches raw
bytes. Two formats live here:

* the tensor container (see docs/container-format.md): an 8-digit ASCII
  header length, one line of UTF-8 JSON metadata (dtype tag, shape vector,
  layout tag, endianness tag), then the raw little-endian IEEE-754 float32
  payload in row-major order;
* the dataset manifest (see docs/manifest-schema.md): one YAML document per
  dataset listing cases, class count, modality names and the task metric.

The writer emits canonical headers, so write(load(path)) reproduces the
original container byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from .errors import ConfigError

HEADER_LEN_DIGITS = 8
CONTAINER_DTYPE = "float32"
CONTAINER_LAYOUT = "C"
CONTAINER_ENDIAN = "LE"

MANIFEST_SCHEMA_VERSION = 1
TASK_METRICS = ("accuracy", "roc-auc")


# ---------------------------------------------------------------------------
# tensor container
# ---------------------------------------------------------------------------

def write_tensor(path: str | Path, array: np.ndarray) -> Path:
    """Write ``array`` as a float32 container at ``path`` (canonical form)."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = {
        "dtype": CONTAINER_DTYPE,
        "shape": [int(s) for s in arr.shape],
        "layout": CONTAINER_LAYOUT,
        "endian": CONTAINER_ENDIAN,
    }
    header_line = json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"
    header_bytes = header_line.encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"{len(header_bytes):0{HEADER_LEN_DIGITS}d}".encode("ascii"))
        fh.write(header_bytes)
        fh.write(arr.astype("<f4", copy=False).tobytes(order="C"))
    return path


def load_tensor(path: str | Path, *, require_finite: bool = True,
                context: str = "") -> np.ndarray:
    """Load a container as a C-order float32 array.

    ``context`` is prepended to error messages so callers can name the case
    or method the tensor belongs to.
    """
    path = Path(path)
    where = f"{context}: " if context else ""
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{where}cannot read container {path}: {exc}") from exc

    if len(blob) < HEADER_LEN_DIGITS:
        raise ConfigError(f"{where}malformed header in {path}: file too short")
    try:
        header_len = int(blob[:HEADER_LEN_DIGITS].decode("ascii"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ConfigError(f"{where}malformed header in {path}: bad length prefix") from exc
    if header_len <= 0 or len(blob) < HEADER_LEN_DIGITS + header_len:
        raise ConfigError(f"{where}malformed header in {path}: truncated header")

    header_bytes = blob[HEADER_LEN_DIGITS:HEADER_LEN_DIGITS + header_len]
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{where}malformed header in {path}: {exc}") from exc

    for key in ("dtype", "shape", "layout", "endian"):
        if key not in header:
            raise ConfigError(f"{where}malformed header in {path}: missing '{key}'")
    if header["dtype"] != CONTAINER_DTYPE:
        raise ConfigError(f"{where}unsupported dtype {header['dtype']!r} in {path}")
    if header["layout"] != CONTAINER_LAYOUT or header["endian"] != CONTAINER_ENDIAN:
        raise ConfigError(f"{where}unsupported layout/endianness in {path}")
    shape = tuple(int(s) for s in header["shape"])
    if any(s < 0 for s in shape):
        raise ConfigError(f"{where}malformed header in {path}: negative dimension")

    payload = blob[HEADER_LEN_DIGITS + header_len:]
    expected = int(np.prod(shape, dtype=np.int64)) * 4
    if len(payload) != expected:
        raise ConfigError(
            f"{where}byte-count mismatch in {path}: "
            f"expected {expected} payload bytes, found {len(payload)}")

    arr = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    if require_finite and not np.isfinite(arr).all():
        raise ConfigError(f"{where}non-finite values in {path}")
    return arr


# ---------------------------------------------------------------------------
# in-memory dataset types
# ---------------------------------------------------------------------------

@dataclass
class MultiModalVolume:
    """A stacked multi-modal image: data[m] is the plane of modality m."""
    modalities: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        if len(self.modalities) < 1:
            raise ConfigError("volume needs at least one modality")
        if self.data.ndim < 2 or self.data.shape[0] != len(self.modalities):
            raise ConfigError(
                f"volume shape {self.data.shape} does not match "
                f"{len(self.modalities)} modalities")


@dataclass
class Heatmap:
    """Per-location attribution scores, same shape as the volume it explains."""
    data: np.ndarray
    method: str = ""


@dataclass
class AnnotationMaskSet:
    """Binary ground-truth masks, one plane per modality (values 0/1)."""
    data: np.ndarray


@dataclass
class HeatmapRef:
    uri: str
    gen_seconds: float | None = None


@dataclass
class CaseRecord:
    case_id: str
    volume_uri: str
    label: int
    mask_uri: str | None = None
    heatmaps: dict[str, HeatmapRef] = field(default_factory=dict)
    ratings: dict[str, float] = field(default_factory=dict)


@dataclass
class DatasetManifest:
    root: Path
    name: str
    n_classes: int
    modalities: tuple[str, ...]
    task_metric: str
    cases: list[CaseRecord]
    rating_scale: list[float] | None = None
    schema_version: int = MANIFEST_SCHEMA_VERSION

    # -- loaders -----------------------------------------------------------

    def _resolve(self, uri: str) -> Path:
        p = Path(uri)
        return p if p.is_absolute() else self.root / p

    def load_volume(self, case: CaseRecord) -> MultiModalVolume:
        data = load_tensor(self._resolve(case.volume_uri),
                           context=f"case {case.case_id} volume")
        if data.ndim < 2 or data.shape[0] != len(self.modalities):
            raise ConfigError(
                f"case {case.case_id}: volume shape {data.shape} does not match "
                f"manifest modalities {list(self.modalities)}")
        return MultiModalVolume(self.modalities, data)

    def load_mask(self, case: CaseRecord) -> AnnotationMaskSet:
        if case.mask_uri is None:
            raise ConfigError(f"case {case.case_id} has no mask")
        raw = load_tensor(self._resolve(case.mask_uri),
                          context=f"case {case.case_id} mask")
        # Binarize on load: >0 is foreground, everything else background.
        return AnnotationMaskSet((raw > 0).astype(np.float32))

    def load_heatmap(self, case: CaseRecord, method: str) -> Heatmap:
        ref = case.heatmaps.get(method)
        if ref is None:
            raise ConfigError(f"case {case.case_id} has no heatmap for method {method!r}")
        try:
            data = load_tensor(self._resolve(ref.uri),
                               context=f"case {case.case_id} heatmap {method!r}")
        except ConfigError as exc:
            # Re-raise with the case/method naming contract front and centre.
            raise ConfigError(str(exc)) from exc
        return Heatmap(data, method)

    def methods(self) -> tuple[str, ...]:
        """Methods present on every case (order of first appearance)."""
        if not self.cases:
            return ()
        first = list(self.cases[0].heatmaps)
        common = [m for m in first if all(m in c.heatmaps for c in self.cases)]
        return tuple(common)

    def cases_with_masks(self) -> list[CaseRecord]:
        return [c for c in self.cases if c.mask_uri is not None]


# ---------------------------------------------------------------------------
# manifest parsing
# ---------------------------------------------------------------------------

def _parse_heatmap_ref(value: object, case_id: str, method: str) -> HeatmapRef:
    if isinstance(value, str):
        return HeatmapRef(uri=value)
    if isinstance(value, Mapping):
        if "uri" not in value:
            raise ConfigError(f"case {case_id} heatmap {method!r}: missing 'uri'")
        gen = value.get("gen_seconds")
        if gen is not None:
            gen = float(gen)
            if not math.isfinite(gen) or gen < 0:
                raise ConfigError(
                    f"case {case_id} heatmap {method!r}: bad gen_seconds {gen}")
        return HeatmapRef(uri=str(value["uri"]), gen_seconds=gen)
    raise ConfigError(f"case {case_id} heatmap {method!r}: expected URI or mapping")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a dataset manifest document."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"manifest {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError(f"manifest {path}: top level must be a mapping")

    version = doc.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ConfigError(
            f"manifest {path}: unsupported schema_version {version!r} "
            f"(expected {MANIFEST_SCHEMA_VERSION})")

    for key in ("name", "n_classes", "modalities", "task_metric", "cases"):
        if key not in doc:
            raise ConfigError(f"manifest {path}: missing required field '{key}'")

    n_classes = int(doc["n_classes"])
    if n_classes < 2:
        raise ConfigError(f"manifest {path}: n_classes must be >= 2")
    modalities = tuple(str(m) for m in doc["modalities"])
    if len(modalities) < 1 or len(set(modalities)) != len(modalities):
        raise ConfigError(f"manifest {path}: modalities must be non-empty and unique")
    task_metric = str(doc["task_metric"])
    if task_metric not in TASK_METRICS:
        raise ConfigError(
            f"manifest {path}: task_metric must be one of {TASK_METRICS}, "
            f"got {task_metric!r}")

    rating_scale = doc.get("rating_scale")
    if rating_scale is not None:
        rating_scale = [float(v) for v in rating_scale]
        if len(rating_scale) < 2 or sorted(rating_scale) != rating_scale:
            raise ConfigError(f"manifest {path}: rating_scale must be ascending, >= 2 values")

    cases: list[CaseRecord] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(doc["cases"]):
        if not isinstance(raw, Mapping):
            raise ConfigError(f"manifest {path}: case #{i} must be a mapping")
        for key in ("id", "volume", "label"):
            if key not in raw:
                raise ConfigError(f"manifest {path}: case #{i} missing '{key}'")
        case_id = str(raw["id"])
        if case_id in seen_ids:
            raise ConfigError(f"manifest {path}: duplicate case id {case_id!r}")
        seen_ids.add(case_id)
        label = int(raw["label"])
        if not 0 <= label < n_classes:
            raise ConfigError(
                f"manifest {path}: case {case_id} label {label} out of range "
                f"[0, {n_classes})")
        heatmaps = {
            str(method): _parse_heatmap_ref(value, case_id, str(method))
            for method, value in (raw.get("heatmaps") or {}).items()
        }
        ratings = {str(r): float(v) for r, v in (raw.get("ratings") or {}).items()}
        cases.append(CaseRecord(
            case_id=case_id,
            volume_uri=str(raw["volume"]),
            label=label,
            mask_uri=str(raw["mask"]) if raw.get("mask") is not None else None,
            heatmaps=heatmaps,
            ratings=ratings,
        ))
    if not cases:
        raise ConfigError(f"manifest {path}: dataset has no cases")

    return DatasetManifest(
        root=path.parent,
        name=str(doc["name"]),
        n_classes=n_classes,
        modalities=modalities,
        task_metric=task_metric,
        cases=cases,
        rating_scale=rating_scale,
    )


def write_manifest(path: str | Path, manifest_doc: dict) -> Path:
    """Serialize a manifest document (plain dict) as YAML."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(manifest_doc, sort_keys=False), encoding="utf-8")
    return path
