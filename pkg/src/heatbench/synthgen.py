"""Synthetic multi-modal tumor dataset with controlled ground truth.

Every case is a stack of 2-D modality planes, each showing one procedural
tumor blob over an elliptical textured brain-like background. Class 0 uses
round blobs (low boundary perturbation), class 1 irregular ones (high-
amplitude radial noise). Per modality, the rendered shape matches the case
label with a configured alignment probability: by default T1C always
matches, FLAIR matches 70% of the time (anti-aligned cases render the
*other* class's shape), and T1/T2 draw their shape independently of the
label, so they carry no class signal yet still attract heatmap mass.

Probe sets isolate modality reliance: the TIC set aligns T1C 100% and
FLAIR 0%, the FLAIR set the reverse, both without background texture.
Accuracies of a model on the two probe sets become the ground-truth
modality importance vector (ground_truth_mi).

Generation is deterministic: case i of stream s draws every parameter from
SeedSequence([seed, s, i]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .shapes import RadialBlob, radial_scan
from .tensorio import MANIFEST_SCHEMA_VERSION, write_manifest, write_tensor

MIN_IMAGE_SIDE = 32

DEFAULT_MODALITIES = ("T1", "T1C", "T2", "FLAIR")
DEFAULT_ALIGNMENT = {"T1C": 1.0, "FLAIR": 0.7}

# Background texture stays below, tumor intensity above, the gated oracle's
# segmentation threshold (0.6).
_BG_BASE = 0.15
_BG_AMP = 0.28
_TUMOR_LO = 0.78
_TUMOR_HI = 0.98

# Stream tags keep the main dataset and the two probe sets statistically
# independent under one seed.
STREAM_MAIN = 0
STREAM_TIC = 1
STREAM_FLAIR = 2

# Demo heatmap sets emitted alongside generated datasets so an end-to-end
# evaluate run works out of the box.
HEATMAP_METHODS = ("tumor-mask", "random-noise")


@dataclass(frozen=True)
class SynthConfig:
    n: int
    image_size: tuple[int, int] = (256, 256)
    modalities: tuple[str, ...] = DEFAULT_MODALITIES
    alignment: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ALIGNMENT))
    background: bool = True
    seed: int = 0
    mask_fraction: float = 1.0

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError("need at least one case")
        h, w = self.image_size
        if min(h, w) < MIN_IMAGE_SIDE:
            raise ConfigError(
                f"image too small to place a tumor: {h}x{w} "
                f"(minimum side {MIN_IMAGE_SIDE})")
        for name, p in self.alignment.items():
            if name not in self.modalities:
                raise ConfigError(f"alignment for unknown modality {name!r}")
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"alignment probability for {name} must be in [0,1]")
        if not 0.0 <= self.mask_fraction <= 1.0:
            raise ConfigError("mask_fraction must be in [0,1]")


@dataclass
class SynthCase:
    case_id: str
    label: int
    volume: np.ndarray          # [M, H, W] float32
    masks: np.ndarray           # [M, H, W] float32, exactly the tumor pixels
    aligned: dict[str, bool | None]   # None for label-independent modalities
    shape_classes: dict[str, int]


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _bilinear_noise(rng: np.random.Generator, height: int, width: int,
                    cells: int = 8) -> np.ndarray:
    """Smooth [0,1] field: a coarse uniform grid, bilinearly upsampled."""
    coarse = rng.uniform(0.0, 1.0, (cells + 1, cells + 1))
    yi = np.linspace(0.0, cells, height)
    xi = np.linspace(0.0, cells, width)
    y0 = np.clip(np.floor(yi).astype(int), 0, cells - 1)
    x0 = np.clip(np.floor(xi).astype(int), 0, cells - 1)
    ty = (yi - y0)[:, None]
    tx = (xi - x0)[None, :]
    c00 = coarse[np.ix_(y0, x0)]
    c01 = coarse[np.ix_(y0, x0 + 1)]
    c10 = coarse[np.ix_(y0 + 1, x0)]
    c11 = coarse[np.ix_(y0 + 1, x0 + 1)]
    return (c00 * (1 - ty) * (1 - tx) + c01 * (1 - ty) * tx
            + c10 * ty * (1 - tx) + c11 * ty * tx)


def _render_background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Elliptical brain-like field with smooth texture, zero outside."""
    cy, cx = height / 2.0, width / 2.0
    ry = height * rng.uniform(0.40, 0.45)
    rx = width * rng.uniform(0.42, 0.47)
    yy, xx = np.mgrid[0:height, 0:width]
    inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    texture = _BG_BASE + _BG_AMP * _bilinear_noise(rng, height, width)
    return np.where(inside, texture, 0.0)


def _draw_blob(rng: np.random.Generator, shape_class: int,
               height: int, width: int) -> RadialBlob:
    side = min(height, width)
    radius = side * rng.uniform(0.09, 0.14)
    cy = height * rng.uniform(0.38, 0.62)
    cx = width * rng.uniform(0.38, 0.62)
    if shape_class == 0:
        # Round: mild ellipticity plus a whisper of low-order wobble.
        orders = (2, 3)
        amplitudes = (rng.uniform(0.0, 0.08), rng.uniform(0.0, 0.03))
    else:
        # Irregular: strong mid-frequency radial noise.
        orders = (3, 5, 7)
        raw = rng.uniform(0.5, 1.0, 3)
        total = rng.uniform(0.40, 0.55)
        amplitudes = tuple(float(a) for a in raw / raw.sum() * total)
    phases = tuple(float(p) for p in rng.uniform(0.0, 2 * math.pi, len(orders)))
    return RadialBlob((cy, cx), radius, orders, tuple(float(a) for a in amplitudes), phases)


def _render_modality(rng: np.random.Generator, shape_class: int,
                     height: int, width: int, background: bool
                     ) -> tuple[np.ndarray, np.ndarray]:
    blob = _draw_blob(rng, shape_class, height, width)
    mask, depth = radial_scan(blob, height, width)
    plane = _render_background(rng, height, width) if background \
        else np.zeros((height, width))
    intensity = _TUMOR_LO + (_TUMOR_HI - _TUMOR_LO) * depth
    plane = np.where(mask, intensity, plane)
    return plane, mask


def generate_case(config: SynthConfig, index: int, label: int,
                  stream: int = STREAM_MAIN) -> SynthCase:
    height, width = config.image_size
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, stream, index]))
    planes = []
    masks = []
    aligned: dict[str, bool | None] = {}
    shape_classes: dict[str, int] = {}
    for name in config.modalities:
        p = config.alignment.get(name)
        if p is None:
            # No class signal: shape drawn independently of the label.
            shape_class = int(rng.integers(0, 2))
            aligned[name] = None
        else:
            is_aligned = bool(rng.random() < p)
            shape_class = label if is_aligned else 1 - label
            aligned[name] = is_aligned
        shape_classes[name] = shape_class
        plane, mask = _render_modality(rng, shape_class, height, width,
                                       config.background)
        planes.append(plane)
        masks.append(mask)
    return SynthCase(
        case_id=f"case_{index:04d}",
        label=label,
        volume=np.stack(planes).astype(np.float32),
        masks=np.stack(masks).astype(np.float32),
        aligned=aligned,
        shape_classes=shape_classes,
    )


def generate_cases(config: SynthConfig, stream: int = STREAM_MAIN) -> list[SynthCase]:
    """All cases of one stream, with forced label balance."""
    config.validate()
    labels = [0] * (config.n // 2) + [1] * (config.n - config.n // 2)
    order_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, stream, 0xBA1A]))
    order_rng.shuffle(labels)
    return [generate_case(config, i, labels[i], stream) for i in range(config.n)]


# ---------------------------------------------------------------------------
# demo heatmap sets
# ---------------------------------------------------------------------------

def demo_heatmap(case: SynthCase, method: str, config: SynthConfig,
                 disc_index: int) -> np.ndarray:
    """Synthetic heatmap sets for end-to-end runs.

    tumor-mask places all mass inside the discriminative modality's tumor;
    random-noise spreads uniform noise over the whole volume.
    """
    if method == "tumor-mask":
        h = np.zeros_like(case.masks)
        h[disc_index] = case.masks[disc_index]
        return h
    if method == "random-noise":
        rng = np.random.default_rng(np.random.SeedSequence(
            [config.seed, 0x5EED, int(case.case_id.split("_")[-1])]))
        return rng.uniform(0.0, 1.0, case.volume.shape).astype(np.float32)
    raise ConfigError(f"unknown demo heatmap method {method!r}")


# ---------------------------------------------------------------------------
# dataset emission
# ---------------------------------------------------------------------------

def _write_cases(cases: list[SynthCase], config: SynthConfig, out_dir: Path,
                 name: str, emit_heatmaps: bool) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    disc_index = config.modalities.index("T1C") if "T1C" in config.modalities else 0
    n_masked = math.ceil(len(cases) * config.mask_fraction)
    case_docs = []
    for i, case in enumerate(cases):
        volume_uri = f"volumes/{case.case_id}.tns"
        write_tensor(out_dir / volume_uri, case.volume)
        doc: dict = {
            "id": case.case_id,
            "volume": volume_uri,
            "label": case.label,
            "alignment": {k: v for k, v in case.aligned.items()},
        }
        if i < n_masked:
            mask_uri = f"masks/{case.case_id}.tns"
            write_tensor(out_dir / mask_uri, case.masks)
            doc["mask"] = mask_uri
        if emit_heatmaps:
            refs = {}
            for method in HEATMAP_METHODS:
                uri = f"heatmaps/{method}/{case.case_id}.tns"
                write_tensor(out_dir / uri,
                             demo_heatmap(case, method, config, disc_index))
                refs[method] = uri
            doc["heatmaps"] = refs
        case_docs.append(doc)

    manifest_doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "name": name,
        "n_classes": 2,
        "modalities": list(config.modalities),
        "task_metric": "accuracy",
        "generator": {
            "kind": "procedural-tumor",
            "seed": config.seed,
            "alignment": {m: config.alignment.get(m) for m in config.modalities},
            "background": config.background,
            "note": ("modalities without an alignment entry render a tumor "
                     "whose shape is independent of the label"),
        },
        "cases": case_docs,
    }
    return write_manifest(out_dir / "manifest.yaml", manifest_doc)


def generate_dataset(config: SynthConfig, out_dir: str | Path,
                     emit_heatmaps: bool = True) -> Path:
    """Write the main dataset (containers + manifest); returns manifest path."""
    cases = generate_cases(config, STREAM_MAIN)
    return _write_cases(cases, config, Path(out_dir), "synthetic-tumor", emit_heatmaps)


def probe_configs(config: SynthConfig) -> tuple[SynthConfig, SynthConfig]:
    """TIC probe: T1C fully aligned, FLAIR fully anti-aligned; FLAIR probe:
    the reverse. Both without background texture."""
    tic = replace(config, background=False,
                  alignment={"T1C": 1.0, "FLAIR": 0.0})
    flair = replace(config, background=False,
                    alignment={"T1C": 0.0, "FLAIR": 1.0})
    return tic, flair


def generate_probe_sets(config: SynthConfig, out_dir: str | Path
                        ) -> tuple[Path, Path]:
    """Write the two probe datasets; returns their manifest paths."""
    config.validate()
    if "T1C" not in config.modalities or "FLAIR" not in config.modalities:
        raise ConfigError("probe sets need T1C and FLAIR modalities")
    out_dir = Path(out_dir)
    tic_cfg, flair_cfg = probe_configs(config)
    tic_cases = generate_cases(tic_cfg, STREAM_TIC)
    flair_cases = generate_cases(flair_cfg, STREAM_FLAIR)
    tic_path = _write_cases(tic_cases, tic_cfg, out_dir / "probe_tic",
                            "probe-tic", emit_heatmaps=False)
    flair_path = _write_cases(flair_cases, flair_cfg, out_dir / "probe_flair",
                              "probe-flair", emit_heatmaps=False)
    return tic_path, flair_path


def ground_truth_mi(acc_t1c: float, acc_flair: float,
                    modalities: tuple[str, ...] = ("T1C", "FLAIR", "T1", "T2"),
                    threshold: float = 0.0) -> np.ndarray:
    """Ground-truth modality importance from probe-set accuracies.

    Places acc_t1c and acc_flair at the T1C/FLAIR positions of
    ``modalities`` and 0 elsewhere; entries at or below ``threshold`` are
    snapped to 0 (used to discard near-chance residue before normalize_mi).
    """
    if not (0.0 <= acc_t1c <= 1.0 and 0.0 <= acc_flair <= 1.0):
        raise ConfigError("accuracies must lie in [0, 1]")
    if "T1C" not in modalities or "FLAIR" not in modalities:
        raise ConfigError("modalities must include T1C and FLAIR")
    phi = np.zeros(len(modalities), dtype=np.float64)
    phi[modalities.index("T1C")] = acc_t1c
    phi[modalities.index("FLAIR")] = acc_flair
    if threshold > 0.0:
        phi[phi <= threshold] = 0.0
    return phi
