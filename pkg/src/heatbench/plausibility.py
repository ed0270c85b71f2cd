"""Plausibility: how well heatmap mass agrees with human annotation masks.

feature_portion is the fraction of total heatmap mass falling inside the
mask, taken jointly over the whole array. msfi weights that same in-mask
portion per modality by normalized modality importance, so attribution on
modalities the model provably ignores earns nothing. Both penalize only
false positives: mass outside the mask costs, uncovered mask area alone
does not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UndefinedStatisticError


def _portion(scores: np.ndarray, mask: np.ndarray) -> float:
    """In-mask share of total score mass; raises when there is no mass."""
    total = float(np.sum(scores))
    if total == 0.0:
        raise UndefinedStatisticError("undefined: heatmap has zero total mass")
    inside = float(np.sum(scores[mask > 0]))
    return inside / total


def feature_portion(heatmap: np.ndarray, mask: np.ndarray) -> float:
    """Share of heatmap mass inside the annotation, over the whole array."""
    h = np.asarray(heatmap, dtype=np.float64)
    m = np.asarray(mask)
    if h.shape != m.shape:
        raise ConfigError(f"heatmap shape {h.shape} does not match mask shape {m.shape}")
    return _portion(h.ravel(), m.ravel())


def normalize_mi(phi) -> np.ndarray:
    """Scale modality importance into [0, 1]: clip negatives, divide by max."""
    arr = np.asarray(phi, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError("phi must be a non-empty vector")
    if not np.isfinite(arr).all():
        raise ConfigError("phi contains non-finite values")
    clipped = np.clip(arr, 0.0, None)
    peak = clipped.max()
    if peak == 0.0:
        raise UndefinedStatisticError(
            "MSFI undefined: no positively important modality")
    return clipped / peak


def msfi(heatmap: np.ndarray, mask: np.ndarray, phi_normalized) -> float:
    """Importance-weighted in-mask portion, averaged over modalities.

    phi must already be normalized to [0, 1] (see normalize_mi). A modality
    whose heatmap slice has zero mass contributes 0 to the numerator while
    its phi stays in the denominator. With a single modality and phi = (1,)
    this reduces exactly to feature_portion.
    """
    h = np.asarray(heatmap, dtype=np.float64)
    m = np.asarray(mask)
    phi = np.asarray(phi_normalized, dtype=np.float64)
    if h.shape != m.shape:
        raise ConfigError(f"heatmap shape {h.shape} does not match mask shape {m.shape}")
    if h.ndim < 2 or phi.shape != (h.shape[0],):
        raise ConfigError(
            f"phi has shape {phi.shape}, expected ({h.shape[0]},) for this heatmap")
    if (phi < 0).any() or (phi > 1).any():
        raise ConfigError("phi must be normalized to [0, 1] before msfi")
    denom = float(phi.sum())
    if denom == 0.0:
        raise UndefinedStatisticError(
            "MSFI undefined: no positively important modality")
    acc = 0.0
    any_mass = False
    for mod in range(h.shape[0]):
        try:
            portion = _portion(h[mod].ravel(), m[mod].ravel())
            any_mass = True
        except UndefinedStatisticError:
            portion = 0.0  # no mass on this modality: contributes nothing
        acc += float(phi[mod]) * portion
    if not any_mass:
        # Matches feature_portion: a heatmap with no mass at all has no score.
        raise UndefinedStatisticError("undefined: heatmap has zero total mass")
    return acc / denom


@dataclass
class CasePlausibility:
    case_id: str
    fp: float | None
    msfi: float | None


def score_cases(heatmaps: dict[str, np.ndarray], masks: dict[str, np.ndarray],
                phi_normalized) -> list[CasePlausibility]:
    """Per-case FP and MSFI for every case that has a mask.

    Undefined scores (all-zero heatmap) are recorded as None, not dropped,
    so the caller can report how many cases were flagged.
    """
    out = []
    for case_id, mask in masks.items():
        h = heatmaps.get(case_id)
        if h is None:
            raise ConfigError(f"case {case_id} has a mask but no heatmap")
        try:
            fp_val = feature_portion(h, mask)
        except UndefinedStatisticError:
            fp_val = None
        try:
            msfi_val = msfi(h, mask, phi_normalized)
        except UndefinedStatisticError:
            msfi_val = None
        out.append(CasePlausibility(case_id, fp_val, msfi_val))
    return out
