"""Heatmap post-processing and ranking primitives.

All functions take and return plain ndarrays; the whole multi-modal heatmap
is treated as one joint array, so quantile ranking never happens per
modality.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError

POSTPROCESS_MODES = ("positive-clip", "absolute")

# Default removal schedule: 0%, 10%, ..., 100%.
DEFAULT_SCHEDULE = tuple(i / 10 for i in range(11))

# Absolute slack applied before ceil() so grid fractions like 0.1 * 30
# (= 3.0000000000000004 in floats) do not select one location too many.
_CEIL_GUARD = 1e-9


def postprocess(heatmap: np.ndarray, mode: str = "positive-clip") -> np.ndarray:
    """Map raw attribution scores into [0, 1].

    positive-clip keeps positive evidence only; absolute folds negative
    evidence in. Either way the result is scaled by 1/max when max > 0,
    and an all-zero map passes through unchanged.
    """
    if mode not in POSTPROCESS_MODES:
        raise ConfigError(f"unknown postprocess mode {mode!r}; "
                          f"expected one of {POSTPROCESS_MODES}")
    if not np.isfinite(heatmap).all():
        raise ConfigError("heatmap contains non-finite values")
    out = np.clip(heatmap, 0.0, None) if mode == "positive-clip" else np.abs(heatmap)
    out = out.astype(np.float64)
    peak = out.max() if out.size else 0.0
    if peak > 0:
        out = out / peak
    return out


def topk_count(q: float, n: int) -> int:
    """Number of locations removed at fraction ``q``: ceil(q * n)."""
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"removal fraction must lie in [0, 1], got {q}")
    if q == 0.0:
        return 0
    return min(n, max(1, math.ceil(q * n - _CEIL_GUARD)))


def ranking(heatmap: np.ndarray) -> np.ndarray:
    """Flat indices ordered by descending value, ties by ascending index."""
    flat = np.asarray(heatmap).ravel()
    # Stable sort of the negated values keeps ties in index order.
    return np.argsort(-flat, kind="stable")


def topk_mask(heatmap: np.ndarray, q: float) -> np.ndarray:
    """Boolean mask marking the top ceil(q * N) locations of the heatmap.

    Ranking is joint over the whole array. Masks nest: a larger q always
    contains the mask of a smaller one.
    """
    arr = np.asarray(heatmap)
    k = topk_count(q, arr.size)
    mask = np.zeros(arr.size, dtype=bool)
    if k:
        mask[ranking(arr)[:k]] = True
    return mask.reshape(arr.shape)


def modality_positive_sum(heatmap: np.ndarray) -> np.ndarray:
    """Estimated modality importance: per-modality sum of positive values.

    ``heatmap`` is the joint [M, ...] array; returns a length-M vector.
    """
    arr = np.asarray(heatmap, dtype=np.float64)
    if arr.ndim < 2:
        raise ConfigError("expected a [modalities, ...] heatmap array")
    flat = arr.reshape(arr.shape[0], -1)
    return np.clip(flat, 0.0, None).sum(axis=1)


def validate_schedule(points) -> tuple[float, ...]:
    """Check a removal schedule: strictly increasing, from 0.0 to 1.0."""
    sched = tuple(float(p) for p in points)
    if len(sched) < 2:
        raise ConfigError("removal schedule needs at least two points")
    if sched[0] != 0.0 or sched[-1] != 1.0:
        raise ConfigError("removal schedule must start at 0.0 and end at 1.0")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigError("removal schedule must be strictly increasing")
    return sched


def parse_schedule(text: str) -> tuple[float, ...]:
    """Parse a comma-separated schedule string from the CLI."""
    try:
        points = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse removal schedule {text!r}") from exc
    return validate_schedule(points)
