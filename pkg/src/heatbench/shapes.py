"""Procedural blob geometry shared by the data generator and the gated oracle.

Blobs are star-convex regions with a radial boundary r(theta) built from a
few cosine harmonics. Roundness is measured with the compactness statistic
4*pi*area/perimeter^2, where the perimeter is the crack length of the pixel
mask (4-neighbour in/out transitions plus border edges). On that estimator a
digitized disc scores about pi^2/16 ~ 0.62 while a heavily perturbed blob
falls well below the classifier threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Decision threshold for round-vs-irregular on crack-length compactness.
# Generated round blobs score above ~0.56, irregular ones below ~0.45.
COMPACTNESS_THRESHOLD = 0.50


@dataclass(frozen=True)
class RadialBlob:
    """Boundary r(theta) = radius * (1 + sum_k amp_k * cos(k*theta + phase_k))."""
    center: tuple[float, float]
    radius: float
    orders: tuple[int, ...]
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]

    def boundary(self, theta: np.ndarray) -> np.ndarray:
        r = np.ones_like(theta)
        for k, amp, phase in zip(self.orders, self.amplitudes, self.phases):
            r += amp * np.cos(k * theta + phase)
        return self.radius * np.maximum(r, 0.05)


def radial_scan(blob: RadialBlob, height: int, width: int
                ) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize a blob (pixel-centre test).

    Returns (mask, depth) where depth is 1 - rho/r(theta) inside the blob
    (1 at the centre, 0 at the boundary) and 0 outside; useful for intensity
    falloff when rendering.
    """
    cy, cx = blob.center
    reach = blob.radius * (1.0 + sum(abs(a) for a in blob.amplitudes)) + 1.0
    y0 = max(0, int(math.floor(cy - reach)))
    y1 = min(height, int(math.ceil(cy + reach)) + 1)
    x0 = max(0, int(math.floor(cx - reach)))
    x1 = min(width, int(math.ceil(cx + reach)) + 1)
    mask = np.zeros((height, width), dtype=bool)
    depth = np.zeros((height, width), dtype=np.float64)
    if y0 >= y1 or x0 >= x1:
        return mask, depth
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dy = yy - cy
    dx = xx - cx
    rho = np.hypot(dy, dx)
    boundary = blob.boundary(np.arctan2(dy, dx))
    inside = rho <= boundary
    mask[y0:y1, x0:x1] = inside
    depth[y0:y1, x0:x1] = np.where(inside, 1.0 - rho / boundary, 0.0)
    return mask, depth


def rasterize(blob: RadialBlob, height: int, width: int) -> np.ndarray:
    """Boolean mask of the pixels inside the blob."""
    return radial_scan(blob, height, width)[0]


def crack_perimeter(mask: np.ndarray) -> float:
    """Boundary length counted as in/out pixel-edge transitions."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError("perimeter is defined for 2-D masks")
    edges = int(np.count_nonzero(m[:, 1:] != m[:, :-1]))
    edges += int(np.count_nonzero(m[1:, :] != m[:-1, :]))
    # Image-border edges of foreground pixels count too.
    edges += int(m[0, :].sum() + m[-1, :].sum() + m[:, 0].sum() + m[:, -1].sum())
    return float(edges)


def compactness(mask: np.ndarray) -> float:
    """4*pi*area/perimeter^2 of a binary mask; 0.0 for an empty mask."""
    m = np.asarray(mask, dtype=bool)
    area = float(np.count_nonzero(m))
    if area == 0.0:
        return 0.0
    perim = crack_perimeter(m)
    return 4.0 * math.pi * area / (perim * perim)
