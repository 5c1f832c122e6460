"""Synthetic underwater degradation and a classical enhancement baseline.

Degradation keeps the attenuation + homogeneous backscatter terms of the
classical light-propagation model (no forward-scatter blur): per channel
I = J * exp(-beta * z) + B * (1 - exp(-beta * z)).  The enhancement stage
is pluggable so externally enhanced images can be substituted; the built-in
baseline is gray-world white balance followed by a percentile stretch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WaterParams:
    """Per-channel attenuation (1/m) and veiling light in [0, 1]; red
    normally attenuates fastest."""

    beta: tuple[float, float, float] = (0.6, 0.2, 0.1)
    backlight: tuple[float, float, float] = (0.1, 0.3, 0.35)

    def __post_init__(self):
        if len(self.beta) != 3 or len(self.backlight) != 3:
            raise ValueError("beta and backlight must have 3 channels")
        if any(b < 0 for b in self.beta):
            raise ValueError("beta must be >= 0")
        if any(not (0.0 <= b <= 1.0) for b in self.backlight):
            raise ValueError("backlight must be in [0, 1]")


def degrade(rgb: np.ndarray, depth: np.ndarray, water: WaterParams) -> np.ndarray:
    """Apply attenuation and backscatter to a clean [0, 1] image.

    Pixels without a depth measurement fall back to the 99th-percentile
    scene depth so the haze stays spatially plausible across holes.
    """
    img = np.asarray(rgb, dtype=np.float64)
    z = np.asarray(depth, dtype=np.float64)
    if img.shape[:2] != z.shape:
        raise ValueError("rgb and depth dimensions do not match")
    valid = np.isfinite(z) & (z > 0)
    fill = float(np.percentile(z[valid], 99)) if np.any(valid) else 0.0
    z = np.where(valid, z, fill)
    beta = np.asarray(water.beta, dtype=np.float64)
    back = np.asarray(water.backlight, dtype=np.float64)
    trans = np.exp(-z[..., None] * beta)
    return img * trans + back * (1.0 - trans)


def enhance_baseline(rgb: np.ndarray) -> np.ndarray:
    """Gray-world white balance, then a 1st-to-99th percentile stretch per
    channel, clamped to [0, 1].  Constant channels pass through the stretch
    unchanged."""
    img = np.asarray(rgb, dtype=np.float64).copy()
    means = img.reshape(-1, 3).mean(axis=0)
    target = means.mean()
    for c in range(3):
        if means[c] > 1e-12:
            img[..., c] *= target / means[c]
    for c in range(3):
        p1, p99 = np.percentile(img[..., c], [1, 99])
        if p99 - p1 > 1e-9:
            img[..., c] = (img[..., c] - p1) / (p99 - p1)
    return np.clip(img, 0.0, 1.0)


def enhancement_stage(mode: str):
    """Resolve an enhancement mode name to a callable image -> image.

    'none' is identity and 'baseline' the classical enhancer; directory
    substitution of pre-enhanced images is handled by the dataset loader.
    """
    if mode == "none":
        return lambda img: img
    if mode == "baseline":
        return enhance_baseline
    raise ValueError(f"unknown enhancement mode: {mode}")
