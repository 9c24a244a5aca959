"""Stochastic frame augmentations for contrastive view pairs.

Order is fixed: scale jitter, additive noise, cutout, geometric. The same
config and generator state therefore always produce the same output.
"""

from dataclasses import dataclass

import numpy as np

from .records import FrameTensor

__all__ = ["AugmentConfig", "augment"]


@dataclass(frozen=True)
class AugmentConfig:
    gaussian_noise_sigma: float = 0.05
    scale_jitter_range: tuple = (0.9, 1.1)
    cutout_fraction: float = 0.1
    cutout_fill_sigma: float = 0.05
    geometric_ops_enabled: bool = False

    def __post_init__(self):
        lo, hi = self.scale_jitter_range
        if self.gaussian_noise_sigma < 0:
            raise ValueError("gaussian_noise_sigma must be >= 0")
        if not (0 < lo <= hi):
            raise ValueError(f"scale_jitter_range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if not (0 <= self.cutout_fraction < 1):
            raise ValueError("cutout_fraction must be in [0, 1)")
        if self.cutout_fill_sigma < 0:
            raise ValueError("cutout_fill_sigma must be >= 0")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(
            gaussian_noise_sigma=0.0,
            scale_jitter_range=(1.0, 1.0),
            cutout_fraction=0.0,
            cutout_fill_sigma=0.0,
            geometric_ops_enabled=False,
        )


def _cutout_vector(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator):
    n = x.size
    n_cut = int(round(cfg.cutout_fraction * n))
    if n_cut == 0:
        return
    start = int(rng.integers(0, n - n_cut + 1))
    x[start : start + n_cut] = rng.normal(0.0, cfg.cutout_fill_sigma, n_cut)


def _cutout_grid(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator):
    h, w = x.shape
    # Square-root sides keep the patch area near cutout_fraction of the grid.
    side = np.sqrt(cfg.cutout_fraction)
    ph = min(h, max(1, int(round(side * h))))
    pw = min(w, max(1, int(round(side * w))))
    if cfg.cutout_fraction == 0:
        return
    r0 = int(rng.integers(0, h - ph + 1))
    c0 = int(rng.integers(0, w - pw + 1))
    x[r0 : r0 + ph, c0 : c0 + pw] = rng.normal(0.0, cfg.cutout_fill_sigma, (ph, pw))


def _geometric_grid(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    h, w = x.shape
    dy = int(rng.integers(-(h // 4), h // 4 + 1))
    dx = int(rng.integers(-(w // 4), w // 4 + 1))
    x = np.roll(x, (dy, dx), axis=(0, 1))
    # Crop a random sub-window and resize back by nearest-neighbor indexing.
    frac = float(rng.uniform(0.8, 1.0))
    ch = max(1, int(round(frac * h)))
    cw = max(1, int(round(frac * w)))
    r0 = int(rng.integers(0, h - ch + 1))
    c0 = int(rng.integers(0, w - cw + 1))
    crop = x[r0 : r0 + ch, c0 : c0 + cw]
    rows = np.clip(np.round(np.linspace(0, ch - 1, h)).astype(int), 0, ch - 1)
    cols = np.clip(np.round(np.linspace(0, cw - 1, w)).astype(int), 0, cw - 1)
    return crop[np.ix_(rows, cols)]


def augment(frame: FrameTensor, cfg: AugmentConfig, rng: np.random.Generator) -> FrameTensor:
    """Return a perturbed copy of the frame; the input is never modified."""
    x = frame.values.copy()
    lo, hi = cfg.scale_jitter_range
    x = x * float(rng.uniform(lo, hi))
    x = x + rng.normal(0.0, cfg.gaussian_noise_sigma, x.shape)
    if frame.layout_tag == "grid":
        _cutout_grid(x, cfg, rng)
        if cfg.geometric_ops_enabled:
            x = _geometric_grid(x, rng)
    else:
        _cutout_vector(x, cfg, rng)
    return FrameTensor(values=x, layout_tag=frame.layout_tag)
