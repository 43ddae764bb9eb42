"""Hand-crafted colour-histogram featurizer.

Projects RGB crop pixels into hue/saturation, bins each channel into a
histogram, probability-normalizes the two halves and finally
L2-normalizes the concatenation so the descriptor rides the same
cosine-similarity path as every deep feature. Brightness is deliberately
excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import FeatureVector, normalize_set
from .errors import ChannelOutOfRange

DEFAULT_HUE_BINS = 32
DEFAULT_SAT_BINS = 32


@dataclass(frozen=True)
class HistogramConfig:
    hue_bins: int = DEFAULT_HUE_BINS
    sat_bins: int = DEFAULT_SAT_BINS

    def __post_init__(self):
        if self.hue_bins < 2 or self.sat_bins < 2:
            raise ValueError("hue_bins and sat_bins must each be >= 2")


@dataclass(frozen=True)
class RgbCrop:
    """One object crop as row-major RGB pixels, optionally masked.

    When ``mask`` is present only mask-interior pixels are binned.
    """

    width: int
    height: int
    pixels: np.ndarray                      # (height*width, 3) in [0, 255]
    mask: np.ndarray | None = field(default=None)  # (height*width,) bool

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("crop dimensions must be >= 1")
        p = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 3)
        if p.shape[0] != self.width * self.height:
            raise ValueError(
                f"{p.shape[0]} pixels for a {self.width}x{self.height} crop"
            )
        object.__setattr__(self, "pixels", p)
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool).reshape(-1)
            if m.shape[0] != p.shape[0]:
                raise ValueError("mask length does not match pixel count")
            if not m.any():
                raise ValueError("mask excludes every pixel")
            object.__setattr__(self, "mask", m)

    @classmethod
    def from_array(cls, img: np.ndarray, mask: np.ndarray | None = None) -> "RgbCrop":
        """Build from an (H, W, 3) image array and optional (H, W) mask."""
        img = np.asarray(img)
        h, w = img.shape[:2]
        m = None if mask is None else np.asarray(mask).reshape(-1)
        return cls(width=w, height=h, pixels=img.reshape(-1, 3), mask=m)

    def active_pixels(self) -> np.ndarray:
        return self.pixels if self.mask is None else self.pixels[self.mask]


def rgb_to_hs(pixel) -> tuple[float, float]:
    """Hexagonal-model hue (degrees in [0, 360)) and saturation in [0, 1].

    Achromatic pixels (max == min) have hue 0 and saturation 0; a fully
    dark pixel (max == 0) has saturation 0.
    """
    r, g, b = (float(c) for c in pixel)
    for c in (r, g, b):
        if not (0.0 <= c <= 255.0):
            raise ChannelOutOfRange(f"channel value {c} outside [0, 255]")
    mx = max(r, g, b)
    mn = min(r, g, b)
    delta = mx - mn
    if delta == 0.0:
        hue = 0.0
    elif mx == r:
        hue = 60.0 * (((g - b) / delta) % 6.0)
    elif mx == g:
        hue = 60.0 * ((b - r) / delta + 2.0)
    else:
        hue = 60.0 * ((r - g) / delta + 4.0)
    if hue >= 360.0:
        hue -= 360.0
    sat = 0.0 if mx == 0.0 else delta / mx
    return hue, sat


def _hs_arrays(crop: RgbCrop) -> tuple[np.ndarray, np.ndarray]:
    # Vectorized version of rgb_to_hs over all active pixels.
    px = crop.active_pixels()
    if np.any((px < 0.0) | (px > 255.0)):
        bad = px[np.any((px < 0.0) | (px > 255.0), axis=1)][0]
        raise ChannelOutOfRange(f"pixel {tuple(bad)} outside [0, 255]")
    r, g, b = px[:, 0], px[:, 1], px[:, 2]
    mx = px.max(axis=1)
    mn = px.min(axis=1)
    delta = mx - mn
    safe = np.where(delta == 0.0, 1.0, delta)
    hue = np.where(
        mx == r,
        ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    hue = np.where(delta == 0.0, 0.0, hue * 60.0)
    hue = np.where(hue >= 360.0, hue - 360.0, hue)
    sat = np.where(mx == 0.0, 0.0, delta / np.where(mx == 0.0, 1.0, mx))
    return hue, sat


def _bin(values: np.ndarray, bins: int, hi: float) -> np.ndarray:
    # Half-open [lo, hi) bins; the top bin additionally absorbs the global
    # maximum so a value exactly at hi (saturation 1.0) stays in range.
    idx = np.floor(values * bins / hi).astype(np.intp)
    idx = np.minimum(idx, bins - 1)
    return np.bincount(idx, minlength=bins).astype(np.float64)


def hs_histogram(crop: RgbCrop, cfg: HistogramConfig = HistogramConfig()) -> FeatureVector:
    """Concatenated hue+saturation histogram of a crop, L2-normalized.

    Each half is first normalized to sum to one, so the two channels
    carry equal weight regardless of bin counts.
    """
    hue, sat = _hs_arrays(crop)
    hue_hist = _bin(hue, cfg.hue_bins, 360.0)
    sat_hist = _bin(sat, cfg.sat_bins, 1.0)
    hue_hist /= hue_hist.sum()
    sat_hist /= sat_hist.sum()
    vec = np.concatenate([hue_hist, sat_hist])
    return normalize_set([vec], provenance="colourhist").vector(0)


def raw_hs_histogram(crop: RgbCrop, cfg: HistogramConfig = HistogramConfig()) -> np.ndarray:
    """The pre-L2 concatenation (each half summing to 1); used by tests."""
    hue, sat = _hs_arrays(crop)
    hue_hist = _bin(hue, cfg.hue_bins, 360.0)
    sat_hist = _bin(sat, cfg.sat_bins, 1.0)
    return np.concatenate([hue_hist / hue_hist.sum(), sat_hist / sat_hist.sum()])
