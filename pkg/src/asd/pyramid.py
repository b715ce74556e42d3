"""Multi-scale patch stacks around every pixel."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ScaleSet:
    scales: tuple = (0.5, 1.0, 2.0)
    patch: int = 15

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if not self.scales:
            raise ContractError("scale set must hold at least one scale")
        if any(not s > 0 for s in self.scales):
            raise ContractError(f"scales must be positive: {self.scales}")
        if self.patch < 1 or self.patch % 2 == 0:
            raise ContractError(f"patch side must be odd and positive, got {self.patch}")

    @property
    def m(self) -> int:
        return len(self.scales)


def scaled_shape(h: int, w: int, scale: float) -> tuple[int, int]:
    return _round_half_up(h * scale), _round_half_up(w * scale)


def resize(img: np.ndarray, scale: float) -> np.ndarray:
    """Bilinear resize by ``scale`` with half-pixel aligned sampling."""
    if not scale > 0:
        raise ContractError(f"scale must be positive, got {scale}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    oh, ow = scaled_shape(h, w, scale)
    if oh < 1 or ow < 1:
        raise ContractError(f"resizing {h}x{w} by {scale} gives an empty image")
    return kernels.bilinear_resize(img, oh, ow)


def center_in_scaled(i: int, j: int, scale: float) -> tuple[int, int]:
    return _round_half_up(i * scale), _round_half_up(j * scale)


def extract_patch(img_at_scale, center, scale, patch):
    """``patch x patch x B`` window around the scaled image of ``center``.

    Samples falling outside the scaled image are filled by reflection.
    """
    i, j = center
    ci, cj = center_in_scaled(i, j, scale)
    out = kernels.gather_patches(
        np.asarray(img_at_scale, dtype=np.float64),
        np.array([ci], np.int64),
        np.array([cj], np.int64),
        patch,
    )
    return out[0]


def pyramid_patches(img, center, scale_set: ScaleSet) -> list[np.ndarray]:
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    i, j = center
    if not (0 <= i < h and 0 <= j < w):
        raise ContractError(f"center {center} outside {h}x{w} image")
    return [
        extract_patch(resize(img, s), center, s, scale_set.patch)
        for s in scale_set.scales
    ]


def dense_pyramid(img, scale_set: ScaleSet) -> list[np.ndarray]:
    """Patch stacks for every pixel at once.

    Returns ``m`` arrays of shape ``(H*W) x P x P x B``; pixel order is
    row-major. Each image is resized once per scale.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    ii, jj = np.divmod(np.arange(h * w, dtype=np.int64), w)
    out = []
    for s in scale_set.scales:
        scaled = resize(img, s)
        rows = np.floor(ii * s + 0.5).astype(np.int64)
        cols = np.floor(jj * s + 0.5).astype(np.int64)
        out.append(kernels.gather_patches(scaled, rows, cols, scale_set.patch))
    return out
