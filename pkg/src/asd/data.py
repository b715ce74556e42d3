"""Labeled imagery: PNG I/O, normal-class masking and synthetic datasets.

A dataset split on disk is a directory holding ``images/NAME.png`` and
``labels/NAME.png`` pairs. Labels are single-channel integer rasters.
Images are returned as ``H x W x B`` float64 arrays scaled to ``[0, 1]``
by the bit-depth maximum; no per-image standardisation is applied.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import ContractError, DataIOError

_BIT_MAX = {np.dtype(np.uint8): 255.0, np.dtype(np.uint16): 65535.0}
# PNG compression is pinned so re-runs write byte-identical files.
_PNG_FLAGS = [cv2.IMWRITE_PNG_COMPRESSION, 6]


def _read_raw(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataIOError(f"missing file: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataIOError(f"unreadable image: {path}")
    return raw


def read_image(path) -> np.ndarray:
    """Read a PNG as an ``H x W x B`` float64 array in ``[0, 1]``."""
    path = Path(path)
    raw = _read_raw(path)
    if raw.dtype not in _BIT_MAX:
        raise ContractError(
            f"{path}: unsupported bit depth {raw.dtype}, expected uint8 or uint16"
        )
    scale = _BIT_MAX[raw.dtype]
    if raw.ndim == 2:
        raw = raw[:, :, None]
    elif raw.shape[2] == 3:
        raw = raw[:, :, ::-1]
    elif raw.shape[2] == 4:
        raw = raw[:, :, [2, 1, 0, 3]]
    return np.ascontiguousarray(raw, dtype=np.float64) / scale


def read_labels(path) -> np.ndarray:
    """Read a single-channel label PNG as an int64 ``H x W`` array."""
    path = Path(path)
    raw = _read_raw(path)
    if raw.ndim == 3:
        if raw.shape[2] != 1 and not (raw == raw[:, :, :1]).all():
            raise ContractError(f"{path}: label raster must be single-channel")
        raw = raw[:, :, 0]
    if raw.dtype not in _BIT_MAX:
        raise ContractError(f"{path}: unsupported label bit depth {raw.dtype}")
    return raw.astype(np.int64)


def _atomic_imwrite(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    ok, buf = cv2.imencode(".png", arr, _PNG_FLAGS)
    if not ok:
        raise DataIOError(f"PNG encoding failed for {path}")
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(buf.tobytes())
        os.replace(tmp, path)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def write_image(path, img: np.ndarray, bit_depth: int = 8) -> None:
    """Quantise a ``[0, 1]`` image to 8 or 16 bit and write it as PNG."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    bands = img.shape[2]
    if bands not in (1, 3, 4):
        raise ContractError(f"PNG holds 1, 3 or 4 bands, got {bands}")
    if bit_depth == 8:
        dtype, top = np.uint8, 255.0
    elif bit_depth == 16:
        dtype, top = np.uint16, 65535.0
    else:
        raise ContractError(f"unsupported bit depth {bit_depth}")
    q = np.floor(np.clip(img, 0.0, 1.0) * top + 0.5).astype(dtype)
    if bands == 1:
        q = q[:, :, 0]
    elif bands == 3:
        q = q[:, :, ::-1]
    else:
        q = q[:, :, [2, 1, 0, 3]]
    _atomic_imwrite(Path(path), np.ascontiguousarray(q))


def write_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise ContractError("label ids must lie in [0, 65535]")
    dtype = np.uint8 if labels.max() <= 255 else np.uint16
    _atomic_imwrite(Path(path), labels.astype(dtype))


def load_labeled_image(image_path, label_path) -> tuple[np.ndarray, np.ndarray]:
    """Load an image and its label map, checking that the rasters agree."""
    img = read_image(image_path)
    labels = read_labels(label_path)
    if img.shape[:2] != labels.shape:
        raise ContractError(
            f"dimension mismatch: image {image_path} is {img.shape[0]}x{img.shape[1]}, "
            f"labels {label_path} are {labels.shape[0]}x{labels.shape[1]}"
        )
    return img, labels


def make_normal_mask(labels: np.ndarray, normal_class: int) -> np.ndarray:
    mask = np.asarray(labels) == normal_class
    if not mask.any():
        raise ContractError(f"normal class absent: {normal_class} not in label map")
    return mask


@dataclass
class Sample:
    name: str
    image: np.ndarray
    labels: np.ndarray


def list_split(root) -> list[str]:
    """Names of the image/label pairs in a split directory, sorted."""
    root = Path(root)
    img_dir, lab_dir = root / "images", root / "labels"
    if not img_dir.is_dir() or not lab_dir.is_dir():
        raise DataIOError(f"{root}: expected images/ and labels/ subdirectories")
    images = {p.stem for p in img_dir.glob("*.png")}
    labels = {p.stem for p in lab_dir.glob("*.png")}
    if images != labels:
        unpaired = sorted(images ^ labels)
        raise DataIOError(f"{root}: unpaired files {unpaired[:5]}")
    return sorted(images)


def load_split(root) -> list[Sample]:
    root = Path(root)
    out = []
    for name in list_split(root):
        img, labels = load_labeled_image(
            root / "images" / f"{name}.png", root / "labels" / f"{name}.png"
        )
        out.append(Sample(name, img, labels))
    return out


def save_split(root, samples) -> None:
    root = Path(root)
    for s in samples:
        write_image(root / "images" / f"{s.name}.png", s.image)
        write_labels(root / "labels" / f"{s.name}.png", s.labels)


# --- synthetic data -------------------------------------------------------

# (low, high) per band of the normal texture, per family id.
_NORMAL_PALETTES = {
    0: ((0.25, 0.55), (0.35, 0.65), (0.20, 0.45)),
    1: ((0.40, 0.65), (0.30, 0.50), (0.25, 0.45)),
    2: ((0.30, 0.50), (0.30, 0.50), (0.35, 0.65)),
}
# Anomaly colours: each sits outside [0.2, 0.65] in at least two bands.
_ANOMALY_COLOURS = (
    (0.95, 0.05, 0.05),
    (0.05, 0.05, 0.95),
    (0.95, 0.95, 0.05),
    (0.05, 0.90, 0.90),
    (0.95, 0.05, 0.90),
)
_TARGET_FRACTION = (0.05, 0.30)
_PLACEMENT_TRIES = 50


@dataclass
class SyntheticSpec:
    """Recipe for a procedurally generated dataset."""

    size: int = 32
    bands: int = 3
    family: int = 0
    anomaly_count: tuple[int, int] = (1, 3)
    anomaly_size: tuple[int, int] = (3, 6)
    shape: str = "disk"
    n_train: int = 40
    n_test: int = 20
    seed: int = 0

    def validate(self) -> None:
        lo_c, hi_c = self.anomaly_count
        lo_s, hi_s = self.anomaly_size
        if self.size < 1 or self.bands < 1:
            raise ContractError("image size and band count must be positive")
        if self.family not in _NORMAL_PALETTES:
            raise ContractError(f"unknown texture family {self.family}")
        if not 0 <= lo_c <= hi_c:
            raise ContractError(f"bad anomaly count range {self.anomaly_count}")
        if hi_c > 0 and not 1 <= lo_s <= hi_s:
            raise ContractError(f"bad anomaly size range {self.anomaly_size}")
        if hi_c > 0 and 2 * hi_s + 1 > self.size:
            raise ContractError(
                f"anomaly size {hi_s} does not fit a {self.size}px image"
            )
        if self.shape not in ("disk", "rect", "mixed"):
            raise ContractError(f"unknown anomaly shape {self.shape!r}")
        if self.n_train < 0 or self.n_test < 0:
            raise ContractError("split sizes must be non-negative")


def _box_blur(a: np.ndarray, k: int = 5) -> np.ndarray:
    pad = k // 2
    p = np.pad(a, pad, mode="reflect")
    c = np.cumsum(np.cumsum(np.pad(p, ((1, 0), (1, 0))), axis=0), axis=1)
    return (c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]) / (k * k)


def _band_palette(spec: SyntheticSpec, band: int) -> tuple[float, float]:
    pal = _NORMAL_PALETTES[spec.family]
    return pal[band % len(pal)]


def _normal_texture(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.size
    out = np.empty((n, n, spec.bands))
    cols = np.arange(n)
    for b in range(spec.bands):
        noise = _box_blur(rng.random((n, n)))
        period = rng.uniform(6.0, 12.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        wave = 0.5 + 0.5 * np.sin(2 * np.pi * cols / period + phase)
        tex = 0.7 * noise + 0.3 * wave[None, :]
        lo, hi = _band_palette(spec, b)
        out[:, :, b] = lo + (hi - lo) * tex
    return out


def _shape_mask(n, kind, ci, cj, size, half_w):
    ii, jj = np.mgrid[:n, :n]
    if kind == "disk":
        return (ii - ci) ** 2 + (jj - cj) ** 2 <= size * size
    return (np.abs(ii - ci) <= size) & (np.abs(jj - cj) <= half_w)


def _place_anomalies(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.size
    lo_c, hi_c = spec.anomaly_count
    best, best_gap = np.zeros((n, n), bool), np.inf
    for _ in range(_PLACEMENT_TRIES):
        mask = np.zeros((n, n), bool)
        for _k in range(int(rng.integers(lo_c, hi_c + 1))):
            size = int(rng.integers(spec.anomaly_size[0], spec.anomaly_size[1] + 1))
            half_w = int(rng.integers(spec.anomaly_size[0], spec.anomaly_size[1] + 1))
            kind = spec.shape
            if kind == "mixed":
                kind = "disk" if rng.random() < 0.5 else "rect"
            ci = int(rng.integers(size, n - size))
            cj = int(rng.integers(size, n - size))
            mask |= _shape_mask(n, kind, ci, cj, size, half_w)
        frac = mask.mean()
        lo_f, hi_f = _TARGET_FRACTION
        gap = max(lo_f - frac, frac - hi_f, 0.0)
        if gap < best_gap:
            best, best_gap = mask, gap
        if gap == 0.0 or hi_c == 0:
            break
    return best


def _anomaly_colour(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    base = _ANOMALY_COLOURS[int(rng.integers(len(_ANOMALY_COLOURS)))]
    return np.array([base[b % len(base)] for b in range(spec.bands)])


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[Sample], list[Sample]]:
    """Build ``(train, test)`` splits; output depends only on ``spec``.

    Training images are anomaly free. Test images carry disks/rectangles
    from a colour palette disjoint from the normal texture, labelled 1 on
    a class-0 background; placements are redrawn (bounded) to aim for an
    anomaly fraction of 5-30% per image.
    """
    spec.validate()
    root = np.random.SeedSequence([spec.seed, spec.family, spec.size, spec.bands])
    train_ss, test_ss = root.spawn(2)
    train = []
    for k, ss in enumerate(train_ss.spawn(spec.n_train)):
        rng = np.random.default_rng(ss)
        img = _normal_texture(spec, rng)
        train.append(Sample(f"train_{k:04d}", img, np.zeros(img.shape[:2], np.int64)))
    test = []
    for k, ss in enumerate(test_ss.spawn(spec.n_test)):
        rng = np.random.default_rng(ss)
        img = _normal_texture(spec, rng)
        labels = np.zeros(img.shape[:2], np.int64)
        if spec.anomaly_count[1] > 0:
            mask = _place_anomalies(spec, rng)
            colour = _anomaly_colour(spec, rng)
            jitter = rng.uniform(-0.03, 0.03, size=img.shape)
            img = np.where(mask[:, :, None], np.clip(colour + jitter, 0.0, 1.0), img)
            labels[mask] = 1
        test.append(Sample(f"test_{k:04d}", img, labels))
    return train, test
