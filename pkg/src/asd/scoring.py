"""Gaussian density over normal descriptors and per-pixel anomaly maps."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import kernels
from .errors import ContractError, DataIOError

SIDECAR_MAGIC = b"ASDM"
# Used when every descriptor is identical and the trace-scaled ridge vanishes.
TAU_FLOOR = 1e-12


@dataclass
class GaussianModel:
    mean: np.ndarray
    cov: np.ndarray
    tau: float
    n_samples: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ContractError(f"covariance shape {self.cov.shape} does not match mean length {n}")
        reg = self.cov + self.tau * np.eye(n)
        try:
            chol = np.linalg.cholesky(reg)
        except np.linalg.LinAlgError as exc:
            raise ContractError("regularised covariance is not positive definite") from exc
        inv_chol = np.linalg.solve(chol, np.eye(n))
        self.inv = inv_chol.T @ inv_chol

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(descriptors, tau: float | None = None) -> GaussianModel:
    """Sample mean and unbiased covariance of ``N x L`` descriptors.

    ``descriptors`` may also be an iterable of ``N_i x L`` blocks. The
    default ridge is ``1e-5 * trace(cov) / L``.
    """
    if not isinstance(descriptors, np.ndarray):
        descriptors = np.concatenate([np.asarray(b, dtype=np.float64) for b in descriptors])
    x = np.asarray(descriptors, dtype=np.float64)
    n, dim = x.shape
    if n < dim + 1:
        raise ContractError(f"need at least {dim + 1} descriptors to fit, got {n}")
    if not np.isfinite(x).all():
        raise ContractError("non-finite descriptor values")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (n - 1)
    cov = 0.5 * (cov + cov.T)
    if tau is None:
        tau = max(1e-5 * np.trace(cov) / dim, TAU_FLOOR)
    return GaussianModel(mean, cov, float(tau), n)


def mahalanobis(x_t, model: GaussianModel) -> float:
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (model.dim,):
        raise ContractError(f"vector of shape {x_t.shape}, model dimension {model.dim}")
    return float(kernels.mahalanobis_batch(x_t[None], model.mean, model.inv)[0])


def mahalanobis_many(x, model: GaussianModel) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ContractError(f"descriptors of shape {x.shape}, model dimension {model.dim}")
    return kernels.mahalanobis_batch(x, model.mean, model.inv)


@dataclass
class AnomalyMap:
    """Normalised ``scores`` in [0, 1] and the raw float32 ``degrees``."""

    scores: np.ndarray
    degrees: np.ndarray


def normalise(degrees: np.ndarray) -> np.ndarray:
    """Per-image min-max scaling; a constant map becomes all zeros."""
    d = np.asarray(degrees, dtype=np.float64)
    lo, hi = d.min(), d.max()
    if hi == lo:
        return np.zeros_like(d)
    return (d - lo) / (hi - lo)


def degrees_to_map(degrees: np.ndarray) -> AnomalyMap:
    # Degrees are held at sidecar precision so disk and memory agree exactly.
    deg = np.asarray(degrees, dtype=np.float32)
    return AnomalyMap(normalise(deg), deg)


def score_image(img, checkpoint, chunk: int = 4096) -> AnomalyMap:
    """Anomaly map for one image; the reconstruction head is not evaluated."""
    from .encoder import forward_image

    if checkpoint.gaussian is None or checkpoint.net is None:
        raise ContractError("checkpoint has no fitted Gaussian model")
    with torch.no_grad():
        d, _, _ = forward_image(
            img, checkpoint.config.scale_set, checkpoint.net, reconstruct=False, chunk=chunk
        )
    h, w, length = d.shape
    flat = d.reshape(-1, length).double().numpy()
    return degrees_to_map(mahalanobis_many(flat, checkpoint.gaussian).reshape(h, w))


def sidecar_bytes(degrees: np.ndarray) -> bytes:
    deg = np.asarray(degrees)
    if deg.ndim != 2:
        raise ContractError("degree grid must be 2-D")
    h, w = deg.shape
    return SIDECAR_MAGIC + struct.pack("<II", h, w) + deg.astype("<f4").tobytes()


def parse_sidecar(buf: bytes) -> np.ndarray:
    if buf[:4] != SIDECAR_MAGIC:
        raise ContractError("not an anomaly-map sidecar (bad magic)")
    h, w = struct.unpack("<II", buf[4:12])
    body = buf[12:]
    if len(body) != 4 * h * w:
        raise ContractError(f"sidecar body holds {len(body)} bytes, expected {4 * h * w}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float32)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def write_sidecar(path, degrees) -> None:
    _atomic_write(Path(path), sidecar_bytes(degrees))


def read_sidecar(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"missing sidecar {path}")
    return parse_sidecar(path.read_bytes())


def write_map(out_dir, name: str, amap: AnomalyMap) -> tuple[Path, Path]:
    """Write ``NAME.png`` (8-bit scores) and ``NAME.asdm`` (raw degrees)."""
    from .data import write_image

    out_dir = Path(out_dir)
    png, raw = out_dir / f"{name}.png", out_dir / f"{name}.asdm"
    write_image(png, amap.scores)
    write_sidecar(raw, amap.degrees)
    return png, raw
