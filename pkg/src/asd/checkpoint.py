"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    b"ASDCKPT\\0"            magic
    u32                      format version
    u64 + bytes              header: UTF-8 ``key = value`` lines
    u32                      array count
    per array:
        u16 + bytes          name (UTF-8)
        u8                   ndim
        u64 * ndim           shape
        f64 * prod(shape)    values, row-major

The header carries the training-config echo and network geometry; every
numeric quantity lives in the array section so reals survive bit-exactly.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig, parse_text
from .encoder import PARAMS_VERSION, DescriptorNet
from .errors import ContractError, DataIOError
from .scoring import GaussianModel

MAGIC = b"ASDCKPT\0"
FORMAT_VERSION = 1
HISTORY_COLUMNS = ("l1", "l2", "l3", "total", "radius")


@dataclass
class HypersphereState:
    center: np.ndarray
    radius: float
    lam: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.radius < 0 or not self.lam > 0:
            raise ContractError("radius must be >= 0 and lambda > 0")
        if not np.isfinite(self.center).all():
            raise ContractError("hypersphere center must be finite")


@dataclass
class Checkpoint:
    net: DescriptorNet
    config: TrainConfig
    sphere: HypersphereState | None = None
    gaussian: GaussianModel | None = None
    history: list = field(default_factory=list)

    def to_bytes(self) -> bytes:
        return dumps(self)

    def save(self, path) -> None:
        path = Path(path)
        data = dumps(self)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        try:
            tmp.write_bytes(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise DataIOError(f"cannot write checkpoint {path}: {exc}") from exc


def _history_array(history) -> np.ndarray:
    rows = [
        [np.nan if h.get(c) is None else float(h[c]) for c in HISTORY_COLUMNS]
        for h in history
    ]
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(HISTORY_COLUMNS))


def _history_list(arr) -> list:
    out = []
    for k, row in enumerate(arr):
        entry = {"epoch": k + 1}
        for c, v in zip(HISTORY_COLUMNS, row):
            entry[c] = None if np.isnan(v) else float(v)
        out.append(entry)
    return out


def dumps(ckpt: Checkpoint) -> bytes:
    net = ckpt.net
    header = {
        "params_version": str(net.version),
        **{f"net.{k}": str(v) for k, v in net.dims.items()},
        "has_sphere": str(int(ckpt.sphere is not None)),
        "has_gaussian": str(int(ckpt.gaussian is not None)),
        **{f"config.{k}": v for k, v in ckpt.config.echo().items()},
    }
    arrays = [(f"net.{k}", v.detach().double().numpy()) for k, v in net.state_dict().items()]
    if ckpt.sphere is not None:
        arrays.append(("sphere.center", ckpt.sphere.center))
        arrays.append(("sphere.radius_lambda", np.array([ckpt.sphere.radius, ckpt.sphere.lam])))
    if ckpt.gaussian is not None:
        g = ckpt.gaussian
        arrays.append(("gaussian.mean", g.mean))
        arrays.append(("gaussian.cov", g.cov))
        arrays.append(("gaussian.tau_count", np.array([g.tau, float(g.n_samples)])))
    arrays.append(("history", _history_array(ckpt.history)))

    text = "".join(f"{k} = {v}\n" for k, v in header.items()).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(text)), text,
             struct.pack("<I", len(arrays))]
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContractError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf: bytes) -> Checkpoint:
    rd = _Reader(buf)
    if rd.take(len(MAGIC)) != MAGIC:
        raise ContractError("not a checkpoint file (bad magic)")
    (version,) = rd.unpack("<I")
    if version != FORMAT_VERSION:
        raise ContractError(f"checkpoint format {version}, this build reads {FORMAT_VERSION}")
    (hlen,) = rd.unpack("<Q")
    header = parse_text(rd.take(hlen).decode("utf-8"), "<checkpoint header>")
    (count,) = rd.unpack("<I")
    arrays = {}
    for _ in range(count):
        (nlen,) = rd.unpack("<H")
        name = rd.take(nlen).decode("utf-8")
        (ndim,) = rd.unpack("<B")
        shape = rd.unpack(f"<{ndim}Q") if ndim else ()
        n = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(rd.take(8 * n), dtype="<f8").reshape(shape).copy()
    if rd.pos != len(buf):
        raise ContractError("trailing bytes after checkpoint arrays")
    if int(header["params_version"]) != PARAMS_VERSION:
        raise ContractError(f"unsupported parameter version {header['params_version']}")

    config = TrainConfig.from_echo(
        {k[len("config."):]: v for k, v in header.items() if k.startswith("config.")}
    )
    dims = {k: int(header[f"net.{k}"]) for k in ("bands", "patch", "length", "m")}
    dtype = torch.float64 if config.dtype == "float64" else torch.float32
    net = DescriptorNet(**dims).to(dtype)
    state = {}
    for key, ref in net.state_dict().items():
        arr = arrays.get(f"net.{key}")
        if arr is None or arr.shape != tuple(ref.shape):
            raise ContractError(f"checkpoint array net.{key} missing or mis-shaped")
        state[key] = torch.from_numpy(arr).to(dtype)
    net.load_state_dict(state)

    sphere = None
    if header.get("has_sphere") == "1":
        r, lam = arrays["sphere.radius_lambda"]
        sphere = HypersphereState(arrays["sphere.center"], float(r), float(lam))
    gaussian = None
    if header.get("has_gaussian") == "1":
        tau, n = arrays["gaussian.tau_count"]
        gaussian = GaussianModel(arrays["gaussian.mean"], arrays["gaussian.cov"], float(tau), int(n))
    return Checkpoint(net, config, sphere, gaussian, _history_list(arrays["history"]))


def load(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"missing checkpoint {path}")
    return loads(path.read_bytes())
