"""Photometric and channel-level augmentations used to build negatives.

All ops take and return ``H x W x B`` arrays in ``[0, 1]`` and are
deterministic given their inputs and seed. ``seed`` may be an int, a
``numpy.random.SeedSequence`` or a ``numpy.random.Generator``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

OP_KINDS = ("gauss_noise", "channel_shuffle", "brightness", "contrast", "solarize")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_range(name, rng_, lo_bound=None, hi_bound=None):
    lo, hi = rng_
    if lo > hi:
        raise ContractError(f"{name}: inverted range [{lo}, {hi}]")
    if lo_bound is not None and lo < lo_bound:
        raise ContractError(f"{name}: lower bound {lo} below {lo_bound}")
    if hi_bound is not None and hi > hi_bound:
        raise ContractError(f"{name}: upper bound {hi} above {hi_bound}")
    return float(lo), float(hi)


def gauss_noise(img, sigma, seed=None):
    if sigma < 0:
        raise ContractError(f"gauss_noise: negative sigma {sigma}")
    img = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return img.copy()
    eps = _rng(seed).normal(0.0, sigma, size=img.shape)
    return np.clip(img + eps, 0.0, 1.0)


def channel_shuffle(img, seed=None, perm=None):
    """Permute bands; an identity draw is redrawn once, then accepted."""
    img = np.asarray(img, dtype=np.float64)
    bands = img.shape[2]
    if bands < 2:
        raise ContractError("channel_shuffle needs at least 2 bands")
    if perm is None:
        rng = _rng(seed)
        perm = rng.permutation(bands)
        if (perm == np.arange(bands)).all():
            perm = rng.permutation(bands)
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(bands)):
        raise ContractError(f"channel_shuffle: {perm.tolist()} is not a permutation")
    return img[:, :, perm].copy()


def random_brightness(img, delta_range=(-0.2, 0.2), seed=None):
    lo, hi = _check_range("brightness", delta_range, -1.0, 1.0)
    delta = lo if lo == hi else _rng(seed).uniform(lo, hi)
    return np.clip(np.asarray(img, dtype=np.float64) + delta, 0.0, 1.0)


def random_contrast(img, factor_range=(0.8, 1.2), seed=None):
    lo, hi = _check_range("contrast", factor_range, 0.0)
    f = lo if lo == hi else _rng(seed).uniform(lo, hi)
    img = np.asarray(img, dtype=np.float64)
    mean = img.mean()
    return np.clip(mean + f * (img - mean), 0.0, 1.0)


def solarize(img, threshold=0.5, seed=None):
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"solarize: threshold {threshold} outside [0, 1]")
    img = np.asarray(img, dtype=np.float64)
    return np.where(img < threshold, img, 1.0 - img)


@dataclass
class AugOp:
    """One step of a chain: op kind, its parameters, application probability."""

    kind: str
    params: dict = field(default_factory=dict)
    prob: float = 1.0

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ContractError(f"unknown augmentation {self.kind!r}; known: {OP_KINDS}")
        if not 0.0 <= self.prob <= 1.0:
            raise ContractError(f"{self.kind}: probability {self.prob} outside [0, 1]")
        for key, val in self.params.items():
            if isinstance(val, (tuple, list)) and len(val) == 2 and val[0] > val[1]:
                raise ContractError(f"{self.kind}.{key}: empty range {val}")

    def __call__(self, img, seed):
        rng = _rng(seed)
        p = self.params
        if self.kind == "gauss_noise":
            lo, hi = p.get("sigma", (0.02, 0.08))
            return gauss_noise(img, lo if lo == hi else rng.uniform(lo, hi), rng)
        if self.kind == "channel_shuffle":
            return channel_shuffle(img, rng)
        if self.kind == "brightness":
            return random_brightness(img, p.get("delta", (-0.2, 0.2)), rng)
        if self.kind == "contrast":
            return random_contrast(img, p.get("factor", (0.8, 1.2)), rng)
        lo, hi = p.get("threshold", (0.5, 0.5))
        return solarize(img, lo if lo == hi else rng.uniform(lo, hi))


@dataclass
class AugmentationChain:
    ops: list
    seed: int = 0

    def __post_init__(self):
        if not self.ops:
            raise ContractError("augmentation chain needs at least one op")


def default_chain(seed: int = 0) -> AugmentationChain:
    return AugmentationChain(
        [
            AugOp("gauss_noise", {"sigma": (0.02, 0.08)}, 0.5),
            AugOp("channel_shuffle", {}, 0.5),
            AugOp("brightness", {"delta": (-0.2, 0.2)}, 0.5),
            AugOp("contrast", {"factor": (0.8, 1.2)}, 0.5),
            AugOp("solarize", {"threshold": (0.5, 0.5)}, 0.5),
        ],
        seed,
    )


def apply_chain(img, chain: AugmentationChain, epoch: int = 0, index: int = 0):
    """Compose the chain's ops in listed order.

    Each op fires with its own probability; if none fires, one is picked
    uniformly so the output always differs in kind from the input. Op ``k``
    draws from the stream seeded by ``(chain.seed, k, epoch, index)``.
    """
    gate = np.random.default_rng([chain.seed, epoch, index, len(chain.ops)])
    fire = [gate.random() < op.prob for op in chain.ops]
    if not any(fire):
        fire[int(gate.integers(len(chain.ops)))] = True
    out = np.asarray(img, dtype=np.float64)
    for k, (op, on) in enumerate(zip(chain.ops, fire)):
        if on:
            out = op(out, np.random.default_rng([chain.seed, k, epoch, index]))
    return out
