"""Descriptor losses and the training loop.

Three objectives shape the descriptors: a hypersphere (compactness) loss,
an inverse-difference (diversity) loss against augmented negatives, and a
pixel reconstruction loss from the shared trunk. Center and radius of the
hypersphere are buffers refreshed once per epoch, never trained.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
import torch

from .augment import apply_chain
from .checkpoint import Checkpoint, HypersphereState
from .config import LOSS_NAMES, TrainConfig
from .data import Sample, make_normal_mask
from .encoder import forward_image, init_params, stacks_for_image
from .errors import ContractError, TrainingError
from .scoring import fit_gaussian

log = logging.getLogger(__name__)

DIVERSE_EPS = 1e-6
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def _mask_tensor(mask, like: torch.Tensor) -> torch.Tensor:
    m = torch.as_tensor(np.asarray(mask, dtype=bool))
    if tuple(m.shape) != tuple(like.shape[:2]):
        raise ContractError(f"mask shape {tuple(m.shape)} != grid shape {tuple(like.shape[:2])}")
    if not bool(m.any()):
        raise ContractError("empty normal mask")
    return m


def loss_compact(d: torch.Tensor, sphere: HypersphereState, mask) -> torch.Tensor:
    """``R^2 + lam * mean(max(|F - C|^2 - R^2, 0))`` over masked pixels."""
    m = _mask_tensor(mask, d)
    f = d[m]
    c = torch.as_tensor(sphere.center, dtype=d.dtype)
    r2 = float(sphere.radius) ** 2
    dist2 = ((f - c) ** 2).sum(dim=1)
    return r2 + sphere.lam * torch.clamp(dist2 - r2, min=0.0).mean()


def loss_diverse(d: torch.Tensor, dt: torch.Tensor, mask) -> torch.Tensor:
    if d.shape != dt.shape:
        raise ContractError(f"descriptor cubes differ in shape: {tuple(d.shape)} vs {tuple(dt.shape)}")
    m = _mask_tensor(mask, d)
    diff2 = ((d - dt) ** 2).sum(dim=-1)[m]
    return 1.0 / (diff2.mean() + DIVERSE_EPS)


def loss_reconstruct(x, xr: torch.Tensor, mask) -> torch.Tensor:
    x = torch.as_tensor(np.asarray(x), dtype=xr.dtype)
    if x.shape != xr.shape:
        raise ContractError(f"image shape {tuple(x.shape)} != reconstruction shape {tuple(xr.shape)}")
    m = _mask_tensor(mask, x)
    return ((x - xr) ** 2).sum(dim=-1)[m].mean()


def loss_total(l1, l2, l3, flags=LOSS_NAMES):
    """Unweighted sum of the enabled terms (``flags`` names them)."""
    terms = {"l1": l1, "l2": l2, "l3": l3}
    picked = [terms[k] for k in LOSS_NAMES if k in flags]
    if not picked or any(t is None for t in picked):
        raise ContractError(f"enabled losses {tuple(flags)} not all supplied")
    total = picked[0]
    for t in picked[1:]:
        total = total + t
    return total


def update_center_radius(descriptors, lam: float) -> HypersphereState:
    """Center = mean descriptor, radius = largest distance to it."""
    if isinstance(descriptors, np.ndarray):
        blocks = [descriptors]
    else:
        blocks = [np.asarray(b, dtype=np.float64) for b in descriptors]
    if not blocks or sum(len(b) for b in blocks) == 0:
        raise ContractError("no descriptors to place the hypersphere around")
    x = np.concatenate(blocks).astype(np.float64)
    center = x.mean(axis=0)
    radius = float(np.sqrt(((x - center) ** 2).sum(axis=1)).max())
    return HypersphereState(center, radius, lam)


@dataclass
class _Prepared:
    sample: Sample
    mask: np.ndarray


def _torch_dtype(cfg: TrainConfig):
    return torch.float64 if cfg.dtype == "float64" else torch.float32


def collect_descriptors(net, cfg: TrainConfig, items) -> list[np.ndarray]:
    """Masked descriptors of every training image under the current weights."""
    out = []
    with torch.no_grad():
        for it in items:
            d, _, _ = forward_image(it.sample.image, cfg.scale_set, net, reconstruct=False,
                                    chunk=4096)
            out.append(d.double().numpy()[it.mask])
    return out


def _fmt(v):
    return "-" if v is None else f"{v:.6g}"


def format_history_line(entry: dict) -> str:
    return (
        f"epoch={entry['epoch']} l1={_fmt(entry.get('l1'))} l2={_fmt(entry.get('l2'))} "
        f"l3={_fmt(entry.get('l3'))} total={_fmt(entry.get('total'))} "
        f"R={_fmt(entry.get('radius'))} seconds={entry.get('seconds', 0.0):.3f}"
    )


def train(dataset, cfg: TrainConfig, normal_class: int = 0, on_epoch=None) -> Checkpoint:
    """Optimise a fresh network on ``dataset`` and fit the Gaussian model.

    ``dataset`` is a sequence of :class:`~asd.data.Sample`. Warmup epochs
    optimise only the reconstruction term (if enabled); the hypersphere
    center is placed at the end of warmup with radius ``cfg.r_init`` and
    both are refreshed after every later epoch. ``on_epoch`` receives each
    history entry (including wall time) as it is produced.
    """
    cfg.validate()
    items = [_Prepared(s, make_normal_mask(s.labels, normal_class)) for s in dataset]
    if not items:
        raise ContractError("empty training dataset")
    bands = items[0].sample.image.shape[2]
    if any(it.sample.image.shape[2] != bands for it in items):
        raise ContractError("training images disagree on band count")

    dtype = _torch_dtype(cfg)
    scale_set = cfg.scale_set
    chain = cfg.chain()
    flags = set(cfg.losses)
    net = init_params(cfg.seed, bands, cfg.patch, cfg.length, scale_set.m, dtype)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr, betas=ADAM_BETAS, eps=ADAM_EPS,
                           weight_decay=0.0)

    sphere = None
    if cfg.warmup == 0:
        center = update_center_radius(collect_descriptors(net, cfg, items), cfg.lam).center
        sphere = HypersphereState(center, cfg.r_init, cfg.lam)

    history = []
    descriptors = None
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        warm = epoch < cfg.warmup
        active = flags & {"l3"} if warm else flags
        sums = {k: 0.0 for k in ("l1", "l2", "l3", "total")}
        for idx, it in enumerate(items):
            if not active:
                break
            img = it.sample.image
            need_recon = "l3" in active
            d, _, xr = forward_image(img, scale_set, net,
                                     stacks=stacks_for_image(img, scale_set, dtype),
                                     reconstruct=need_recon)
            terms = {"l1": None, "l2": None, "l3": None}
            if need_recon:
                terms["l3"] = loss_reconstruct(img, xr, it.mask)
            if "l1" in active:
                terms["l1"] = loss_compact(d, sphere, it.mask)
            if "l2" in active:
                neg = apply_chain(img, chain, epoch=epoch, index=idx)
                dt, _, _ = forward_image(neg, scale_set, net, reconstruct=False)
                terms["l2"] = loss_diverse(d, dt, it.mask)
            total = loss_total(terms["l1"], terms["l2"], terms["l3"], active)
            value = float(total.detach())
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, image {idx} ({it.sample.name})"
                )
            opt.zero_grad(set_to_none=True)
            total.backward()
            opt.step()
            for k, t in terms.items():
                if t is not None:
                    sums[k] += float(t.detach())
            sums["total"] += value

        descriptors = collect_descriptors(net, cfg, items)
        if epoch == cfg.warmup - 1:
            center = update_center_radius(descriptors, cfg.lam).center
            sphere = HypersphereState(center, cfg.r_init, cfg.lam)
        elif epoch >= cfg.warmup:
            sphere = update_center_radius(descriptors, cfg.lam)

        n = len(items)
        entry = {"epoch": epoch + 1}
        for k in ("l1", "l2", "l3"):
            entry[k] = sums[k] / n if k in active else None
        entry["total"] = sums["total"] / n if active else None
        entry["radius"] = sphere.radius if sphere is not None else None
        history.append(entry)
        entry = dict(entry, seconds=time.perf_counter() - t0)
        log.info(format_history_line(entry))
        if on_epoch is not None:
            on_epoch(entry)

    tau = None if cfg.tau < 0 else cfg.tau
    gaussian = fit_gaussian(descriptors, tau)
    return Checkpoint(net, cfg, sphere, gaussian, history)
