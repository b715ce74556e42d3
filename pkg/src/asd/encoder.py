"""Pixel-descriptor network: per-scale patch encoders plus two 1x1 heads.

Each scale has its own small conv encoder mapping a ``P x P x B`` patch to
a length-``L`` vector. The ``m`` vectors are concatenated into a width
``m*L`` trunk shared by a descriptor head (``m*L -> L``) and a
reconstruction head (``m*L -> B``). A 1x1 convolution over a cube is the
same per-pixel affine map, so the heads are plain ``nn.Linear`` layers.
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ContractError
from .pyramid import ScaleSet, dense_pyramid

PARAMS_VERSION = 1
_WIDTHS = (16, 32, 64)


def _pad(x: torch.Tensor) -> torch.Tensor:
    # Reflection needs at least 2 samples per axis; a single sample
    # reflects onto itself, which is what replicate does.
    mode = "reflect" if min(x.shape[-2:]) > 1 else "replicate"
    return F.pad(x, (1, 1, 1, 1), mode=mode)


class ScaleEncoder(nn.Module):
    def __init__(self, bands: int, length: int):
        super().__init__()
        c1, c2, c3 = _WIDTHS
        self.conv1 = nn.Conv2d(bands, c1, 3)
        self.conv2 = nn.Conv2d(c1, c2, 3)
        self.conv3 = nn.Conv2d(c2, c3, 3)
        self.fc = nn.Linear(c3, length)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """``x`` is ``N x B x P x P``; returns ``N x L``."""
        x = F.max_pool2d(torch.tanh(self.conv1(_pad(x))), 2)
        x = F.max_pool2d(torch.tanh(self.conv2(_pad(x))), 2)
        x = torch.tanh(self.conv3(_pad(x)))
        return self.fc(x.mean(dim=(2, 3)))


class DescriptorNet(nn.Module):
    def __init__(self, bands: int, patch: int, length: int, m: int):
        super().__init__()
        self.bands, self.patch, self.length, self.m = bands, patch, length, m
        self.version = PARAMS_VERSION
        self.encoders = nn.ModuleList(ScaleEncoder(bands, length) for _ in range(m))
        self.descriptor_head = nn.Linear(m * length, length)
        self.reconstruction_head = nn.Linear(m * length, bands)

    @property
    def dims(self) -> dict:
        return {"bands": self.bands, "patch": self.patch, "length": self.length, "m": self.m}

    def trunk(self, stacks) -> torch.Tensor:
        """Concatenated per-scale descriptors, ``N x (m*L)``."""
        if len(stacks) != self.m:
            raise ContractError(f"expected {self.m} scales, got {len(stacks)}")
        parts = []
        for enc, x in zip(self.encoders, stacks):
            if tuple(x.shape[1:]) != (self.bands, self.patch, self.patch):
                raise ContractError(
                    f"patch batch shape {tuple(x.shape[1:])} does not match "
                    f"({self.bands}, {self.patch}, {self.patch})"
                )
            parts.append(enc(x))
        return torch.cat(parts, dim=1)


def init_params(seed: int, bands: int, patch: int, length: int, m: int,
                dtype=torch.float64) -> DescriptorNet:
    """Build a network with fan-in scaled uniform weights and zero biases.

    Weights come from a numpy generator so they do not depend on torch's
    global RNG state.
    """
    if patch < 5 or patch % 2 == 0:
        raise ContractError(f"patch side must be odd and >= 5, got {patch}")
    if min(bands, length, m) < 1:
        raise ContractError("bands, descriptor length and scale count must be >= 1")
    net = DescriptorNet(bands, patch, length, m).to(dtype)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, p in net.named_parameters():
            if name.endswith("bias"):
                p.zero_()
                continue
            fan_in = int(np.prod(p.shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            vals = rng.uniform(-bound, bound, size=tuple(p.shape))
            p.copy_(torch.from_numpy(vals).to(dtype))
    return net


def _as_batch(patches, dtype) -> torch.Tensor:
    """``N x P x P x B`` numpy -> ``N x B x P x P`` tensor."""
    t = torch.as_tensor(np.ascontiguousarray(patches), dtype=dtype)
    return t.permute(0, 3, 1, 2).contiguous()


def _dtype(net: DescriptorNet):
    return net.descriptor_head.weight.dtype


def encode_stack(stack, net: DescriptorNet) -> torch.Tensor:
    """Encode one pixel's ``m`` patches into its length ``m*L`` trunk vector."""
    batch = [_as_batch(np.asarray(p)[None], _dtype(net)) for p in stack]
    return net.trunk(batch)[0]


def _check_width(dc: torch.Tensor, net: DescriptorNet):
    if dc.shape[-1] != net.m * net.length:
        raise ContractError(
            f"trunk width {dc.shape[-1]} does not match m*L = {net.m * net.length}"
        )


def descriptor_head(dc: torch.Tensor, net: DescriptorNet) -> torch.Tensor:
    _check_width(dc, net)
    return net.descriptor_head(dc)


def reconstruction_head(dc: torch.Tensor, net: DescriptorNet) -> torch.Tensor:
    # Raw output: the reconstruction loss must see unclamped values.
    _check_width(dc, net)
    return net.reconstruction_head(dc)


def stacks_for_image(img, scale_set: ScaleSet, dtype) -> list[torch.Tensor]:
    return [_as_batch(p, dtype) for p in dense_pyramid(img, scale_set)]


def forward_image(img, scale_set: ScaleSet, net: DescriptorNet, stacks=None,
                  reconstruct: bool = True, chunk: int | None = None):
    """Run the network over every pixel of ``img``.

    Returns ``(D, Dc, Xr)`` shaped ``H x W x L``, ``H x W x mL`` and
    ``H x W x B``; ``Xr`` is ``None`` when ``reconstruct`` is false. The
    trunk is evaluated once and both heads read the same tensor.
    ``chunk`` bounds the number of pixels pushed through the encoders at
    a time, which keeps memory flat on large images.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if img.shape[2] != net.bands:
        raise ContractError(f"image has {img.shape[2]} bands, network expects {net.bands}")
    if scale_set.m != net.m or scale_set.patch != net.patch:
        raise ContractError("scale set does not match network geometry")
    if stacks is None:
        stacks = stacks_for_image(img, scale_set, _dtype(net))
    n = h * w
    if chunk is None or chunk >= n:
        dc = net.trunk(stacks)
    else:
        dc = torch.cat(
            [net.trunk([s[a:a + chunk] for s in stacks]) for a in range(0, n, chunk)]
        )
    dc = dc.reshape(h, w, -1)
    d = descriptor_head(dc, net)
    xr = reconstruction_head(dc, net) if reconstruct else None
    return d, dc, xr
