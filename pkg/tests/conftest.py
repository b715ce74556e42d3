import numpy as np
import pytest
import torch

from asd.augment import apply_chain, default_chain
from asd.checkpoint import HypersphereState
from asd.encoder import forward_image, init_params
from asd.pyramid import ScaleSet

FD_STEP = 1e-5
REL_TOL = 1e-4


def relative_error(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric))
    if scale == 0.0:
        return 0.0
    return abs(analytic - numeric) / scale


def finite_difference_check(net, loss_fn, n_coords=50, seed=0, step=FD_STEP):
    """Compare autograd against central differences on random coordinates.

    Returns a list of ``(name, index, analytic, numeric, rel_err)``.
    """
    params = list(net.named_parameters())
    net.zero_grad()
    loss_fn().backward()
    # Parameters outside the loss graph have no grad; their derivative is zero.
    grads = {n: torch.zeros_like(p) if p.grad is None else p.grad.detach().clone() for n, p in params}
    sizes = np.array([p.numel() for _, p in params])
    rng = np.random.default_rng(seed)
    flat = rng.choice(int(sizes.sum()), size=n_coords, replace=False)
    offsets = np.r_[0, np.cumsum(sizes)]
    out = []
    with torch.no_grad():
        for g in flat:
            k = int(np.searchsorted(offsets, g, side="right") - 1)
            name, p = params[k]
            idx = int(g - offsets[k])
            view = p.view(-1)
            orig = view[idx].item()
            view[idx] = orig + step
            up = loss_fn().item()
            view[idx] = orig - step
            down = loss_fn().item()
            view[idx] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].view(-1)[idx].item()
            out.append((name, idx, analytic, numeric, relative_error(analytic, numeric)))
    return out


@pytest.fixture
def tiny_setup():
    """Tiny float64 model on one 8x8x3 image (P=7, L=3, m=2)."""
    rng = np.random.default_rng(42)
    img = rng.random((8, 8, 3))
    scale_set = ScaleSet((0.5, 1.0), 7)
    net = init_params(3, 3, 7, 3, 2, torch.float64)
    # Non-zero biases so bias gradients are exercised away from zero.
    with torch.no_grad():
        for name, p in net.named_parameters():
            if name.endswith("bias"):
                p.copy_(torch.from_numpy(rng.uniform(-0.1, 0.1, size=p.shape)))
    neg = apply_chain(img, default_chain(seed=1), epoch=0, index=0)
    mask = np.ones((8, 8), bool)
    mask[0, :3] = False
    with torch.no_grad():
        d0, _, _ = forward_image(img, scale_set, net)
    f = d0.numpy()[mask]
    center = f.mean(axis=0)
    dist = np.sqrt(((f - center) ** 2).sum(axis=1))
    # Radius halfway between two neighbouring distances: no pixel sits on the hinge kink.
    srt = np.sort(dist)
    k = len(srt) // 2
    sphere = HypersphereState(center, float(0.5 * (srt[k - 1] + srt[k])), 10.0)
    return dict(img=img, neg=neg, mask=mask, net=net, scale_set=scale_set, sphere=sphere)


ACCEPTANCE_LINES = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
