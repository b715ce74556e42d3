import numpy as np
import pytest
import torch
from conftest import REL_TOL, finite_difference_check

from asd.encoder import (
    descriptor_head,
    encode_stack,
    forward_image,
    init_params,
    reconstruction_head,
)
from asd.errors import ContractError
from asd.pyramid import ScaleSet, pyramid_patches


def test_reference_geometry():
    net = init_params(0, 3, 15, 5, 3)
    assert net.encoders[0].fc.out_features == 5
    assert net.descriptor_head.in_features == 15
    assert net.reconstruction_head.out_features == 3


def test_init_deterministic():
    a = init_params(0, 3, 7, 3, 2)
    b = init_params(0, 3, 7, 3, 2)
    for (na, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert torch.equal(pa, pb), na
    c = init_params(1, 3, 7, 3, 2)
    assert not torch.equal(a.encoders[0].conv1.weight, c.encoders[0].conv1.weight)


def test_init_biases_zero_and_fan_in_bounds():
    net = init_params(0, 3, 7, 3, 2)
    for name, p in net.named_parameters():
        if name.endswith("bias"):
            assert (p == 0).all()
        else:
            bound = 1 / np.sqrt(np.prod(p.shape[1:]))
            assert p.abs().max() <= bound


def test_degenerate_shapes():
    net = init_params(0, 1, 5, 1, 1)
    assert tuple(net.descriptor_head.weight.shape) == (1, 1)


@pytest.mark.parametrize("args", [(0, 3, 4, 3, 1), (0, 3, 3, 3, 1), (0, 3, 7, 0, 1), (0, 0, 7, 3, 1)])
def test_invalid_dims(args):
    with pytest.raises(ContractError):
        init_params(*args)


def stack_for(seed, ss, bands=3):
    img = np.random.default_rng(seed).random((12, 12, bands))
    return pyramid_patches(img, (5, 6), ss)


def test_encode_zero_final_layer():
    ss = ScaleSet((0.5, 1.0, 2.0), 7)
    net = init_params(0, 3, 7, 5, 3)
    with torch.no_grad():
        for enc in net.encoders:
            enc.fc.weight.zero_()
    v = encode_stack(stack_for(1, ss), net)
    assert v.shape == (15,)
    assert (v == 0).all()


def test_encode_tied_weights_equal_segments():
    ss = ScaleSet((1.0, 1.0), 7)
    net = init_params(0, 3, 7, 4, 2)
    net.encoders[1].load_state_dict(net.encoders[0].state_dict())
    patch = stack_for(2, ScaleSet((1.0,), 7))[0]
    v = encode_stack([patch, patch], net)
    assert torch.equal(v[:4], v[4:])


def test_encode_finite_length():
    ss = ScaleSet((0.5, 1.0, 2.0), 7)
    v = encode_stack(stack_for(3, ss), init_params(0, 3, 7, 5, 3))
    assert v.shape == (15,) and torch.isfinite(v).all()


def test_encode_shape_mismatch():
    net = init_params(0, 3, 7, 5, 3)
    with pytest.raises(ContractError):
        encode_stack(stack_for(3, ScaleSet((0.5, 1.0), 7)), net)
    with pytest.raises(ContractError):
        encode_stack(stack_for(3, ScaleSet((0.5, 1.0, 2.0), 9)), net)


def test_heads_zero_and_pointwise():
    net = init_params(0, 3, 7, 2, 2)
    dc = torch.zeros(3, 4, 4, dtype=torch.float64)
    assert (descriptor_head(dc, net) == 0).all()
    assert reconstruction_head(dc, net).shape == (3, 4, 3)
    assert (reconstruction_head(dc, net) == 0).all()
    dc = torch.randn(2, 3, 4, dtype=torch.float64)
    dc[1, 2] = dc[0, 0]
    d = descriptor_head(dc, net)
    assert torch.equal(d[1, 2], d[0, 0])
    r = reconstruction_head(dc, net)
    assert torch.equal(r[1, 2], r[0, 0])


def test_identity_head():
    net = init_params(0, 3, 7, 3, 1)
    with torch.no_grad():
        net.descriptor_head.weight.copy_(torch.eye(3))
        net.descriptor_head.bias.zero_()
    dc = torch.randn(4, 4, 3, dtype=torch.float64)
    assert torch.equal(descriptor_head(dc, net), dc)


def test_head_width_mismatch():
    net = init_params(0, 3, 7, 3, 2)
    with pytest.raises(ContractError):
        descriptor_head(torch.zeros(2, 2, 5, dtype=torch.float64), net)
    with pytest.raises(ContractError):
        reconstruction_head(torch.zeros(2, 2, 7, dtype=torch.float64), net)


def test_heads_commute_with_pixel_permutation():
    net = init_params(0, 3, 7, 3, 2)
    dc = torch.randn(5, 4, 6, dtype=torch.float64)
    perm = torch.randperm(20, generator=torch.Generator().manual_seed(0))
    flat = dc.reshape(20, 6)
    a = descriptor_head(flat[perm].reshape(5, 4, 6), net).reshape(20, 3)
    b = descriptor_head(dc, net).reshape(20, 3)[perm]
    assert torch.equal(a, b)


def test_forward_constant_image():
    ss = ScaleSet((0.5, 1.0, 2.0), 7)
    net = init_params(0, 3, 7, 5, 3)
    with torch.no_grad():
        d, _, _ = forward_image(np.full((10, 10, 3), 0.3), ss, net)
    flat = d.reshape(-1, 5)
    assert torch.allclose(flat, flat[0].expand_as(flat), atol=1e-12)


def test_forward_reference_shapes():
    ss = ScaleSet((0.5, 1.0, 2.0), 15)
    net = init_params(0, 3, 15, 5, 3)
    img = np.random.default_rng(0).random((32, 32, 3))
    with torch.no_grad():
        d, dc, xr = forward_image(img, ss, net)
    assert tuple(d.shape) == (32, 32, 5)
    assert tuple(dc.shape) == (32, 32, 15)
    assert tuple(xr.shape) == (32, 32, 3)


def test_forward_matches_per_pixel_path():
    ss = ScaleSet((0.5, 1.0, 2.0), 7)
    net = init_params(0, 3, 7, 3, 3)
    img = np.random.default_rng(4).random((6, 5, 3))
    with torch.no_grad():
        d, dc, _ = forward_image(img, ss, net)
        for i in range(6):
            for j in range(5):
                v = encode_stack(pyramid_patches(img, (i, j), ss), net)
                assert torch.allclose(dc[i, j], v, atol=1e-12)
                assert torch.allclose(d[i, j], descriptor_head(v, net), atol=1e-12)


def test_forward_chunked_equals_full():
    ss = ScaleSet((0.5, 1.0), 7)
    net = init_params(0, 3, 7, 3, 2)
    img = np.random.default_rng(5).random((9, 9, 3))
    with torch.no_grad():
        a = forward_image(img, ss, net)[0]
        b = forward_image(img, ss, net, chunk=10)[0]
    assert torch.allclose(a, b, atol=1e-12)


def test_forward_cyclic_shift_preserves_interior_descriptors():
    # Shifting by the full width is the identity, so descriptor multisets
    # agree exactly; a half-width roll agrees away from the padded ring.
    ss = ScaleSet((1.0,), 5)
    net = init_params(0, 3, 5, 3, 1)
    img = np.random.default_rng(6).random((10, 12, 3))
    with torch.no_grad():
        a = forward_image(img, ss, net)[0].numpy()
        b = forward_image(np.roll(img, 12, axis=1), ss, net)[0].numpy()
        c = forward_image(np.roll(img, 6, axis=1), ss, net)[0].numpy()
    np.testing.assert_array_equal(np.sort(a.reshape(-1, 3), axis=0), np.sort(b.reshape(-1, 3), axis=0))
    np.testing.assert_allclose(c[2:-2, 8:10], a[2:-2, 2:4], atol=1e-12)


def test_trunk_evaluated_once(monkeypatch):
    ss = ScaleSet((0.5, 1.0), 7)
    net = init_params(0, 3, 7, 3, 2)
    calls = []
    orig = net.trunk

    def counting(stacks):
        out = orig(stacks)
        calls.append(out)
        return out

    monkeypatch.setattr(net, "trunk", counting)
    seen = {}
    net.descriptor_head.register_forward_hook(lambda m, i, o: seen.setdefault("d", i[0]))
    net.reconstruction_head.register_forward_hook(lambda m, i, o: seen.setdefault("r", i[0]))
    forward_image(np.random.default_rng(0).random((6, 6, 3)), ss, net)
    assert len(calls) == 1
    assert seen["d"] is seen["r"]


def test_forward_deterministic():
    ss = ScaleSet((0.5, 1.0), 7)
    net = init_params(0, 3, 7, 3, 2, torch.float32)
    img = np.random.default_rng(0).random((8, 8, 3))
    with torch.no_grad():
        a = forward_image(img, ss, net)[0]
        b = forward_image(img, ss, net)[0]
    assert torch.equal(a, b)


def test_forward_band_mismatch():
    with pytest.raises(ContractError):
        forward_image(np.zeros((4, 4, 2)), ScaleSet((1.0,), 5), init_params(0, 3, 5, 3, 1))


@pytest.mark.parametrize("head", ["descriptor", "reconstruction"])
def test_head_gradients_match_finite_differences(tiny_setup, head):
    s = tiny_setup

    def loss():
        d, _, xr = forward_image(s["img"], s["scale_set"], s["net"])
        out = d if head == "descriptor" else xr
        return (out ** 2).sum() + out.sum()

    rows = finite_difference_check(s["net"], loss, n_coords=30, seed=1)
    worst = max(r[-1] for r in rows)
    assert worst < REL_TOL, rows
