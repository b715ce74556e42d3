import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asd.errors import ContractError
from asd.pyramid import ScaleSet, dense_pyramid, extract_patch, pyramid_patches, resize


def test_resize_identity():
    img = np.random.default_rng(0).random((7, 5, 3))
    np.testing.assert_array_equal(resize(img, 1.0), img)


@pytest.mark.parametrize("scale", [0.3, 0.5, 1.7, 2.0])
def test_resize_constant(scale):
    out = resize(np.full((6, 6, 2), 0.4), scale)
    np.testing.assert_allclose(out, 0.4, atol=1e-15)


def test_resize_half_matches_block_mean():
    img = np.arange(16, dtype=float).reshape(4, 4, 1) / 16
    out = resize(img, 0.5)
    assert out.shape == (2, 2, 1)
    # Half-pixel alignment at ratio 2 samples the centre of each 2x2 block.
    ref = img.reshape(2, 2, 2, 2, 1).mean(axis=(1, 3))
    np.testing.assert_allclose(out, ref, atol=1e-15)


def test_resize_output_dims():
    assert resize(np.zeros((5, 9, 1)), 0.5).shape == (3, 5, 1)
    assert resize(np.zeros((32, 32, 3)), 2.0).shape == (64, 64, 3)


def test_resize_to_empty():
    with pytest.raises(ContractError):
        resize(np.zeros((2, 2, 1)), 0.1)
    with pytest.raises(ContractError):
        resize(np.zeros((2, 2, 1)), 0.0)


def test_patch_constant():
    p = extract_patch(np.full((10, 10, 3), 0.7), (0, 9), 1.0, 5)
    assert p.shape == (5, 5, 3)
    assert (p == 0.7).all()


def test_patch_corner_reflection():
    img = np.random.default_rng(1).random((20, 20, 3))
    p = extract_patch(img, (0, 0), 1.0, 15)
    ref = np.pad(img, ((7, 7), (7, 7), (0, 0)), mode="reflect")[:15, :15]
    np.testing.assert_array_equal(p, ref)
    assert np.isfinite(p).all()


def test_patch_interior_plain_crop():
    img = np.random.default_rng(2).random((20, 20, 2))
    np.testing.assert_array_equal(extract_patch(img, (10, 9), 1.0, 7), img[7:14, 6:13])


def test_patch_center_mapping_at_scale():
    img = np.random.default_rng(3).random((16, 16, 1))
    scaled = resize(img, 2.0)
    p = extract_patch(scaled, (5, 6), 2.0, 3)
    np.testing.assert_array_equal(p, scaled[9:12, 11:14])


def test_pyramid_single_scale():
    img = np.random.default_rng(4).random((12, 12, 3))
    stack = pyramid_patches(img, (6, 6), ScaleSet((1.0,), 5))
    assert len(stack) == 1
    np.testing.assert_array_equal(stack[0], img[4:9, 4:9])


def test_pyramid_default_scales():
    img = np.random.default_rng(5).random((32, 32, 3))
    stack = pyramid_patches(img, (3, 30), ScaleSet((0.5, 1.0, 2.0), 15))
    assert len(stack) == 3
    assert all(p.shape == (15, 15, 3) for p in stack)


def test_pyramid_constant():
    stack = pyramid_patches(np.full((9, 9, 2), 0.25), (4, 4), ScaleSet((0.5, 1.0, 2.0), 5))
    for p in stack:
        np.testing.assert_allclose(p, 0.25, atol=1e-15)


def test_pyramid_center_out_of_bounds():
    with pytest.raises(ContractError):
        pyramid_patches(np.zeros((4, 4, 1)), (4, 0), ScaleSet((1.0,), 3))


def test_scale_set_validation():
    with pytest.raises(ContractError):
        ScaleSet((), 5)
    with pytest.raises(ContractError):
        ScaleSet((1.0, -0.5), 5)
    with pytest.raises(ContractError):
        ScaleSet((1.0,), 4)


def test_dense_equals_per_pixel_definition():
    img = np.random.default_rng(6).random((9, 7, 3))
    ss = ScaleSet((0.5, 1.0, 2.0), 5)
    dense = dense_pyramid(img, ss)
    for i in range(9):
        for j in range(7):
            stack = pyramid_patches(img, (i, j), ss)
            for k in range(ss.m):
                np.testing.assert_array_equal(dense[k][i * 7 + j], stack[k])


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(2, 10), w=st.integers(2, 10), seed=st.integers(0, 2**31),
    scale=st.sampled_from([0.5, 0.75, 1.0, 1.5, 2.0]),
)
def test_stack_shape_and_convexity(h, w, seed, scale):
    img = np.random.default_rng(seed).random((h, w, 2))
    ss = ScaleSet((scale, 1.0), 5)
    try:
        dense = dense_pyramid(img, ss)
    except ContractError:
        return
    lo, hi = img.min(), img.max()
    for arr in dense:
        assert arr.shape == (h * w, 5, 5, 2)
        assert arr.min() >= lo - 1e-12 and arr.max() <= hi + 1e-12
