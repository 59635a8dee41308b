import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acfdet.channels import (
    LUV_L_RANGE,
    LUV_U_RANGE,
    LUV_V_RANGE,
    ChannelConfig,
    binomial_kernel,
    binomial_smooth,
    compute_channels,
    dump_channels,
    gradients,
    orientation_histograms,
    pool,
    rgb_to_gray,
    rgb_to_luv,
)
from acfdet.errors import ConfigError, ValidationError

from conftest import random_image

# ---------------------------------------------------------------- oracles


def luv_reference(rgb: np.ndarray) -> np.ndarray:
    """Independent per-pixel CIE L*u*v* reference (D65, linear RGB)."""
    M = np.array(
        [
            [0.412453, 0.357580, 0.180423],
            [0.212671, 0.715160, 0.072169],
            [0.019334, 0.119193, 0.950227],
        ]
    )
    out = np.empty_like(rgb)
    xn, yn, zn = M.sum(axis=1)  # white point = RGB (1,1,1)
    un = 4 * xn / (xn + 15 * yn + 3 * zn)
    vn = 9 * yn / (xn + 15 * yn + 3 * zn)
    for i in range(rgb.shape[0]):
        for j in range(rgb.shape[1]):
            x, y, z = M @ rgb[i, j]
            d = x + 15 * y + 3 * z
            up, vp = (4 * x / d, 9 * y / d) if d > 0 else (un, vn)
            t = y / yn
            L = 116.0 * t ** (1 / 3) - 16.0 if t > (6 / 29) ** 3 else (29 / 3) ** 3 * t
            out[i, j] = (L, 13 * L * (up - un), 13 * L * (vp - vn))
    return out


def conv2_replicate(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct dense 2-D correlation with replicate padding."""
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(plane, [(ph, ph), (pw, pw)], mode="edge")
    out = np.zeros_like(plane)
    for i in range(plane.shape[0]):
        for j in range(plane.shape[1]):
            out[i, j] = np.sum(padded[i : i + kh, j : j + kw] * kernel)
    return out


def pool_reference(plane: np.ndarray, factor: int, method: str) -> np.ndarray:
    h, w = plane.shape
    ny = -(-h // factor)
    nx = -(-w // factor)
    out = np.zeros((ny, nx))
    for i in range(ny):
        for j in range(nx):
            block = plane[i * factor : (i + 1) * factor, j * factor : (j + 1) * factor]
            out[i, j] = block.mean() if method == "average" else block.max()
    return out


# ----------------------------------------------------------------- color


def test_luv_matches_reference():
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, size=(13, 9, 3))
    ref = luv_reference(img)
    ref[..., 0] = (ref[..., 0] - LUV_L_RANGE[0]) / (LUV_L_RANGE[1] - LUV_L_RANGE[0])
    ref[..., 1] = (ref[..., 1] - LUV_U_RANGE[0]) / (LUV_U_RANGE[1] - LUV_U_RANGE[0])
    ref[..., 2] = (ref[..., 2] - LUV_V_RANGE[0]) / (LUV_V_RANGE[1] - LUV_V_RANGE[0])
    assert np.allclose(rgb_to_luv(img), ref, atol=1e-5)


def test_luv_black_pixel_is_neutral():
    out = rgb_to_luv(np.zeros((1, 1, 3)))
    assert out[0, 0, 0] == 0.0
    # u* = v* = 0 maps to the affine origin of each range.
    assert np.isclose(out[0, 0, 1], -LUV_U_RANGE[0] / (LUV_U_RANGE[1] - LUV_U_RANGE[0]))
    assert np.isclose(out[0, 0, 2], -LUV_V_RANGE[0] / (LUV_V_RANGE[1] - LUV_V_RANGE[0]))


def test_luv_gray_axis_has_no_chroma():
    img = np.full((3, 3, 3), 0.42)
    out = rgb_to_luv(img)
    ustar = out[..., 1] * (LUV_U_RANGE[1] - LUV_U_RANGE[0]) + LUV_U_RANGE[0]
    vstar = out[..., 2] * (LUV_V_RANGE[1] - LUV_V_RANGE[0]) + LUV_V_RANGE[0]
    assert np.allclose(ustar, 0.0, atol=1e-9)
    assert np.allclose(vstar, 0.0, atol=1e-9)


def test_gray_weights():
    assert np.isclose(rgb_to_gray(np.ones((1, 1, 3)))[0, 0], 1.0)
    assert np.isclose(rgb_to_gray(np.array([[[1.0, 0, 0]]]))[0, 0], 0.299)


# ------------------------------------------------------------- smoothing


def test_binomial_kernel_radius1():
    assert np.allclose(binomial_kernel(1), [0.25, 0.5, 0.25])


def test_binomial_kernel_radius2():
    assert np.allclose(binomial_kernel(2), np.array([1, 4, 6, 4, 1]) / 16.0)


@pytest.mark.parametrize("radius", [1, 2, 3])
def test_binomial_smooth_matches_direct_convolution(radius):
    rng = np.random.default_rng(radius)
    plane = rng.uniform(0, 1, size=(17, 11))
    k1 = binomial_kernel(radius)
    expected = conv2_replicate(plane, np.outer(k1, k1))
    assert np.allclose(binomial_smooth(plane, radius), expected, atol=1e-6)


def test_binomial_smooth_radius0_identity():
    plane = np.random.default_rng(0).uniform(size=(5, 5))
    assert np.array_equal(binomial_smooth(plane, 0), plane)


@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_binomial_smooth_preserves_constants(radius, seed):
    c = np.random.default_rng(seed).uniform()
    plane = np.full((9, 7), c)
    assert np.allclose(binomial_smooth(plane, radius), c)


# ------------------------------------------------------------- gradients


def test_gradient_of_linear_ramp():
    # f(x, y) = 0.05 x  ->  dx = 0.05 everywhere except replicate borders.
    w = 12
    img = np.tile(np.arange(w) * 0.05, (8, 1))[..., None] * np.ones(3)
    mag, ori = gradients(img, "rgb")
    assert np.allclose(mag[:, 1:-1], 0.05, atol=1e-12)
    assert np.allclose(ori[:, 1:-1], 0.0, atol=1e-12)
    # Replicate padding halves the derivative at the columns' edges.
    assert np.allclose(mag[:, 0], 0.025, atol=1e-12)


def test_gradient_orientation_is_unsigned():
    h = 12
    img = np.tile((np.arange(h) * 0.04)[:, None], (1, 9))[..., None] * np.ones(3)
    _, ori = gradients(img, "rgb")
    assert np.all(ori >= 0.0)
    assert np.all(ori < np.pi)
    assert np.allclose(ori[1:-1, :], np.pi / 2, atol=1e-12)


def test_gradient_takes_strongest_color_plane():
    img = np.zeros((6, 8, 3))
    img[:, :, 0] = np.tile(np.arange(8) * 0.02, (6, 1))  # weak horizontal in R
    img[:, :, 1] = np.tile((np.arange(6) * 0.08)[:, None], (1, 8))  # strong vertical in G
    mag, ori = gradients(img, "rgb")
    assert np.allclose(ori[1:-1, 1:-1], np.pi / 2, atol=1e-12)
    assert np.allclose(mag[1:-1, 1:-1], 0.08, atol=1e-12)


# --------------------------------------------------- orientation binning


@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 6, 9]))
@settings(max_examples=25, deadline=None)
def test_orientation_bins_conserve_magnitude(seed, bins):
    rng = np.random.default_rng(seed)
    mag = rng.uniform(0, 2, size=(7, 5))
    ori = rng.uniform(0, np.pi, size=(7, 5)) % np.pi
    hist = orientation_histograms(mag, ori, bins)
    assert hist.shape == (bins, 7, 5)
    assert np.all(hist >= 0)
    assert np.allclose(hist.sum(axis=0), mag, atol=1e-6)


def test_orientation_exact_bin_center():
    mag = np.ones((1, 1))
    ori = np.full((1, 1), 2 * np.pi / 6)  # exactly bin 2 of 6
    hist = orientation_histograms(mag, ori, 6)
    assert np.isclose(hist[2, 0, 0], 1.0)
    assert np.isclose(hist.sum(), 1.0)


def test_orientation_midpoint_splits_evenly():
    mag = np.ones((1, 1))
    ori = np.full((1, 1), np.pi / 6 / 2)  # halfway between bins 0 and 1
    hist = orientation_histograms(mag, ori, 6)
    assert np.isclose(hist[0, 0, 0], 0.5)
    assert np.isclose(hist[1, 0, 0], 0.5)


def test_orientation_wraps_circularly():
    mag = np.ones((1, 1))
    ori = np.full((1, 1), np.pi * (1 - 1 / 12))  # halfway between last bin and bin 0
    hist = orientation_histograms(mag, ori, 6)
    assert np.isclose(hist[5, 0, 0], 0.5)
    assert np.isclose(hist[0, 0, 0], 0.5)


# ---------------------------------------------------------------- pooling


@pytest.mark.parametrize("method", ["average", "max"])
@pytest.mark.parametrize("shape", [(16, 16), (17, 14), (5, 9)])
def test_pool_matches_blockwise_oracle(method, shape):
    rng = np.random.default_rng(3)
    plane = rng.uniform(-1, 1, size=shape)
    assert np.allclose(pool(plane, 4, method), pool_reference(plane, 4, method))


def test_pool_factor1_identity():
    plane = np.random.default_rng(0).uniform(size=(6, 6))
    assert np.array_equal(pool(plane, 1), plane)


def test_stochastic_pool_is_seeded_and_picks_block_members():
    rng = np.random.default_rng(5)
    plane = np.random.default_rng(1).uniform(size=(8, 8))
    a = pool(plane, 4, "stochastic", np.random.default_rng(5))
    b = pool(plane, 4, "stochastic", np.random.default_rng(5))
    assert np.array_equal(a, b)
    for i in range(2):
        for j in range(2):
            block = plane[i * 4 : (i + 1) * 4, j * 4 : (j + 1) * 4]
            assert a[i, j] in block


def test_stochastic_pool_requires_rng():
    with pytest.raises(ConfigError):
        pool(np.zeros((4, 4)), 2, "stochastic")


# ----------------------------------------------------------- full stacks


def test_default_stack_shape_and_descriptors():
    cfg = ChannelConfig()
    img = random_image(np.random.default_rng(0), 64, 48)
    stack = compute_channels(img, cfg)
    assert stack.data.shape == (10, 16, 12)
    kinds = [d.kind for d in stack.descriptors]
    assert kinds[:3] == ["color", "color", "color"]
    assert kinds[3] == "magnitude"
    assert kinds[4:] == ["orientation"] * 6
    assert [d.bin for d in stack.descriptors[4:]] == list(range(6))


def test_multiscale_stack_doubles_channels():
    cfg = ChannelConfig(pre_smooth_radii=(1, 2))
    img = random_image(np.random.default_rng(1), 32, 32)
    stack = compute_channels(img, cfg)
    assert stack.data.shape[0] == 20
    assert [d.radius for d in stack.descriptors] == [1] * 10 + [2] * 10


def test_feature_counts_default_and_multiscale():
    # 80x80 window, shrink 4: (80/4)^2 * 10 = 4000; two radii double it.
    assert ChannelConfig().num_channels * (80 // 4) ** 2 == 4000
    assert ChannelConfig(pre_smooth_radii=(1, 2)).num_channels * (80 // 4) ** 2 == 8000


def test_stack_is_read_only():
    img = random_image(np.random.default_rng(2), 16, 16)
    stack = compute_channels(img, ChannelConfig())
    with pytest.raises(ValueError):
        stack.data[0, 0, 0] = 1.0


def test_horizontal_flip_covariance():
    """Flipping the image flips each channel and reverses orientation bins."""
    cfg = ChannelConfig()
    img = random_image(np.random.default_rng(4), 64, 64)
    a = compute_channels(img, cfg).data
    b = compute_channels(img[:, ::-1].copy(), cfg).data
    bins = 6
    for c, d in enumerate(compute_channels(img, cfg).descriptors):
        if d.kind == "orientation":
            partner = c - d.bin + (bins - d.bin) % bins
        else:
            partner = c
        assert np.allclose(b[c], a[partner][:, ::-1], atol=1e-10), f"channel {c}"


def test_rejects_bad_images():
    cfg = ChannelConfig()
    with pytest.raises(ValidationError):
        compute_channels(np.zeros((10, 10)), cfg)
    with pytest.raises(ValidationError):
        compute_channels(np.full((10, 10, 3), 1.5), cfg)
    with pytest.raises(ValidationError):
        compute_channels(np.zeros((2, 2, 3)), cfg)  # smaller than shrink


def test_config_validation():
    with pytest.raises(ConfigError):
        ChannelConfig(shrink=0)
    with pytest.raises(ConfigError):
        ChannelConfig(num_orientation_bins=0)
    with pytest.raises(ConfigError):
        ChannelConfig(pooling="median")
    with pytest.raises(ConfigError):
        ChannelConfig(color_space="yuv")
    with pytest.raises(ConfigError):
        ChannelConfig(pre_smooth_radii=())


def test_dump_channels_writes_one_png_per_channel(tmp_path):
    img = random_image(np.random.default_rng(6), 32, 32)
    stack = compute_channels(img, ChannelConfig())
    files = dump_channels(stack, tmp_path)
    assert len(files) == 10
    for f in files:
        assert (tmp_path / f).exists() or any(str(p) == f for p in tmp_path.iterdir())
