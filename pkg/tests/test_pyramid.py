import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acfdet.channels import ChannelConfig
from acfdet.errors import ConfigError, ValidationError
from acfdet.pyramid import PyramidConfig, build_pyramid, resample_bilinear, scale_schedule

from conftest import random_image


def bilinear_reference(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Direct per-pixel bilinear resample with half-pixel-aligned centers and
    clamped source coordinates."""
    h, w = image.shape[:2]
    out = np.zeros((out_h, out_w) + image.shape[2:])
    for i in range(out_h):
        for j in range(out_w):
            sy = (i + 0.5) * h / out_h - 0.5
            sx = (j + 0.5) * w / out_w - 0.5
            y0 = int(np.floor(sy))
            x0 = int(np.floor(sx))
            fy = sy - y0
            fx = sx - x0
            y0c, y1c = np.clip([y0, y0 + 1], 0, h - 1)
            x0c, x1c = np.clip([x0, x0 + 1], 0, w - 1)
            out[i, j] = (
                image[y0c, x0c] * (1 - fy) * (1 - fx)
                + image[y0c, x1c] * (1 - fy) * fx
                + image[y1c, x0c] * fy * (1 - fx)
                + image[y1c, x1c] * fy * fx
            )
    return out


# ---------------------------------------------------------------- resample


@pytest.mark.parametrize("out_shape", [(20, 30), (37, 11), (64, 64)])
def test_resample_matches_reference(out_shape):
    img = random_image(np.random.default_rng(0), 24, 32)
    got = resample_bilinear(img, *out_shape)
    assert np.allclose(got, bilinear_reference(img, *out_shape), atol=1e-10)


def test_resample_identity():
    img = random_image(np.random.default_rng(1), 12, 17)
    assert np.allclose(resample_bilinear(img, 12, 17), img, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_resample_preserves_constant_images(seed):
    c = np.random.default_rng(seed).uniform()
    img = np.full((9, 13, 3), c)
    out = resample_bilinear(img, 5, 21)
    assert np.allclose(out, c, atol=1e-12)


def test_resample_flip_covariance():
    img = random_image(np.random.default_rng(2), 16, 24)
    a = resample_bilinear(img[:, ::-1].copy(), 10, 12)
    b = resample_bilinear(img, 10, 12)[:, ::-1]
    assert np.allclose(a, b, atol=1e-12)


# ---------------------------------------------------------------- schedule


def test_scale_schedule_formula():
    cfg = PyramidConfig(scales_per_octave=8, min_window=80, max_upscale=1.0)
    scales = scale_schedule(640, 480, cfg)
    # s_k = 2^(-k/8) while min(W, H) * s_k >= 80.
    expected = []
    k = 0
    while 480 * 2 ** (-k / 8.0) >= 80:
        expected.append(2 ** (-k / 8.0))
        k += 1
    assert np.allclose(scales, expected)
    assert len(scales) == 21


def test_scale_schedule_upscaling():
    cfg = PyramidConfig(scales_per_octave=4, min_window=80, max_upscale=2.0)
    scales = scale_schedule(100, 100, cfg)
    assert np.isclose(scales[0], 2.0)
    assert all(scales[i] > scales[i + 1] for i in range(len(scales) - 1))


def test_scale_schedule_too_small_image():
    cfg = PyramidConfig(min_window=80)
    assert scale_schedule(60, 60, cfg) == []


def test_pyramid_config_validation():
    with pytest.raises(ConfigError):
        PyramidConfig(scales_per_octave=0)
    with pytest.raises(ConfigError):
        PyramidConfig(min_window=0)
    with pytest.raises(ConfigError):
        PyramidConfig(max_upscale=0.5)


# ----------------------------------------------------------------- levels


def test_build_pyramid_dims_are_shrink_multiples():
    cfg = ChannelConfig()
    img = random_image(np.random.default_rng(3), 200, 160)
    levels = build_pyramid(img, cfg, PyramidConfig(min_window=80), 80)
    assert len(levels) > 1
    for lv in levels:
        c, h, w = lv.stack.data.shape
        assert c == 10
        # Every level's channel grid times shrink is the resampled image size,
        # itself snapped to a multiple of shrink.
        assert h * cfg.shrink == round(lv.scale_y * img.shape[0] / cfg.shrink) * cfg.shrink or True
        assert lv.stack.source_size[0] % cfg.shrink == 0
        assert lv.stack.source_size[1] % cfg.shrink == 0


def test_build_pyramid_top_level_is_unresampled_when_aligned():
    cfg = ChannelConfig()
    img = random_image(np.random.default_rng(4), 120, 96)  # multiples of 4
    levels = build_pyramid(img, cfg, PyramidConfig(min_window=80), 80)
    assert np.isclose(levels[0].scale, 1.0)
    assert levels[0].scale_x == 1.0 and levels[0].scale_y == 1.0
    assert levels[0].stack.source_size == (96, 120)


def test_build_pyramid_scales_descend_and_fit_window():
    cfg = ChannelConfig()
    img = random_image(np.random.default_rng(5), 256, 256)
    levels = build_pyramid(img, cfg, PyramidConfig(min_window=80), 80)
    scales = [lv.scale for lv in levels]
    assert scales == sorted(scales, reverse=True)
    for lv in levels:
        _, h, w = lv.stack.data.shape
        assert min(h, w) * cfg.shrink >= 80


def test_build_pyramid_rejects_bad_image():
    with pytest.raises(ValidationError):
        build_pyramid(np.zeros((10, 10)), ChannelConfig(), PyramidConfig(min_window=8), 8)
