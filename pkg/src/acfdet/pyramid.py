"""Multi-scale channel pyramid: geometric scale schedule and exact per-scale
channel recomputation over bilinearly resampled images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelConfig, ChannelStack, compute_channels, validate_image
from .errors import ConfigError


@dataclass(frozen=True)
class PyramidConfig:
    scales_per_octave: int = 8
    min_window: int = 80
    max_upscale: float = 1.0

    def __post_init__(self):
        if self.scales_per_octave < 1:
            raise ConfigError("scales_per_octave must be >= 1")
        if self.max_upscale < 1.0:
            raise ConfigError("max_upscale must be >= 1")
        if self.min_window < 1:
            raise ConfigError("min_window must be >= 1")


@dataclass(frozen=True)
class PyramidLevel:
    scale: float
    stack: ChannelStack
    # Actual per-axis resample ratios (resampled_dim / source_dim); these are
    # the exact factors for mapping level coordinates back to source pixels.
    scale_x: float
    scale_y: float


def scale_schedule(image_w: int, image_h: int, config: PyramidConfig, window: int | None = None) -> list[float]:
    """Descending geometric schedule s_k = max_upscale * 2**(-k/scales_per_octave),
    keeping scales while the smaller image side times s_k still covers the
    detector window.  Empty if even the largest scale cannot fit the window."""
    window = config.min_window if window is None else window
    side = min(image_w, image_h)
    scales = []
    k = 0
    while True:
        s = config.max_upscale * 2.0 ** (-k / config.scales_per_octave)
        if side * s < window:
            break
        scales.append(s)
        k += 1
    return scales


def resample_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-centered coordinates; replicate
    clamping at the borders.  Works on (H, W) or (H, W, C) arrays."""
    h, w = image.shape[:2]
    if (out_h, out_w) == (h, w):
        return image.copy()

    def axis_coords(n_out, n_in):
        c = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        c = np.clip(c, 0.0, n_in - 1.0)
        i0 = np.floor(c).astype(np.intp)
        i0 = np.minimum(i0, n_in - 2) if n_in > 1 else np.zeros_like(i0)
        frac = c - i0
        return i0, frac

    y0, fy = axis_coords(out_h, h)
    x0, fx = axis_coords(out_w, w)
    if image.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = image[y0][:, x0] * (1 - fx) + image[y0][:, x0 + 1] * fx if w > 1 else image[y0][:, x0] * np.ones_like(fx)
    if h > 1:
        bot = image[y0 + 1][:, x0] * (1 - fx) + image[y0 + 1][:, x0 + 1] * fx if w > 1 else image[y0 + 1][:, x0]
        return top * (1 - fy) + bot * fy
    return top * np.ones_like(fy)


def _snap(value: float, shrink: int) -> int:
    # Round-half-up to the nearest multiple of shrink; keeps every level's
    # pooling blocks full and the pipeline horizontally flip-covariant.
    return max(shrink, int(np.floor(value / shrink + 0.5)) * shrink)


def build_pyramid(
    image: np.ndarray,
    channel_config: ChannelConfig,
    pyramid_config: PyramidConfig,
    window: int | None = None,
) -> list[PyramidLevel]:
    """Compute channel stacks at every schedule scale, descending order.
    Scaled dimensions are rounded to multiples of shrink (no resampling when
    the rounded size equals the source size)."""
    validate_image(image)
    h, w = image.shape[:2]
    levels = []
    for s in scale_schedule(w, h, pyramid_config, window):
        th, tw = _snap(h * s, channel_config.shrink), _snap(w * s, channel_config.shrink)
        resampled = image if (th, tw) == (h, w) else resample_bilinear(image, th, tw)
        levels.append(
            PyramidLevel(
                scale=s,
                stack=compute_channels(resampled, channel_config),
                scale_x=tw / w,
                scale_y=th / h,
            )
        )
    return levels
