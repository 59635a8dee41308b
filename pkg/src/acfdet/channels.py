"""Extended channel computation: color channels, gradient magnitude, oriented
gradient histograms, with binomial smoothing, block pooling, and the
multi-pre-smooth-radius variant.

Images are numpy arrays of shape (H, W, 3), float64, values in [0, 1].
A computed stack holds C planes on the pooled grid, C =
len(pre_smooth_radii) * (color_components + 1 + num_orientation_bins).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ConfigError, ValidationError

# Affine normalization of CIE L*u*v* into [0, 1].  L* spans [0, 100]; the
# u*/v* extremes below cover the full RGB cube under the D65 white point.
# These constants are written into serialized models so a model file fully
# pins its own feature definition.
LUV_L_RANGE = (0.0, 100.0)
LUV_U_RANGE = (-134.0, 220.0)
LUV_V_RANGE = (-140.0, 122.0)

# sRGB primaries, D65 white point (linear RGB -> XYZ).
_RGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
_WHITE_XYZ = _RGB_TO_XYZ @ np.ones(3)
_UN_PRIME = 4.0 * _WHITE_XYZ[0] / (_WHITE_XYZ[0] + 15.0 * _WHITE_XYZ[1] + 3.0 * _WHITE_XYZ[2])
_VN_PRIME = 9.0 * _WHITE_XYZ[1] / (_WHITE_XYZ[0] + 15.0 * _WHITE_XYZ[1] + 3.0 * _WHITE_XYZ[2])

COLOR_SPACES = ("luv", "rgb", "gray", "hsv")
GRADIENT_COLOR_SPACES = ("rgb", "luv", "gray")
POOLING_METHODS = ("average", "max", "stochastic")

_COLOR_COMPONENT_NAMES = {
    "luv": ("L", "u", "v"),
    "rgb": ("R", "G", "B"),
    "gray": ("gray",),
    "hsv": ("H", "S", "V"),
}


@dataclass(frozen=True)
class ChannelConfig:
    color_space: str = "luv"
    gradient_color_space: str = "rgb"
    num_orientation_bins: int = 6
    pre_smooth_radii: tuple[int, ...] = (1,)
    post_smooth_radius: int = 1
    shrink: int = 4
    pooling: str = "average"
    stochastic_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "pre_smooth_radii", tuple(int(r) for r in self.pre_smooth_radii))
        self.validate()

    def validate(self):
        if self.color_space not in COLOR_SPACES:
            raise ConfigError(f"unknown color space {self.color_space!r}")
        if self.gradient_color_space not in GRADIENT_COLOR_SPACES:
            raise ConfigError(f"unknown gradient color space {self.gradient_color_space!r}")
        if self.num_orientation_bins < 1:
            raise ConfigError("num_orientation_bins must be >= 1")
        if not self.pre_smooth_radii:
            raise ConfigError("pre_smooth_radii must be non-empty")
        if any(r < 1 for r in self.pre_smooth_radii):
            raise ConfigError("pre-smoothing radii must be positive")
        if list(self.pre_smooth_radii) != sorted(set(self.pre_smooth_radii)):
            raise ConfigError("pre_smooth_radii must be strictly increasing")
        if self.post_smooth_radius < 0:
            raise ConfigError("post_smooth_radius must be >= 0")
        if self.shrink < 1:
            raise ConfigError("shrink must be >= 1")
        if self.pooling not in POOLING_METHODS:
            raise ConfigError(f"unknown pooling method {self.pooling!r}")
        if self.pooling == "stochastic" and self.stochastic_seed is None:
            raise ConfigError("stochastic pooling requires an explicit stochastic_seed")

    @property
    def num_color_components(self) -> int:
        return len(_COLOR_COMPONENT_NAMES[self.color_space])

    @property
    def channels_per_radius(self) -> int:
        return self.num_color_components + 1 + self.num_orientation_bins

    @property
    def num_channels(self) -> int:
        return len(self.pre_smooth_radii) * self.channels_per_radius

    def descriptors(self) -> tuple["ChannelDescriptor", ...]:
        """Per-channel tags in stack order: for each radius, color components,
        then gradient magnitude, then orientation bins 0..B-1."""
        out = []
        for r in self.pre_smooth_radii:
            for name in _COLOR_COMPONENT_NAMES[self.color_space]:
                out.append(ChannelDescriptor(kind="color", radius=r, detail=name))
            out.append(ChannelDescriptor(kind="magnitude", radius=r, detail=""))
            for k in range(self.num_orientation_bins):
                out.append(ChannelDescriptor(kind="orientation", radius=r, detail=str(k), bin=k))
        return tuple(out)


@dataclass(frozen=True)
class ChannelDescriptor:
    kind: str  # "color" | "magnitude" | "orientation"
    radius: int
    detail: str
    bin: int | None = None

    def label(self) -> str:
        return f"r{self.radius}_{self.kind}_{self.detail}" if self.detail else f"r{self.radius}_{self.kind}"


@dataclass(frozen=True)
class ChannelStack:
    """Pooled channel planes of one image: data has shape (C, H', W')."""

    data: np.ndarray
    descriptors: tuple[ChannelDescriptor, ...]
    config: ChannelConfig
    source_size: tuple[int, int]  # (width, height) of the source image

    def __post_init__(self):
        self.data.setflags(write=False)

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]


def validate_image(image: np.ndarray):
    if not isinstance(image, np.ndarray) or image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError("image must be an (H, W, 3) array")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValidationError("image must have positive dimensions")
    if not np.isfinite(image).all():
        raise ValidationError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValidationError("image values must lie in [0, 1]")


def rgb_to_luv(image: np.ndarray) -> np.ndarray:
    """Convert an RGB image in [0,1] to L*u*v* (D65), each component affinely
    normalized into [0, 1] by the module-level range constants.

    RGB is treated as linear.  Pixels with zero luminance denominator take the
    white point's chromaticity, so black maps to (0, neutral-u, neutral-v).
    """
    xyz = image @ _RGB_TO_XYZ.T
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    denom = x + 15.0 * y + 3.0 * z
    safe = denom > 0
    u_prime = np.where(safe, 4.0 * x / np.where(safe, denom, 1.0), _UN_PRIME)
    v_prime = np.where(safe, 9.0 * y / np.where(safe, denom, 1.0), _VN_PRIME)

    yr = y / _WHITE_XYZ[1]
    eps = (6.0 / 29.0) ** 3
    lstar = np.where(yr > eps, 116.0 * np.cbrt(yr) - 16.0, yr * (29.0 / 3.0) ** 3)
    ustar = 13.0 * lstar * (u_prime - _UN_PRIME)
    vstar = 13.0 * lstar * (v_prime - _VN_PRIME)

    out = np.empty_like(image)
    out[..., 0] = (lstar - LUV_L_RANGE[0]) / (LUV_L_RANGE[1] - LUV_L_RANGE[0])
    out[..., 1] = (ustar - LUV_U_RANGE[0]) / (LUV_U_RANGE[1] - LUV_U_RANGE[0])
    out[..., 2] = (vstar - LUV_V_RANGE[0]) / (LUV_V_RANGE[1] - LUV_V_RANGE[0])
    return out


def rgb_to_gray(image: np.ndarray) -> np.ndarray:
    return image @ np.array([0.299, 0.587, 0.114])


def rgb_to_hsv(image: np.ndarray) -> np.ndarray:
    r, g, b = image[..., 0], image[..., 1], image[..., 2]
    v = image.max(axis=-1)
    c = v - image.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hc = np.where(c > 0, c, 1.0)
        h = np.select(
            [c == 0, v == r, v == g],
            [0.0, ((g - b) / hc) % 6.0, (b - r) / hc + 2.0],
            (r - g) / hc + 4.0,
        )
    out = np.empty_like(image)
    out[..., 0] = h / 6.0
    out[..., 1] = s
    out[..., 2] = v
    return out


def color_channels(image: np.ndarray, color_space: str) -> np.ndarray:
    """Planes of the requested color space, shape (K, H, W)."""
    if color_space == "rgb":
        planes = image
    elif color_space == "luv":
        planes = rgb_to_luv(image)
    elif color_space == "hsv":
        planes = rgb_to_hsv(image)
    elif color_space == "gray":
        return rgb_to_gray(image)[None]
    else:
        raise ConfigError(f"unknown color space {color_space!r}")
    return np.moveaxis(planes, -1, 0)


def binomial_kernel(radius: int) -> np.ndarray:
    """Normalized binomial coefficients of order 2*radius; radius 1 = [1,2,1]/4."""
    if radius < 0:
        raise ValidationError("smoothing radius must be >= 0")
    k = np.array([math.comb(2 * radius, i) for i in range(2 * radius + 1)], dtype=np.float64)
    return k / k.sum()


def binomial_smooth(plane: np.ndarray, radius: int) -> np.ndarray:
    """Separable binomial smoothing with replicate padding; radius 0 is identity."""
    if radius == 0:
        return plane.copy()
    k = binomial_kernel(radius)
    out = correlate1d(plane, k, axis=1, mode="nearest")
    return correlate1d(out, k, axis=0, mode="nearest")


def _central_diff(planes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # [-1, 0, 1]/2 with replicate borders, applied along x and y.
    padded = np.pad(planes, [(0, 0), (1, 1), (1, 1)], mode="edge")
    dx = (padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]) * 0.5
    dy = (padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]) * 0.5
    return dx, dy


def gradients(image: np.ndarray, gradient_color_space: str = "rgb") -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient magnitude and unsigned orientation in [0, pi).

    Magnitude is the largest response over the color planes; orientation comes
    from the plane attaining that maximum (first such plane on exact ties).
    """
    planes = color_channels(image, gradient_color_space)
    dx, dy = _central_diff(planes)
    mag_all = np.sqrt(dx * dx + dy * dy)
    best = mag_all.argmax(axis=0)
    idx = np.indices(best.shape)
    magnitude = mag_all[best, idx[0], idx[1]]
    ori = np.arctan2(dy[best, idx[0], idx[1]], dx[best, idx[0], idx[1]])
    ori = np.mod(ori, np.pi)
    ori[ori >= np.pi] = 0.0  # guard against mod returning pi by float rounding
    return magnitude, ori


def orientation_histograms(magnitude: np.ndarray, orientation: np.ndarray, num_bins: int) -> np.ndarray:
    """Soft-binned orientation energy: each pixel's magnitude split linearly
    between the two nearest bin centers (centers k*pi/B, circular over [0, pi)).
    The planes sum pixel-wise to the magnitude plane."""
    pos = orientation * (num_bins / np.pi)
    k0 = np.floor(pos).astype(np.intp)
    frac = pos - k0
    k0 = np.mod(k0, num_bins)
    k1 = np.mod(k0 + 1, num_bins)
    out = np.zeros((num_bins,) + magnitude.shape, dtype=magnitude.dtype)
    flat = out.reshape(num_bins, -1)
    pix = np.arange(magnitude.size)
    np.add.at(flat, (k0.ravel(), pix), (magnitude * (1.0 - frac)).ravel())
    np.add.at(flat, (k1.ravel(), pix), (magnitude * frac).ravel())
    return out


def pool(plane: np.ndarray, factor: int, method: str = "average", rng: np.random.Generator | None = None) -> np.ndarray:
    """Non-overlapping factor x factor block pooling; partial blocks at the
    right/bottom edges are pooled over their actual extent."""
    if factor < 1:
        raise ValidationError("pooling factor must be >= 1")
    if factor == 1:
        return plane.copy()
    h, w = plane.shape
    ye = np.arange(0, h, factor)
    xe = np.arange(0, w, factor)
    if method == "average":
        sums = np.add.reduceat(np.add.reduceat(plane, ye, axis=0), xe, axis=1)
        bh = np.minimum(ye + factor, h) - ye
        bw = np.minimum(xe + factor, w) - xe
        return sums / np.outer(bh, bw)
    if method == "max":
        return np.maximum.reduceat(np.maximum.reduceat(plane, ye, axis=0), xe, axis=1)
    if method == "stochastic":
        if rng is None:
            raise ConfigError("stochastic pooling requires a random generator")
        out = np.empty((len(ye), len(xe)), dtype=plane.dtype)
        for i, y0 in enumerate(ye):
            for j, x0 in enumerate(xe):
                block = plane[y0 : y0 + factor, x0 : x0 + factor].ravel()
                acts = np.maximum(block, 0.0)
                total = acts.sum()
                if total > 0:
                    p = acts / total
                else:
                    p = np.full(block.size, 1.0 / block.size)
                out[i, j] = block[rng.choice(block.size, p=p)]
        return out
    raise ConfigError(f"unknown pooling method {method!r}")


def compute_channels(image: np.ndarray, config: ChannelConfig) -> ChannelStack:
    """Full channel pipeline: per pre-smooth radius, smooth the image, compute
    color/gradient/orientation channels, pool by shrink, post-smooth each
    pooled plane; concatenate groups in radius order."""
    validate_image(image)
    h, w = image.shape[:2]
    if h < config.shrink or w < config.shrink:
        raise ValidationError(f"image {w}x{h} smaller than shrink {config.shrink}")

    rng = None
    if config.pooling == "stochastic":
        rng = np.random.default_rng(config.stochastic_seed)

    groups = []
    for radius in config.pre_smooth_radii:
        smoothed = np.stack([binomial_smooth(image[..., i], radius) for i in range(3)], axis=-1)
        planes = [p for p in color_channels(smoothed, config.color_space)]
        magnitude, orientation = gradients(smoothed, config.gradient_color_space)
        planes.append(magnitude)
        planes.extend(orientation_histograms(magnitude, orientation, config.num_orientation_bins))
        pooled = [
            binomial_smooth(pool(p, config.shrink, config.pooling, rng), config.post_smooth_radius)
            for p in planes
        ]
        groups.append(np.stack(pooled))

    return ChannelStack(
        data=np.ascontiguousarray(np.concatenate(groups)),
        descriptors=config.descriptors(),
        config=config,
        source_size=(w, h),
    )


def dump_channels(stack: ChannelStack, out_dir: str | os.PathLike) -> list[str]:
    """Write each channel as a grayscale PNG, values linearly mapped to
    [0, 255] over the plane's own range.  Returns the written paths."""
    from PIL import Image as PILImage

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, (plane, desc) in enumerate(zip(stack.data, stack.descriptors)):
        lo, hi = float(plane.min()), float(plane.max())
        scaled = np.zeros_like(plane) if hi <= lo else (plane - lo) / (hi - lo)
        img = PILImage.fromarray((scaled * 255.0).round().astype(np.uint8))
        path = os.path.join(out_dir, f"ch{i:02d}_{desc.label()}.png")
        img.save(path)
        paths.append(path)
    return paths
