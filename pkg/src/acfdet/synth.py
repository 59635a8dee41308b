"""Synthetic multi-view dataset generation.

Targets are asymmetric multi-part patterns whose internal layout shears with
a yaw level: right-side levels shift their parts increasingly to one side and
shrink the far-side part, and left-side levels are exact horizontal mirrors
of their right-side counterparts.  Targets are composited over textured-noise
backgrounds with distractor clutter, including warm-toned decoy patches that
share the target palette, so appearance alone cannot separate the classes;
negative images carry the same background and clutter with no targets.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import ConfigError, ValidationError
from .evaluation import AnnotationSet, GroundTruthBox
from .geometry import jaccard
from .pyramid import resample_bilinear


@dataclass(frozen=True)
class SynthConfig:
    rng_seed: int = 0
    image_count: int = 100
    image_size: int = 256
    targets_per_image: tuple[int, int] = (1, 3)
    scale_range: tuple[int, int] = (84, 160)
    yaw_levels: int = 6
    clutter_density: float = 6.0
    noise_amplitude: float = 0.06
    negative_image_count: int = 50

    def __post_init__(self):
        if self.yaw_levels < 1:
            raise ConfigError("yaw_levels must be >= 1")
        if self.targets_per_image[0] < 0 or self.targets_per_image[0] > self.targets_per_image[1]:
            raise ConfigError("targets_per_image must be a (min, max) range")
        if self.scale_range[0] > self.scale_range[1]:
            raise ConfigError("scale_range must be a (min, max) range")
        if self.scale_range[1] > self.image_size - 4:
            raise ConfigError("targets larger than the image cannot be placed")


def save_image_png(image: np.ndarray, path: str | Path):
    PILImage.fromarray((np.clip(image, 0.0, 1.0) * 255.0).round().astype(np.uint8)).save(path)


def load_image_png(path: str | Path) -> np.ndarray:
    arr = np.asarray(PILImage.open(path).convert("RGB"), dtype=np.float64) / 255.0
    return arr


def _fill_rect(canvas: np.ndarray, x0: float, y0: float, x1: float, y1: float, color, alpha: np.ndarray | None = None):
    """Paint an axis-aligned rectangle with per-pixel edge coverage."""
    h, w = canvas.shape[:2]
    px = np.arange(w)
    py = np.arange(h)
    cov_x = np.clip(np.minimum(x1, px + 1) - np.maximum(x0, px), 0.0, 1.0)
    cov_y = np.clip(np.minimum(y1, py + 1) - np.maximum(y0, py), 0.0, 1.0)
    cov = np.outer(cov_y, cov_x)
    canvas[...] = canvas * (1 - cov[..., None]) + np.asarray(color) * cov[..., None]
    if alpha is not None:
        alpha[...] = np.maximum(alpha, cov)


def _fill_disc(canvas: np.ndarray, cx: float, cy: float, r: float, color):
    h, w = canvas.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    dist = np.sqrt((xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2)
    cov = np.clip(r + 0.5 - dist, 0.0, 1.0)
    canvas[...] = canvas * (1 - cov[..., None]) + np.asarray(color) * cov[..., None]


def yaw_offset(yaw_level: int, yaw_levels: int) -> float:
    """Signed yaw in [-1, 1]; level 1 is the extreme left, the top level the
    extreme right, symmetric about the middle."""
    if not 1 <= yaw_level <= yaw_levels:
        raise ValidationError(f"yaw level {yaw_level} outside 1..{yaw_levels}")
    return (yaw_level - (yaw_levels + 1) / 2.0) / max((yaw_levels - 1) / 2.0, 1.0)


def render_target(size: int, yaw_level: int, yaw_levels: int = 6, brightness: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Render one target patch; returns (rgb, alpha) of shape (size, size).

    Left-side yaw levels are rendered as the exact horizontal flip of their
    mirror level, so mirrored levels are pixel-exact mirror images.
    """
    u = yaw_offset(yaw_level, yaw_levels)
    if u < 0:
        rgb, alpha = render_target(size, yaw_levels + 1 - yaw_level, yaw_levels, brightness)
        return rgb[:, ::-1].copy(), alpha[:, ::-1].copy()

    s = float(size)
    rgb = np.zeros((size, size, 3))
    alpha = np.zeros((size, size))
    base = np.array([0.82, 0.60, 0.38]) * brightness
    dark = np.array([0.07, 0.08, 0.11])
    nose_c = np.array([0.55, 0.33, 0.18]) * brightness
    mouth_c = np.array([0.42, 0.12, 0.10])

    _fill_rect(rgb, 0.04 * s, 0.04 * s, 0.96 * s, 0.96 * s, base, alpha)
    shift = 0.16 * u
    # near-side eye
    e1x, ey, ew = (0.30 + shift) * s, 0.30 * s, 0.14 * s
    _fill_rect(rgb, e1x - ew / 2, ey, e1x + ew / 2, ey + 0.12 * s, dark)
    # far-side eye: drifts toward the edge and narrows with yaw
    e2x = (0.70 + 0.24 * u) * s
    ew2 = 0.14 * (1.0 - 0.55 * u) * s
    _fill_rect(rgb, min(e2x - ew2 / 2, 0.94 * s - ew2), ey, min(e2x + ew2 / 2, 0.94 * s), ey + 0.12 * s, dark)
    # nose bar
    nx = (0.50 + 0.26 * u) * s
    _fill_rect(rgb, nx - 0.045 * s, 0.48 * s, nx + 0.045 * s, 0.70 * s, nose_c)
    # mouth
    mx = (0.50 + 0.20 * u) * s
    mw = 0.34 * (1.0 - 0.30 * u) * s
    _fill_rect(rgb, mx - mw / 2, 0.77 * s, mx + mw / 2, 0.85 * s, mouth_c)
    return rgb, alpha


def _background(size: int, config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    coarse = rng.uniform(-1.0, 1.0, size=(max(size // 16, 2), max(size // 16, 2), 3))
    texture = resample_bilinear(coarse, size, size) * config.noise_amplitude * 2.0
    img = 0.45 + texture

    n_clutter = rng.poisson(config.clutter_density * (size / 256.0) ** 2)
    for _ in range(n_clutter):
        kind = rng.integers(4)
        if rng.integers(2):  # cool palette
            color = np.array([rng.uniform(0.1, 0.4), rng.uniform(0.25, 0.65), rng.uniform(0.35, 0.8)])
        else:  # warm palette overlapping the target tones
            color = np.array([rng.uniform(0.55, 0.9), rng.uniform(0.35, 0.68), rng.uniform(0.2, 0.5)])
        if kind == 0:  # box
            w, h = rng.uniform(8, 56, size=2)
            x0 = rng.uniform(-w / 2, size - w / 2)
            y0 = rng.uniform(-h / 2, size - h / 2)
            _fill_rect(img, x0, y0, x0 + w, y0 + h, color)
        elif kind == 1:  # thin bar
            w, h = (rng.uniform(20, 90), rng.uniform(3, 8))
            if rng.integers(2):
                w, h = h, w
            x0 = rng.uniform(0, size - 1)
            y0 = rng.uniform(0, size - 1)
            _fill_rect(img, x0, y0, x0 + w, y0 + h, color)
        elif kind == 2:  # disc
            _fill_disc(img, rng.uniform(0, size), rng.uniform(0, size), rng.uniform(5, 28), color)
        else:  # decoy: target palette and parts, but with a scrambled layout
            hi = min(110.0, float(size))
            d = rng.uniform(min(40.0, hi), hi)
            x0 = rng.uniform(0, size - d)
            y0 = rng.uniform(0, size - d)
            bright = rng.uniform(0.8, 1.15)
            _fill_rect(img, x0 + 0.04 * d, y0 + 0.04 * d, x0 + 0.96 * d, y0 + 0.96 * d,
                       np.array([0.82, 0.60, 0.38]) * bright)
            parts = [
                (np.array([0.07, 0.08, 0.11]), 0.14, 0.12),          # eye-like
                (np.array([0.07, 0.08, 0.11]), 0.14, 0.12),
                (np.array([0.55, 0.33, 0.18]) * bright, 0.09, 0.22),  # bar-like
                (np.array([0.42, 0.12, 0.10]), 0.34, 0.08),           # mouth-like
            ]
            for color, pw, ph in parts:
                if rng.uniform() < 0.2:
                    continue
                px = rng.uniform(0.12, 0.88)
                py = rng.uniform(0.12, 0.88)
                _fill_rect(img, x0 + (px - pw / 2) * d, y0 + (py - ph / 2) * d,
                           x0 + (px + pw / 2) * d, y0 + (py + ph / 2) * d, color)

    return np.clip(img, 0.0, 1.0)


def _add_grain(img: np.ndarray, config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    # Applied after target compositing so targets are as noisy as clutter.
    return np.clip(img + rng.standard_normal(img.shape) * config.noise_amplitude, 0.0, 1.0)


def _place_targets(size: int, config: SynthConfig, rng: np.random.Generator) -> list[dict]:
    count = int(rng.integers(config.targets_per_image[0], config.targets_per_image[1] + 1))
    placed: list[dict] = []
    for _ in range(count):
        for _attempt in range(40):
            tsize = int(rng.integers(config.scale_range[0], config.scale_range[1] + 1))
            if tsize > size - 4:
                continue
            x0 = int(rng.integers(2, size - tsize - 1))
            y0 = int(rng.integers(2, size - tsize - 1))
            box = (x0, y0, tsize, tsize)
            if all(jaccard(box, (p["x"], p["y"], p["w"], p["h"])) < 0.05 for p in placed):
                yaw = int(rng.integers(1, config.yaw_levels + 1))
                brightness = float(rng.uniform(0.75, 1.2))
                placed.append({"x": x0, "y": y0, "w": tsize, "h": tsize, "yaw": yaw, "brightness": brightness})
                break
    return placed


def synth_generate(config: SynthConfig, out_dir: str | Path) -> AnnotationSet:
    """Render the dataset into ``out_dir``: positive images with annotations,
    negative (target-free) images, an eval-format annotation file, and a
    manifest carrying the seed, config, and per-box yaw labels."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "negatives").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.rng_seed)
    annotations = AnnotationSet(style="square-tight")
    manifest = {"rng_seed": config.rng_seed, "config": asdict(config), "images": [], "negatives": []}

    for i in range(config.image_count):
        img = _background(config.image_size, config, rng)
        records = _place_targets(config.image_size, config, rng)
        for rec in records:
            rgb, alpha = render_target(rec["w"], rec["yaw"], config.yaw_levels, rec["brightness"])
            region = img[rec["y"] : rec["y"] + rec["h"], rec["x"] : rec["x"] + rec["w"]]
            region[...] = region * (1 - alpha[..., None]) + rgb * alpha[..., None]
        img = _add_grain(img, config, rng)
        name = f"pos_{i:05d}.png"
        save_image_png(img, out / "images" / name)
        image_id = f"images/{name}"
        for rec in records:
            annotations.add(image_id, GroundTruthBox(x=rec["x"], y=rec["y"], w=rec["w"], h=rec["h"]))
        manifest["images"].append({"file": image_id, "boxes": records})

    for i in range(config.negative_image_count):
        img = _add_grain(_background(config.image_size, config, rng), config, rng)
        name = f"neg_{i:05d}.png"
        save_image_png(img, out / "negatives" / name)
        manifest["negatives"].append(f"negatives/{name}")

    lines = []
    for image_id in annotations.image_ids():
        for b in annotations.boxes[image_id]:
            lines.append(f"{image_id} {b.x:g} {b.y:g} {b.w:g} {b.h:g}")
    (out / "annotations.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return annotations


@dataclass
class SynthDataset:
    """A generated dataset reloaded from disk."""

    root: Path
    config: SynthConfig
    images: list[dict]  # manifest records: file + boxes (with yaw labels)
    negatives: list[str]
    annotations: AnnotationSet

    def load_image(self, rel_path: str) -> np.ndarray:
        return load_image_png(self.root / rel_path)

    def positive_crops(self) -> list[tuple[np.ndarray, int]]:
        """(crop, yaw) pairs for every annotated target."""
        out = []
        for rec in self.images:
            img = self.load_image(rec["file"])
            for b in rec["boxes"]:
                out.append((img[b["y"] : b["y"] + b["h"], b["x"] : b["x"] + b["w"]].copy(), b["yaw"]))
        return out

    def negative_images(self) -> list[np.ndarray]:
        return [self.load_image(p) for p in self.negatives]


def load_synth_dataset(root: str | Path) -> SynthDataset:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"{root} does not contain a dataset manifest")
    manifest = json.loads(manifest_path.read_text())
    cfg_dict = dict(manifest["config"])
    for key in ("targets_per_image", "scale_range"):
        cfg_dict[key] = tuple(cfg_dict[key])
    config = SynthConfig(**cfg_dict)
    from .evaluation import load_annotations

    return SynthDataset(
        root=root,
        config=config,
        images=manifest["images"],
        negatives=manifest["negatives"],
        annotations=load_annotations(root / "annotations.txt"),
    )
