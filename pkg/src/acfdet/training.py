"""Multi-view training harness: partition synthetic targets by yaw level,
train the right-side cascades, and assemble the full model with mirrored
left-side views."""

from __future__ import annotations

import logging

import numpy as np

from .boosting import NegativeImageSource, TrainConfig, adaboost_train, window_features
from .channels import ChannelConfig
from .detector import MirrorRef, MultiViewModel
from .errors import ValidationError
from .postprocess import AdjustmentParams, FusionConfig
from .pyramid import PyramidConfig
from .synth import SynthDataset

log = logging.getLogger(__name__)


def _jittered_box(box: dict, image_shape, rng: np.random.Generator, max_shift=0.05, scale_span=(0.95, 1.08)):
    h, w = image_shape[:2]
    size = box["w"]
    s = rng.uniform(*scale_span)
    nsize = size * s
    cx = box["x"] + size / 2.0 + rng.uniform(-max_shift, max_shift) * size
    cy = box["y"] + size / 2.0 + rng.uniform(-max_shift, max_shift) * size
    x0 = int(round(cx - nsize / 2.0))
    y0 = int(round(cy - nsize / 2.0))
    x1 = int(round(cx + nsize / 2.0))
    y1 = int(round(cy + nsize / 2.0))
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, w), min(y1, h)
    if x1 - x0 < 8 or y1 - y0 < 8:
        return None
    return x0, y0, x1, y1


def extract_view_features(
    dataset: SynthDataset,
    channel_config: ChannelConfig,
    window_size: int,
    jitter: int = 2,
    rng_seed: int = 0,
) -> dict[int, np.ndarray]:
    """Per-yaw-level positive feature matrices.  Each annotated target
    contributes its tight crop plus ``jitter`` randomly shifted/rescaled
    crops; the horizontally flipped crop is credited to the mirror level."""
    rng = np.random.default_rng(rng_seed)
    levels = dataset.config.yaw_levels
    feats: dict[int, list[np.ndarray]] = {v: [] for v in range(1, levels + 1)}
    for rec in dataset.images:
        img = dataset.load_image(rec["file"])
        for box in rec["boxes"]:
            yaw = box["yaw"]
            crops = [(box["x"], box["y"], box["x"] + box["w"], box["y"] + box["h"])]
            for _ in range(jitter):
                jb = _jittered_box(box, img.shape, rng)
                if jb is not None:
                    crops.append(jb)
            for x0, y0, x1, y1 in crops:
                window = img[y0:y1, x0:x1]
                f = window_features(window, channel_config, window_size)
                feats[yaw].append(f)
                f_flip = window_features(window[:, ::-1].copy(), channel_config, window_size)
                feats[levels + 1 - yaw].append(f_flip)
    return {v: (np.array(rows) if rows else np.empty((0, 0))) for v, rows in feats.items()}


def train_multiview(
    dataset: SynthDataset,
    channel_config: ChannelConfig | None = None,
    train_config: TrainConfig | None = None,
    pyramid_config: PyramidConfig | None = None,
    fusion: FusionConfig | None = None,
    window_size: int = 80,
    jitter: int = 2,
    backend=None,
) -> MultiViewModel:
    """Train one cascade per right-side yaw level (each on its own crops plus
    the flipped crops of the mirror level) and mirror them for the left side.

    With L yaw levels, slots 0..L/2-1 hold trained views for yaw levels
    1..L/2 and slots L/2..L-1 hold mirror references in reverse order.
    """
    channel_config = channel_config or ChannelConfig()
    train_config = train_config or TrainConfig()
    pyramid_config = pyramid_config or PyramidConfig(min_window=window_size)
    fusion = fusion or FusionConfig()
    levels = dataset.config.yaw_levels
    if levels % 2 != 0:
        raise ValidationError("multi-view training expects an even number of yaw levels")

    by_level = extract_view_features(dataset, channel_config, window_size, jitter, train_config.rng_seed)
    negatives = NegativeImageSource(dataset.negative_images())

    views: list = []
    for slot in range(levels // 2):
        yaw = slot + 1
        positives = by_level[yaw]
        if positives.size == 0:
            raise ValidationError(f"no positive samples for yaw level {yaw}")
        log.info("training view %d (yaw level %d): %d positives", slot, yaw, positives.shape[0])
        views.append(
            adaboost_train(
                positives,
                negatives,
                train_config,
                channel_config,
                window_size=window_size,
                pyramid_config=pyramid_config,
                view_id=slot,
                backend=backend,
            )
        )
    for slot in range(levels // 2, levels):
        views.append(MirrorRef(source=levels - 1 - slot))

    return MultiViewModel(
        views=views,
        adjustments=[AdjustmentParams() for _ in views],
        fusion=fusion,
    )
