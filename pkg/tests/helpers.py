"""Shared oracles for the detector tests and the acceptance suite."""

import dataclasses

import numpy as np

from acfdet.boosting import SoftCascadeModel, evaluate_cascade
from acfdet.channels import ChannelConfig, compute_channels
from acfdet.pyramid import PyramidLevel, resample_bilinear


def random_cascade_model(rng, config=None, window=32, num_trees=24, view_id=0):
    """A structurally valid cascade with random trees and open stage
    thresholds, for exercising scan geometry without training."""
    config = config or ChannelConfig()
    grid = window // config.shrink
    d = config.num_channels * grid * grid
    num_tr = int(num_trees)
    return SoftCascadeModel(
        features=rng.integers(0, d, size=(num_tr, 3)).astype(np.int32),
        thresholds=rng.uniform(0.0, 0.4, size=(num_tr, 3)),
        leaves=rng.choice([-1.0, 1.0], size=(num_tr, 4)),
        alphas=rng.uniform(0.1, 1.0, size=num_tr),
        stage_thresholds=np.full(num_tr, -np.inf),
        window_size=window,
        channel_config=config,
        score_range=(0.0, 1.0),
        view_id=view_id,
    )


def level_image(source: np.ndarray, level: PyramidLevel, shrink: int) -> np.ndarray:
    """Reproduce the resampled image a pyramid level was computed from."""
    th = level.stack.data.shape[1] * shrink
    tw = level.stack.data.shape[2] * shrink
    if (th, tw) == source.shape[:2]:
        return source
    return resample_bilinear(source, th, tw)


def crop_margin_score(img: np.ndarray, model: SoftCascadeModel, iy: int, ix: int, margin: int) -> float:
    """Score one grid-aligned window through the crop pipeline: cut the
    window plus a margin out of the level's resampled image, recompute its
    channels from scratch, and evaluate the cascade on the interior features.

    The margin (in pooled cells) must cover the channel smoothing support and
    must fit inside the image, so replicate padding never reaches the window.
    """
    shrink = model.channel_config.shrink
    grid = model.grid_size
    y0 = (iy - margin) * shrink
    x0 = (ix - margin) * shrink
    y1 = (iy + grid + margin) * shrink
    x1 = (ix + grid + margin) * shrink
    if y0 < 0 or x0 < 0 or y1 > img.shape[0] or x1 > img.shape[1]:
        raise ValueError("window margin does not fit inside the level image")
    stack = compute_channels(img[y0:y1, x0:x1], model.channel_config)
    feats = stack.data[:, margin : margin + grid, margin : margin + grid].ravel()
    return evaluate_cascade(model, feats, use_thresholds=False).score


def interior_window_positions(img_shape, model: SoftCascadeModel, margin: int):
    """(iy, ix) grid positions whose margined crop stays inside the image."""
    shrink = model.channel_config.shrink
    grid = model.grid_size
    ny = img_shape[0] // shrink - grid
    nx = img_shape[1] // shrink - grid
    return [
        (iy, ix)
        for iy in range(margin, ny + 1 - margin)
        for ix in range(margin, nx + 1 - margin)
    ]


def oracle_margin(config: ChannelConfig) -> int:
    """Pooled-cell margin covering the channel smoothing support: binomial
    pre-smoothing reach plus the gradient stencil, then post-smoothing on the
    pooled grid."""
    pre = int(np.ceil((max(config.pre_smooth_radii) + 1) / config.shrink))
    return pre + config.post_smooth_radius


def mirror_detections(dets, image_width):
    """X-mirror a detection list about the image's vertical axis."""
    return [dataclasses.replace(d, x=image_width - d.x - d.w) for d in dets]
