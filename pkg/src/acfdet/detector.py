"""Sliding-window cascade detection over channel pyramids, mirrored-view
model derivation, and the multi-view model container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import get_backend
from .boosting import SoftCascadeModel
from .errors import ValidationError
from .geometry import Detection, total_order_key
from .postprocess import AdjustmentParams, FusionConfig, apply_fusion
from .pyramid import PyramidConfig, PyramidLevel, build_pyramid


def mirror_channel_permutation(config) -> np.ndarray:
    """Channel remapping under horizontal flip: orientation bin k goes to
    (B - k) mod B within its pre-smooth group; other channels are fixed."""
    descriptors = config.descriptors()
    if not descriptors:
        raise ValidationError("cannot mirror a model without channel descriptors")
    B = config.num_orientation_bins
    perm = np.arange(len(descriptors))
    for i, desc in enumerate(descriptors):
        if desc.kind == "orientation":
            perm[i] = i - desc.bin + (B - desc.bin) % B
    return perm


def mirror_model(model: SoftCascadeModel, view_id: int | None = None) -> SoftCascadeModel:
    """Derive the horizontally mirrored detector: every node feature at
    (channel c, col x, row y) moves to (mirrored c, G-1-x, y); tree structure,
    weights, stage thresholds, and score range are unchanged."""
    g = model.grid_size
    perm = mirror_channel_permutation(model.channel_config)
    c, y, x = model.feature_coords()
    feats = ((perm[c] * g + y) * g + (g - 1 - x)).astype(np.int32)
    return SoftCascadeModel(
        features=feats,
        thresholds=model.thresholds.copy(),
        leaves=model.leaves.copy(),
        alphas=model.alphas.copy(),
        stage_thresholds=model.stage_thresholds.copy(),
        window_size=model.window_size,
        channel_config=model.channel_config,
        score_range=model.score_range,
        view_id=model.view_id if view_id is None else view_id,
    )


@dataclass
class LevelScan:
    """Raw grid outputs of one cascade scan over one pyramid level."""

    level: PyramidLevel
    scores: np.ndarray
    trees_evaluated: np.ndarray
    positive_votes: np.ndarray
    passed: np.ndarray
    stride: int


def scan_level(level: PyramidLevel, model: SoftCascadeModel, stride: int = 1, early_exit: bool = True, backend=None) -> LevelScan:
    """Evaluate the cascade at every grid-aligned window of one level.

    With early_exit disabled all trees run on every window; the stage
    thresholds still decide the passed flag, so the detection set is
    unchanged (only trees_evaluated grows).
    """
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    kern = backend or get_backend()
    c, y, x = model.feature_coords()
    scores, ntrees, votes, passed = kern.cascade_scan(
        np.ascontiguousarray(level.stack.data),
        np.ascontiguousarray(c),
        np.ascontiguousarray(y),
        np.ascontiguousarray(x),
        np.ascontiguousarray(model.thresholds),
        np.ascontiguousarray(model.scaled_leaves()),
        np.ascontiguousarray(model.stage_thresholds),
        model.grid_size,
        stride,
        early_exit,
    )
    return LevelScan(level=level, scores=scores, trees_evaluated=ntrees, positive_votes=votes, passed=passed, stride=stride)


def scan_to_detections(scan: LevelScan, model: SoftCascadeModel, score_threshold: float = -np.inf) -> list[Detection]:
    """Full-pass windows at or above the score threshold, as source-image
    boxes (window footprint divided back through the level's resample)."""
    shrink = model.channel_config.shrink
    level = scan.level
    dets = []
    ys, xs = np.nonzero(scan.passed & (scan.scores >= score_threshold))
    for iy, ix in zip(ys.tolist(), xs.tolist()):
        px = ix * scan.stride * shrink
        py = iy * scan.stride * shrink
        dets.append(
            Detection(
                x=px / level.scale_x,
                y=py / level.scale_y,
                w=model.window_size / level.scale_x,
                h=model.window_size / level.scale_y,
                score=float(scan.scores[iy, ix]),
                view_id=model.view_id,
                scale=level.scale,
                positive_votes=int(scan.positive_votes[iy, ix]),
            )
        )
    return dets


def detect_single_view(
    pyramid: Sequence[PyramidLevel],
    model: SoftCascadeModel,
    stride: int = 1,
    score_threshold: float = -np.inf,
    early_exit: bool = True,
    backend=None,
) -> list[Detection]:
    """Raw (unmerged) detections of one cascade over a prebuilt pyramid."""
    dets = []
    for level in pyramid:
        if level.stack.config != model.channel_config:
            raise ValidationError("pyramid was built with a different channel configuration")
        scan = scan_level(level, model, stride, early_exit, backend)
        dets.extend(scan_to_detections(scan, model, score_threshold))
    return dets


@dataclass(frozen=True)
class MirrorRef:
    """A view stored as a mirror of another trained view."""

    source: int


@dataclass
class MultiViewModel:
    """Per-view soft cascades (some stored as mirror references), per-view
    adjustment parameters, and the fusion configuration."""

    views: list[SoftCascadeModel | MirrorRef]
    adjustments: list[AdjustmentParams] = field(default_factory=list)
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def __post_init__(self):
        if not self.views:
            raise ValidationError("a multi-view model needs at least one view")
        if not self.adjustments:
            self.adjustments = [AdjustmentParams() for _ in self.views]
        if len(self.adjustments) != len(self.views):
            raise ValidationError("one adjustment per view required")
        for v in self.views:
            if isinstance(v, MirrorRef):
                if not 0 <= v.source < len(self.views) or isinstance(self.views[v.source], MirrorRef):
                    raise ValidationError(f"mirror reference to invalid view {v.source}")
        models = [v for v in self.views if isinstance(v, SoftCascadeModel)]
        if len({(m.window_size, m.channel_config.shrink) for m in models}) > 1:
            raise ValidationError("all views must share window size and shrink")

    @property
    def channel_config(self):
        return next(v for v in self.views if isinstance(v, SoftCascadeModel)).channel_config

    @property
    def window_size(self) -> int:
        return next(v for v in self.views if isinstance(v, SoftCascadeModel)).window_size

    def resolved_views(self) -> list[SoftCascadeModel]:
        """Materialize mirror references; each view's id is its slot index."""
        out = []
        for i, v in enumerate(self.views):
            if isinstance(v, MirrorRef):
                out.append(mirror_model(self.views[v.source], view_id=i))
            else:
                v.view_id = i
                out.append(v)
        return out

    def score_ranges(self) -> dict[int, tuple[float, float]]:
        return {i: m.score_range for i, m in enumerate(self.resolved_views())}

    def adjustments_by_view(self) -> dict[int, AdjustmentParams]:
        return {i: a for i, a in enumerate(self.adjustments)}


def detect_multiview(
    image: np.ndarray,
    model: MultiViewModel,
    pyramid_config: PyramidConfig | None = None,
    stride: int = 1,
    early_exit: bool = True,
    backend=None,
) -> list[Detection]:
    """Build the pyramid once, run every view's cascade over it, then apply
    re-ranking, cross-view merging, and per-view adjustment; detections come
    back sorted by the deterministic total order."""
    pyramid_config = pyramid_config or PyramidConfig(min_window=model.window_size)
    pyramid = build_pyramid(image, model.channel_config, pyramid_config, model.window_size)
    raw: list[Detection] = []
    for view in model.resolved_views():
        raw.extend(detect_single_view(pyramid, view, stride, early_exit=early_exit, backend=backend))
    raw.sort(key=total_order_key)
    return apply_fusion(raw, model.fusion, model.score_ranges(), model.adjustments_by_view())
