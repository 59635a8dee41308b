"""Multi-view fusion post-processing: score re-ranking, detection merging,
and per-view detection adjustment.

Re-ranking overlap counts use the Jaccard index; merging uses
intersection-over-min-area, which is what distinguishes the greedy-NMS
variant used here from union-normalized suppression.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .geometry import Detection, jaccard, min_area_overlap, total_order_key

log = logging.getLogger(__name__)

RERANK_MODES = ("none", "normalization", "newscore", "overlap", "sumoverlap")
MERGE_MODES = ("greedy_nms", "combination")


@dataclass(frozen=True)
class FusionConfig:
    rerank: str = "normalization"
    rerank_overlap_threshold: float = 0.65
    merging: str = "greedy_nms"
    merge_overlap_threshold: float = 0.65
    score_threshold: float = 0.0
    combination_weighting: str = "score"  # "score" | "uniform"

    def __post_init__(self):
        if self.rerank not in RERANK_MODES:
            raise ConfigError(f"unknown re-ranking mode {self.rerank!r}")
        if self.merging not in MERGE_MODES:
            raise ConfigError(f"unknown merging mode {self.merging!r}")
        for thr in (self.rerank_overlap_threshold, self.merge_overlap_threshold):
            if not 0.0 < thr <= 1.0:
                raise ConfigError("overlap thresholds must lie in (0, 1]")
        if self.combination_weighting not in ("score", "uniform"):
            raise ConfigError("combination_weighting must be 'score' or 'uniform'")


def rerank_normalization(detections: list[Detection], score_ranges: dict[int, tuple[float, float]]) -> list[Detection]:
    """Map each detection's score into [0, 1] by its view's recorded training
    score range, clamped at both ends.  A degenerate range maps to 1."""
    out = []
    degenerate_views = set()
    for d in detections:
        lo, hi = score_ranges[d.view_id]
        if hi <= lo:
            degenerate_views.add(d.view_id)
            out.append(d.with_score(1.0))
        else:
            out.append(d.with_score(min(max((d.score - lo) / (hi - lo), 0.0), 1.0)))
    for v in sorted(degenerate_views):
        log.warning("view %d has a degenerate score range; its scores all map to 1", v)
    return out


def rerank_newscore(detections: list[Detection]) -> list[Detection]:
    """Replace the boosted score with the count of weak classifiers that voted
    positively on the window."""
    return [d.with_score(float(d.positive_votes)) for d in detections]


def overlap_rank_scores(scores, counts, tie_keys=None) -> list[float]:
    """Core overlap re-ranking arithmetic: each score is multiplied by rank/N,
    where entries are ranked 1..N ascending by overlap count (ties broken by
    ``tie_keys``, or input order)."""
    n = len(scores)
    keys = tie_keys if tie_keys is not None else [()] * n
    order = sorted(range(n), key=lambda i: (counts[i],) + tuple(keys[i]))
    rank = [0] * n
    for r, i in enumerate(order, start=1):
        rank[i] = r
    return [s * rank[i] / n for i, s in enumerate(scores)]


def rerank_overlap(detections: list[Detection], threshold: float) -> list[Detection]:
    """Multiply each score by rank/N, where detections are ranked ascending by
    their count of Jaccard-overlapping neighbors (ties ordered by the
    deterministic total order)."""
    if not detections:
        return []
    counts = [_overlap_count(detections, i, threshold) for i in range(len(detections))]
    new_scores = overlap_rank_scores(
        [d.score for d in detections], counts, [total_order_key(d) for d in detections]
    )
    return [d.with_score(s) for d, s in zip(detections, new_scores)]


def rerank_sum_overlap(detections: list[Detection], threshold: float) -> list[Detection]:
    """Replace each score with the sum of scores of all detections (itself
    included) whose Jaccard overlap reaches the threshold."""
    out = []
    for i, d in enumerate(detections):
        total = d.score
        for j, e in enumerate(detections):
            if j != i and jaccard(d, e) >= threshold:
                total += e.score
        out.append(d.with_score(total))
    return out


def _overlap_count(detections, i, threshold):
    return sum(1 for j, e in enumerate(detections) if j != i and jaccard(detections[i], e) >= threshold)


def nms_greedy(detections: list[Detection], threshold: float) -> list[Detection]:
    """Greedy suppression in descending score order using the min-area overlap
    measure; kept detections retain their scores."""
    kept: list[Detection] = []
    for d in sorted(detections, key=total_order_key):
        if all(min_area_overlap(d, k) < threshold for k in kept):
            kept.append(d)
    return kept


def merge_combination(
    detections: list[Detection], threshold: float, weighting: str = "score"
) -> list[Detection]:
    """Cluster detections greedily by descending score (each detection joins
    the highest-scored seed it overlaps by min-area >= threshold, else seeds a
    new cluster) and emit one averaged box per cluster, score = cluster max."""
    seeds: list[Detection] = []
    clusters: list[list[Detection]] = []
    for d in sorted(detections, key=total_order_key):
        for s, members in zip(seeds, clusters):
            if min_area_overlap(d, s) >= threshold:
                members.append(d)
                break
        else:
            seeds.append(d)
            clusters.append([d])

    out = []
    for seed, members in zip(seeds, clusters):
        wts = np.array([m.score for m in members]) if weighting == "score" else np.ones(len(members))
        if wts.sum() <= 0:
            wts = np.ones(len(members))
        wts = wts / wts.sum()
        coords = np.array([[m.x, m.y, m.w, m.h] for m in members])
        x, y, w, h = wts @ coords
        out.append(replace(seed, x=x, y=y, w=w, h=h))
    return out


@dataclass(frozen=True)
class AdjustmentParams:
    """Constant per-view box correction: center shift as a fraction of box
    size, plus width/height scaling about the center."""

    dx: float = 0.0
    dy: float = 0.0
    sw: float = 1.0
    sh: float = 1.0

    def __post_init__(self):
        if self.sw <= 0 or self.sh <= 0:
            raise ConfigError("adjustment scale factors must be positive")

    @property
    def is_identity(self) -> bool:
        return self == AdjustmentParams()

    def inverse(self) -> "AdjustmentParams":
        return AdjustmentParams(dx=-self.dx / self.sw, dy=-self.dy / self.sh, sw=1.0 / self.sw, sh=1.0 / self.sh)


def adjust_detections(detections: list[Detection], params_by_view: dict[int, AdjustmentParams]) -> list[Detection]:
    """Shift each box's center by (dx*w, dy*h) and rescale it about its center
    by (sw, sh); scores and views unchanged.  Views without parameters are
    left untouched."""
    out = []
    for d in detections:
        p = params_by_view.get(d.view_id)
        if p is None or p.is_identity:
            out.append(d)
            continue
        cx = d.x + d.w / 2.0 + p.dx * d.w
        cy = d.y + d.h / 2.0 + p.dy * d.h
        nw = p.sw * d.w
        nh = p.sh * d.h
        out.append(replace(d, x=cx - nw / 2.0, y=cy - nh / 2.0, w=nw, h=nh))
    return out


def apply_fusion(
    detections: list[Detection],
    fusion: FusionConfig,
    score_ranges: dict[int, tuple[float, float]],
    adjustments: dict[int, AdjustmentParams],
) -> list[Detection]:
    """Full post-processing pipeline: re-rank, merge, adjust, threshold, and
    sort by the deterministic total order."""
    if fusion.rerank == "normalization":
        detections = rerank_normalization(detections, score_ranges)
    elif fusion.rerank == "newscore":
        detections = rerank_newscore(detections)
    elif fusion.rerank == "overlap":
        detections = rerank_overlap(detections, fusion.rerank_overlap_threshold)
    elif fusion.rerank == "sumoverlap":
        detections = rerank_sum_overlap(detections, fusion.rerank_overlap_threshold)

    if fusion.merging == "greedy_nms":
        detections = nms_greedy(detections, fusion.merge_overlap_threshold)
    else:
        detections = merge_combination(detections, fusion.merge_overlap_threshold, fusion.combination_weighting)

    detections = adjust_detections(detections, adjustments)
    detections = [d for d in detections if d.score >= fusion.score_threshold]
    return sorted(detections, key=total_order_key)
