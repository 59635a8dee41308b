"""Boxes, detections, and overlap measures shared by detection, fusion, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Detection:
    """A candidate box in source-image pixel coordinates (top-left origin)."""

    x: float
    y: float
    w: float
    h: float
    score: float
    view_id: int = 0
    scale: float = 1.0
    # Number of weak classifiers that voted +1 on this window; feeds the
    # vote-count re-ranking mode.
    positive_votes: int = 0

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"detection box must have positive size, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def with_score(self, score: float) -> "Detection":
        return replace(self, score=float(score))


def total_order_key(d: Detection):
    """Deterministic total order: score descending, then view, scale, x, y."""
    return (-d.score, d.view_id, d.scale, d.x, d.y)


def intersection_area(a: Detection | tuple, b: Detection | tuple) -> float:
    ax, ay, aw, ah = _xywh(a)
    bx, by, bw, bh = _xywh(b)
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def jaccard(a, b) -> float:
    """Intersection area over union area; symmetric, 1 for identical boxes."""
    inter = intersection_area(a, b)
    ax, ay, aw, ah = _xywh(a)
    bx, by, bw, bh = _xywh(b)
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def min_area_overlap(a, b) -> float:
    """Intersection over the smaller box's area (the greedy-NMS measure)."""
    inter = intersection_area(a, b)
    ax, ay, aw, ah = _xywh(a)
    bx, by, bw, bh = _xywh(b)
    denom = min(aw * ah, bw * bh)
    return inter / denom if denom > 0 else 0.0


def _xywh(box):
    if hasattr(box, "x"):
        return box.x, box.y, box.w, box.h
    x, y, w, h = box[:4]
    return x, y, w, h
