"""Ground-truth ingestion, greedy detection-annotation matching, average
precision, and discrete/continuous ROC curves with FPPI readouts.

File formats (whitespace-delimited text, one record per line):
  annotations:  imageId x y w h [ignore]
                imageId ellipse ra rb angle cx cy [ignore]   (converted to the
                ellipse's axis-aligned bounding rectangle at load)
  detections:   imageId x y w h score viewId
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import Detection, jaccard, total_order_key


@dataclass(frozen=True)
class GroundTruthBox:
    x: float
    y: float
    w: float
    h: float
    ignore: bool = False

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValidationError("ground-truth boxes must have positive dimensions")


@dataclass
class AnnotationSet:
    """Per-image ground-truth boxes plus a free-form annotation-style tag."""

    boxes: dict[str, list[GroundTruthBox]] = field(default_factory=dict)
    style: str = ""

    def add(self, image_id: str, box: GroundTruthBox):
        self.boxes.setdefault(image_id, []).append(box)

    def total_positives(self) -> int:
        return sum(1 for bs in self.boxes.values() for b in bs if not b.ignore)

    def image_ids(self) -> list[str]:
        return sorted(self.boxes)


@dataclass(frozen=True)
class EvalConfig:
    jaccard_threshold: float = 0.5
    fppi_points: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if not 0.0 < self.jaccard_threshold <= 1.0:
            raise ValidationError("jaccard_threshold must be in (0, 1]")


def ellipse_bounding_box(ra: float, rb: float, angle: float, cx: float, cy: float) -> tuple[float, float, float, float]:
    """Axis-aligned bounding rectangle of an ellipse with semi-axes (ra, rb)
    rotated by `angle` radians about its center."""
    hx = math.sqrt((ra * math.cos(angle)) ** 2 + (rb * math.sin(angle)) ** 2)
    hy = math.sqrt((ra * math.sin(angle)) ** 2 + (rb * math.cos(angle)) ** 2)
    return cx - hx, cy - hy, 2 * hx, 2 * hy


def load_annotations(path: str | Path, style: str = "") -> AnnotationSet:
    annotations = AnnotationSet(style=style)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            image_id = parts[0]
            if len(parts) > 1 and parts[1] == "ellipse":
                ra, rb, ang, cx, cy = (float(v) for v in parts[2:7])
                rest = parts[7:]
                x, y, w, h = ellipse_bounding_box(ra, rb, ang, cx, cy)
            else:
                x, y, w, h = (float(v) for v in parts[1:5])
                rest = parts[5:]
            ignore = bool(rest) and rest[0] == "ignore"
            annotations.add(image_id, GroundTruthBox(x=x, y=y, w=w, h=h, ignore=ignore))
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}:{lineno}: malformed annotation record: {exc}") from exc
    return annotations


def save_detections(path: str | Path, detections_by_image: dict[str, list[Detection]]):
    lines = []
    for image_id in sorted(detections_by_image):
        for d in sorted(detections_by_image[image_id], key=total_order_key):
            lines.append(f"{image_id} {d.x:.6f} {d.y:.6f} {d.w:.6f} {d.h:.6f} {d.score:.9f} {d.view_id}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_detections(path: str | Path) -> dict[str, list[Detection]]:
    out: dict[str, list[Detection]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            x, y, w, h, score = (float(v) for v in parts[1:6])
            view = int(parts[6]) if len(parts) > 6 else 0
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}:{lineno}: malformed detection record: {exc}") from exc
        out.setdefault(parts[0], []).append(Detection(x=x, y=y, w=w, h=h, score=score, view_id=view))
    return out


@dataclass(frozen=True)
class MatchedDetection:
    score: float
    label: str  # "tp" | "fp" | "ignored"
    overlap: float = 0.0  # Jaccard with the matched annotation (TPs only)


def match_detections(
    detections: list[Detection], boxes: list[GroundTruthBox], threshold: float
) -> tuple[list[MatchedDetection], list[bool]]:
    """Greedy one-to-one matching in descending score order: each detection
    takes the unmatched non-ignore annotation of highest Jaccard if it reaches
    the threshold (TP); otherwise a detection overlapping an ignore annotation
    is dropped from scoring, and anything else is an FP.  Duplicates on an
    already-matched annotation count as FPs."""
    order = sorted(range(len(detections)), key=lambda i: total_order_key(detections[i]))
    matched = [False] * len(boxes)
    labels: list[MatchedDetection] = [None] * len(detections)  # type: ignore[list-item]
    for i in order:
        d = detections[i]
        best_j, best_ov = -1, 0.0
        for j, b in enumerate(boxes):
            if b.ignore or matched[j]:
                continue
            ov = jaccard(d, b)
            if ov > best_ov:
                best_j, best_ov = j, ov
        if best_j >= 0 and best_ov >= threshold:
            matched[best_j] = True
            labels[i] = MatchedDetection(score=d.score, label="tp", overlap=best_ov)
            continue
        if any(b.ignore and jaccard(d, b) >= threshold for b in boxes):
            labels[i] = MatchedDetection(score=d.score, label="ignored")
        else:
            labels[i] = MatchedDetection(score=d.score, label="fp")
    return labels, matched


def match_all(
    detections_by_image: dict[str, list[Detection]],
    annotations: AnnotationSet,
    threshold: float,
) -> list[MatchedDetection]:
    """Match per image and pool the labels, sorted by score descending (ties
    by image id for determinism); 'ignored' labels are dropped."""
    pooled = []
    for image_id in sorted(set(detections_by_image) | set(annotations.boxes)):
        labels, _ = match_detections(
            detections_by_image.get(image_id, []), annotations.boxes.get(image_id, []), threshold
        )
        pooled.extend((lab, image_id) for lab in labels if lab.label != "ignored")
    pooled.sort(key=lambda li: (-li[0].score, li[1]))
    return [lab for lab, _ in pooled]


def average_precision(labels: list[MatchedDetection], total_positives: int) -> float:
    """Exact area under the all-points-interpolated precision-recall curve
    (precision at each recall = max precision at that recall or beyond)."""
    if total_positives < 1:
        raise ValidationError("average precision requires total_positives >= 1")
    if not labels:
        return 0.0
    tp = np.cumsum([1 if l.label == "tp" else 0 for l in labels])
    ranks = np.arange(1, len(labels) + 1)
    precision = tp / ranks
    recall = tp / total_positives
    # Interpolate precision from the right, then integrate over recall steps.
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_r = 0.0
    for p, r in zip(interp, recall):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap)


@dataclass
class RocCurve:
    false_positives: np.ndarray  # cumulative FP after each detection
    fppi: np.ndarray
    tpr: np.ndarray
    readouts: dict[float, float]  # requested FPPI point -> interpolated TPR


def roc_curves(
    labels: list[MatchedDetection],
    total_positives: int,
    image_count: int,
    mode: str = "discrete",
    fppi_points: tuple[float, ...] = (1.0,),
) -> RocCurve:
    """Score-threshold sweep: x is cumulative false positives (and FPPI), y is
    the true-positive rate — matched fraction in discrete mode, sum of matched
    Jaccard overlaps over total positives in continuous mode."""
    if mode not in ("discrete", "continuous"):
        raise ValidationError(f"unknown ROC mode {mode!r}")
    if total_positives < 1 or image_count < 1:
        raise ValidationError("roc_curves requires positives and images")
    gains = np.array([(l.overlap if mode == "continuous" else 1.0) if l.label == "tp" else 0.0 for l in labels])
    fp = np.cumsum([1 if l.label == "fp" else 0 for l in labels]).astype(float)
    tpr = np.cumsum(gains) / total_positives
    fppi = fp / image_count
    readouts = {}
    for point in fppi_points:
        readouts[point] = _interp_readout(fppi, tpr, point)
    return RocCurve(false_positives=fp, fppi=fppi, tpr=tpr, readouts=readouts)


def _interp_readout(fppi: np.ndarray, tpr: np.ndarray, point: float) -> float:
    if len(fppi) == 0:
        return 0.0
    # Prepend the origin; beyond the last point the curve is flat.
    xs = np.concatenate([[0.0], fppi])
    ys = np.concatenate([[0.0], tpr])
    if point >= xs[-1]:
        return float(ys[-1])
    return float(np.interp(point, xs, ys))


@dataclass
class EvalReport:
    ap: float
    discrete: RocCurve
    continuous: RocCurve
    total_positives: int
    image_count: int
    num_tp: int
    num_fp: int

    def format_text(self) -> str:
        lines = [
            f"images:          {self.image_count}",
            f"ground truth:    {self.total_positives}",
            f"true positives:  {self.num_tp}",
            f"false positives: {self.num_fp}",
            f"AP:              {self.ap:.4f}",
        ]
        for point, value in sorted(self.discrete.readouts.items()):
            lines.append(f"discrete TPR @ {point:g} FPPI:   {value:.4f}")
        for point, value in sorted(self.continuous.readouts.items()):
            lines.append(f"continuous TPR @ {point:g} FPPI: {value:.4f}")
        return "\n".join(lines)


def evaluate(
    detections_by_image: dict[str, list[Detection]],
    annotations: AnnotationSet,
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    labels = match_all(detections_by_image, annotations, config.jaccard_threshold)
    total = annotations.total_positives()
    image_count = max(len(annotations.boxes), 1)
    return EvalReport(
        ap=average_precision(labels, max(total, 1)),
        discrete=roc_curves(labels, max(total, 1), image_count, "discrete", config.fppi_points),
        continuous=roc_curves(labels, max(total, 1), image_count, "continuous", config.fppi_points),
        total_positives=total,
        image_count=image_count,
        num_tp=sum(1 for l in labels if l.label == "tp"),
        num_fp=sum(1 for l in labels if l.label == "fp"),
    )
