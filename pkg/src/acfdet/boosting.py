"""Boosted soft-cascade training: depth-2 trees over quantized channel
features, discrete AdaBoost, per-stage rejection threshold calibration, and
bootstrap hard-negative mining."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backend import get_backend
from .channels import ChannelConfig, compute_channels
from .errors import ConfigError, ValidationError
from .pyramid import PyramidConfig, resample_bilinear

log = logging.getLogger(__name__)

EPS_CLAMP = 1e-6
CALIBRATION_MARGIN = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    num_trees: int = 2048
    threshold_quantization: int = 256
    bootstrap_schedule: tuple[int, ...] = (64, 256, 1024)
    negatives_per_round: int = 1000
    rejection_quantile: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bootstrap_schedule", tuple(int(t) for t in self.bootstrap_schedule))
        if self.num_trees < 1:
            raise ConfigError("num_trees must be >= 1")
        if not 2 <= self.threshold_quantization <= 256:
            raise ConfigError("threshold_quantization must be in [2, 256]")
        sched = self.bootstrap_schedule
        if list(sched) != sorted(set(sched)) or any(t < 1 for t in sched):
            raise ConfigError("bootstrap_schedule must be strictly increasing and positive")
        if sched and sched[-1] >= self.num_trees:
            raise ConfigError("bootstrap_schedule entries must be < num_trees")
        if not 0.0 <= self.rejection_quantile < 1.0:
            raise ConfigError("rejection_quantile must be in [0, 1)")


@dataclass(frozen=True)
class DepthTwoTree:
    """Root plus two child splits; evaluation makes exactly two comparisons.

    features/thresholds are (root, left, right); leaves are (left-left,
    left-right, right-left, right-right) with values in {-1, +1}.
    """

    features: tuple[int, int, int]
    thresholds: tuple[float, float, float]
    leaves: tuple[float, float, float, float]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on feature rows (n, d) or a single vector; returns +-1."""
        single = x.ndim == 1
        X = x[None] if single else x
        f, t, lv = self.features, self.thresholds, self.leaves
        go_left = X[:, f[0]] < t[0]
        out = np.where(
            go_left,
            np.where(X[:, f[1]] < t[1], lv[0], lv[1]),
            np.where(X[:, f[2]] < t[2], lv[2], lv[3]),
        )
        return out[0] if single else out


@dataclass
class SoftCascadeModel:
    """Ordered weighted depth-2 trees with a rejection threshold per stage.

    Tree node features are flat indices into the window's channel stack,
    flattened channel-major then row-major (index = (c*G + y)*G + x with
    G = window_size // shrink)."""

    features: np.ndarray  # (T, 3) int32 flat feature indices
    thresholds: np.ndarray  # (T, 3) float64
    leaves: np.ndarray  # (T, 4) float64, values in {-1, +1}
    alphas: np.ndarray  # (T,) float64, > 0
    stage_thresholds: np.ndarray  # (T,) float64
    window_size: int
    channel_config: ChannelConfig
    score_range: tuple[float, float]
    view_id: int = 0

    def __post_init__(self):
        T = self.features.shape[0]
        shapes = (self.thresholds.shape, self.leaves.shape, self.alphas.shape, self.stage_thresholds.shape)
        if shapes != ((T, 3), (T, 4), (T,), (T,)):
            raise ValidationError("inconsistent tree array shapes")
        if np.any(self.alphas <= 0):
            raise ValidationError("tree weights must be positive")
        if self.window_size % self.channel_config.shrink != 0:
            raise ValidationError("window_size must be divisible by shrink")

    @property
    def num_trees(self) -> int:
        return self.features.shape[0]

    @property
    def grid_size(self) -> int:
        return self.window_size // self.channel_config.shrink

    def feature_coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Decompose flat node feature indices into (channel, row, col) arrays."""
        g = self.grid_size
        c, rem = np.divmod(self.features, g * g)
        y, x = np.divmod(rem, g)
        return c.astype(np.int32), y.astype(np.int32), x.astype(np.int32)

    def scaled_leaves(self) -> np.ndarray:
        return self.leaves * self.alphas[:, None]

    def tree(self, t: int) -> DepthTwoTree:
        return DepthTwoTree(
            features=tuple(int(v) for v in self.features[t]),
            thresholds=tuple(float(v) for v in self.thresholds[t]),
            leaves=tuple(float(v) for v in self.leaves[t]),
        )


@dataclass(frozen=True)
class CascadeResult:
    score: float
    rejected_at: int | None  # stage index of the first threshold violation
    trees_evaluated: int
    positive_votes: int

    @property
    def passed(self) -> bool:
        return self.rejected_at is None


def evaluate_cascade(model: SoftCascadeModel, features: np.ndarray, use_thresholds: bool = True) -> CascadeResult:
    """Evaluate the cascade on one window's flattened features, early-exiting
    at the first stage whose cumulative score falls below its threshold."""
    score = 0.0
    votes = 0
    for t in range(model.num_trees):
        h = float(model.tree(t)(features))
        score += model.alphas[t] * h
        if h > 0:
            votes += 1
        if use_thresholds and score < model.stage_thresholds[t]:
            return CascadeResult(score=score, rejected_at=t, trees_evaluated=t + 1, positive_votes=votes)
    return CascadeResult(score=score, rejected_at=None, trees_evaluated=model.num_trees, positive_votes=votes)


def quantize_features(X: np.ndarray, num_bins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-feature linear binning into [0, num_bins).  Returns (Q, lo, step);
    constant features get step 0 and collapse to bin 0."""
    if not np.isfinite(X).all():
        raise ValidationError("features must be finite")
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    step = (hi - lo) / num_bins
    return quantize_apply(X, lo, step, num_bins), lo, step


def quantize_apply(X: np.ndarray, lo: np.ndarray, step: np.ndarray, num_bins: int) -> np.ndarray:
    safe_step = np.where(step > 0, step, 1.0)
    q = np.floor((X - lo) / safe_step)
    q = np.where(step > 0, np.clip(q, 0, num_bins - 1), 0.0)
    return q.astype(np.uint8)


def raw_threshold(bin_index: int, feature: int, lo: np.ndarray, step: np.ndarray) -> float:
    """Raw-value threshold equivalent to the bin split ``bin <= bin_index``."""
    if bin_index < 0:
        return -np.inf
    return float(lo[feature] + (bin_index + 1) * step[feature])


def _majority(w: np.ndarray, y: np.ndarray, sel: np.ndarray, default: float) -> float:
    if not sel.any():
        return default
    pos = w[sel][y[sel] > 0].sum()
    neg = w[sel][y[sel] < 0].sum()
    return 1.0 if pos >= neg else -1.0


def train_depth2_tree(
    Q: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    num_bins: int,
    lo: np.ndarray,
    step: np.ndarray,
    idx: np.ndarray | None = None,
    backend=None,
) -> DepthTwoTree:
    """Fit a depth-2 tree: the root is the minimum-weighted-error stump, each
    child the best stump on its subset, leaves the weighted-majority class.
    Ties go to the lowest feature index, then the lowest threshold.

    Degenerate subsets (empty or pure) become a leaf-equivalent split whose
    two leaves output the same class.
    """
    if np.any(w < 0) or w.sum() <= 0:
        raise ValidationError("weights must be non-negative with positive sum")
    kern = backend or get_backend()
    y8 = y.astype(np.int8)
    all_idx = np.arange(Q.shape[0], dtype=np.int64) if idx is None else np.asarray(idx, dtype=np.int64)

    f0, b0, _ = kern.best_stump(Q, w, y8, all_idx, num_bins)
    root_mask = Q[all_idx, f0] <= b0
    parent_majority = _majority(w, y, np.isin(np.arange(Q.shape[0]), all_idx), 1.0) if all_idx.size else 1.0

    feats = [f0, 0, 0]
    bins = [b0, -1, -1]
    leaves = [parent_majority] * 4
    for side, child_idx in enumerate((all_idx[root_mask], all_idx[~root_mask])):
        if child_idx.size == 0:
            continue
        sel = np.zeros(Q.shape[0], dtype=bool)
        sel[child_idx] = True
        child_majority = _majority(w, y, sel, parent_majority)
        pure = (y[child_idx] > 0).all() or (y[child_idx] < 0).all()
        if pure:
            leaves[2 * side] = leaves[2 * side + 1] = child_majority
            continue
        fc, bc, _ = kern.best_stump(Q, w, y8, child_idx, num_bins)
        feats[1 + side] = fc
        bins[1 + side] = bc
        left_sel = sel & (Q[:, fc] <= bc)
        leaves[2 * side] = _majority(w, y, left_sel, child_majority)
        leaves[2 * side + 1] = _majority(w, y, sel & ~left_sel, child_majority)

    return DepthTwoTree(
        features=tuple(feats),
        thresholds=tuple(raw_threshold(b, f, lo, step) for f, b in zip(feats, bins)),
        leaves=tuple(leaves),
    )


def cumulative_scores(model: SoftCascadeModel, X: np.ndarray) -> np.ndarray:
    """Per-sample cumulative cascade score after each stage, shape (n, T)."""
    n = X.shape[0]
    out = np.empty((n, model.num_trees))
    acc = np.zeros(n)
    for t in range(model.num_trees):
        acc = acc + model.alphas[t] * model.tree(t)(X)
        out[:, t] = acc
    return out


def calibrate_soft_cascade(model: SoftCascadeModel, positives: np.ndarray, q: float) -> np.ndarray:
    """Stage thresholds from calibration positives: at each stage, the
    empirical q-quantile (order statistic floor(q*n)) of the positives'
    cumulative scores minus a small margin.  q = 0 keeps every calibration
    positive alive through the full cascade."""
    if positives.shape[0] < 1:
        raise ValidationError("calibration requires at least one positive")
    if not 0.0 <= q < 1.0:
        raise ConfigError("rejection quantile must be in [0, 1)")
    cum = cumulative_scores(model, positives)
    n = positives.shape[0]
    k = min(int(np.floor(q * n)), n - 1)
    ordered = np.sort(cum, axis=0)
    return ordered[k, :] - CALIBRATION_MARGIN


def window_features(window: np.ndarray, channel_config: ChannelConfig, window_size: int) -> np.ndarray:
    """Flattened channel features of one sample window (resized first)."""
    resized = np.clip(resample_bilinear(window, window_size, window_size), 0.0, 1.0)
    return compute_channels(resized, channel_config).data.ravel()


class NegativeImageSource:
    """Supplies negative training windows: random crops initially, then hard
    negatives mined by scanning full images with the interim cascade."""

    def __init__(self, images: Sequence[np.ndarray]):
        if not images:
            raise ValidationError("negative source requires at least one image")
        self.images = list(images)

    def sample_windows(self, count: int, window_size: int, channel_config: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
        feats = []
        for _ in range(count):
            img = self.images[rng.integers(len(self.images))]
            h, w = img.shape[:2]
            side = int(rng.integers(window_size, min(h, w) + 1)) if min(h, w) > window_size else min(h, w)
            y0 = int(rng.integers(0, h - side + 1))
            x0 = int(rng.integers(0, w - side + 1))
            feats.append(window_features(img[y0 : y0 + side, x0 : x0 + side], channel_config, window_size))
        return np.array(feats)

    def mine_hard_negatives(
        self,
        model: SoftCascadeModel,
        count: int,
        pyramid_config: PyramidConfig,
        backend=None,
    ) -> np.ndarray:
        """False positives of the interim cascade on the negative images:
        top-scored full-pass windows after greedy suppression, re-extracted
        as resized crops.  May return fewer than ``count`` rows."""
        from .detector import detect_single_view
        from .postprocess import nms_greedy
        from .pyramid import build_pyramid

        candidates = []
        for img_i, img in enumerate(self.images):
            pyr = build_pyramid(img, model.channel_config, pyramid_config, model.window_size)
            dets = detect_single_view(pyr, model, backend=backend)
            for d in nms_greedy(dets, 0.65):
                candidates.append((d.score, img_i, d))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2].x, c[2].y, c[2].scale))
        feats = []
        for _, img_i, d in candidates[:count]:
            img = self.images[img_i]
            h, w = img.shape[:2]
            x0, y0 = int(round(max(d.x, 0))), int(round(max(d.y, 0)))
            x1, y1 = int(round(min(d.x + d.w, w))), int(round(min(d.y + d.h, h)))
            if x1 - x0 < 2 or y1 - y0 < 2:
                continue
            feats.append(window_features(img[y0:y1, x0:x1], model.channel_config, model.window_size))
        return np.array(feats) if feats else np.empty((0, 0))


def adaboost_train(
    positive_windows: Sequence[np.ndarray] | np.ndarray,
    negative_source: "NegativeImageSource | np.ndarray",
    train_config: TrainConfig,
    channel_config: ChannelConfig,
    window_size: int = 80,
    pyramid_config: PyramidConfig | None = None,
    view_id: int = 0,
    backend=None,
) -> SoftCascadeModel:
    """Discrete AdaBoost over aggregate channel features with soft-cascade
    calibration and bootstrap hard-negative mining at the configured rounds.

    ``positive_windows`` may be images (resized to the window) or an (n, d)
    feature matrix that matches the channel configuration.  Negatives may be
    given as a fixed (n, d) feature matrix instead of an image source, in
    which case no bootstrap mining happens.
    """
    kern = backend or get_backend()
    rng = np.random.default_rng(train_config.rng_seed)
    pyramid_config = pyramid_config or PyramidConfig(min_window=window_size)
    nbins = train_config.threshold_quantization

    if isinstance(positive_windows, np.ndarray) and positive_windows.ndim == 2:
        Xp = np.asarray(positive_windows, dtype=np.float64)
    else:
        Xp = np.array([window_features(wd, channel_config, window_size) for wd in positive_windows])
    if Xp.shape[0] < 1:
        raise ValidationError("training requires at least one positive window")
    expected_d = channel_config.num_channels * (window_size // channel_config.shrink) ** 2
    if Xp.shape[1] != expected_d:
        raise ValidationError(f"feature length {Xp.shape[1]} does not match config ({expected_d})")

    if isinstance(negative_source, np.ndarray):
        Xn = np.asarray(negative_source, dtype=np.float64)
        negative_source = None
    else:
        Xn = negative_source.sample_windows(train_config.negatives_per_round, window_size, channel_config, rng)
    if Xn.shape[0] < 1:
        raise ValidationError("training requires at least one negative window")
    X = np.vstack([Xp, Xn])
    y = np.concatenate([np.ones(len(Xp)), -np.ones(len(Xn))])
    # Bin edges are frozen from the initial sample; bootstrapped negatives are
    # clipped into them so trained thresholds stay stable across rounds.
    Q, lo, step = quantize_features(X, nbins)

    n = X.shape[0]
    F = np.zeros(n)
    w = np.full(n, 1.0 / n)
    trees: list[DepthTwoTree] = []
    alphas: list[float] = []

    for t in range(train_config.num_trees):
        tree = train_depth2_tree(Q, y, w, nbins, lo, step, backend=kern)
        h = tree(X)
        eps = float(w[h != y].sum())
        eps = min(max(eps, EPS_CLAMP), 0.5 - EPS_CLAMP)
        alpha = 0.5 * np.log((1.0 - eps) / eps)
        trees.append(tree)
        alphas.append(alpha)
        F = F + alpha * h
        # Shift by the max margin before exponentiating; the normalized
        # weights are identical and the exponent cannot overflow.
        m = -y * F
        w = np.exp(m - m.max())
        w /= w.sum()

        if negative_source is not None and (t + 1) in train_config.bootstrap_schedule:
            interim = _assemble(trees, alphas, window_size, channel_config, view_id)
            interim.stage_thresholds = calibrate_soft_cascade(interim, Xp, train_config.rejection_quantile)
            mined = negative_source.mine_hard_negatives(
                interim, train_config.negatives_per_round, pyramid_config, backend=kern
            )
            if mined.size == 0:
                log.info("bootstrap at %d trees: no false positives mined", t + 1)
                continue
            log.info("bootstrap at %d trees: added %d hard negatives", t + 1, mined.shape[0])
            X = np.vstack([X, mined])
            Q = np.vstack([Q, quantize_apply(mined, lo, step, nbins)])
            y = np.concatenate([y, -np.ones(mined.shape[0])])
            Fm = np.zeros(mined.shape[0])
            for tr, a in zip(trees, alphas):
                Fm += a * tr(mined)
            F = np.concatenate([F, Fm])
            m = -y * F
            w = np.exp(m - m.max())
            w /= w.sum()

    model = _assemble(trees, alphas, window_size, channel_config, view_id)
    model.stage_thresholds = calibrate_soft_cascade(model, Xp, train_config.rejection_quantile)
    pos_scores = cumulative_scores(model, Xp)[:, -1]
    model.score_range = (float(pos_scores.min()), float(pos_scores.max()))
    return model


def _assemble(trees: list[DepthTwoTree], alphas: list[float], window_size: int, channel_config: ChannelConfig, view_id: int) -> SoftCascadeModel:
    T = len(trees)
    return SoftCascadeModel(
        features=np.array([t.features for t in trees], dtype=np.int32).reshape(T, 3),
        thresholds=np.array([t.thresholds for t in trees]).reshape(T, 3),
        leaves=np.array([t.leaves for t in trees]).reshape(T, 4),
        alphas=np.array(alphas),
        stage_thresholds=np.full(T, -np.inf),
        window_size=window_size,
        channel_config=channel_config,
        score_range=(0.0, 1.0),
        view_id=view_id,
    )
