"""Fusion and channel-scale ablation study: score re-ranking x merging
matrix plus single- vs. multi-local-scale channel pools, reported as a
deterministic text table."""

from __future__ import annotations

import logging
from dataclasses import replace

from .boosting import TrainConfig
from .channels import ChannelConfig
from .detector import MultiViewModel, build_pyramid, detect_single_view
from .errors import ValidationError
from .evaluation import EvalConfig, evaluate
from .postprocess import MERGE_MODES, RERANK_MODES, apply_fusion
from .pyramid import PyramidConfig
from .synth import SynthDataset
from .training import train_multiview

log = logging.getLogger(__name__)


def _num_features(cfg: ChannelConfig, window_size: int) -> int:
    return cfg.num_channels * (window_size // cfg.shrink) ** 2

# Reference numbers reported for this pipeline on a public multi-view set
# (AP, %): re-ranking none/normalization/new-score/overlap/sum-of-overlap =
# 91.7/93.5/92.9/95.0/93.7 and merging greedy/combination = 91.7/93.4.
REFERENCE_RERANK = {
    "none": 91.7,
    "normalization": 93.5,
    "newscore": 92.9,
    "overlap": 95.0,
    "sumoverlap": 93.7,
}
REFERENCE_MERGE = {"greedy_nms": 91.7, "combination": 93.4}


def _raw_detections(model: MultiViewModel, dataset: SynthDataset, pyramid_config, stride, backend):
    """Unfused per-image detections, computed once and reused per fusion cell."""
    views = model.resolved_views()
    out = {}
    for rec in dataset.images:
        image = dataset.load_image(rec["file"])
        pyramid = build_pyramid(image, model.channel_config, pyramid_config, model.window_size)
        dets = []
        for view in views:
            dets.extend(detect_single_view(pyramid, view, stride, backend=backend))
        out[rec["file"]] = dets
    return out


def run_ablation(
    dataset: SynthDataset,
    test_dataset: SynthDataset | None = None,
    channel_config: ChannelConfig | None = None,
    train_config: TrainConfig | None = None,
    pyramid_config: PyramidConfig | None = None,
    eval_config: EvalConfig | None = None,
    window_size: int = 80,
    stride: int = 1,
    jitter: int = 2,
    backend=None,
) -> str:
    """Train the detector at one and two channel pre-smoothing scales, sweep
    every re-ranking x merging combination on the single-scale model, and
    return the report text.  Everything is seeded, so the numbers (not the
    runtimes) are reproducible."""
    test_dataset = test_dataset or dataset
    channel_config = channel_config or ChannelConfig()
    train_config = train_config or TrainConfig()
    pyramid_config = pyramid_config or PyramidConfig(min_window=window_size)
    eval_config = eval_config or EvalConfig()
    if len(channel_config.pre_smooth_radii) != 1:
        raise ValidationError("ablation expects a single-scale base channel config")

    annotations = test_dataset.annotations

    def train_and_scan(cfg: ChannelConfig):
        model = train_multiview(
            dataset, cfg, train_config, pyramid_config,
            window_size=window_size, jitter=jitter, backend=backend,
        )
        return model, _raw_detections(model, test_dataset, pyramid_config, stride, backend)

    log.info("training single-scale model (%d features/view)", _num_features(channel_config, window_size))
    base_model, base_raw = train_and_scan(cfg=channel_config)

    score_ranges = base_model.score_ranges()
    adjustments = base_model.adjustments_by_view()

    def ap_for(fusion):
        fused = {
            image_id: apply_fusion(dets, fusion, score_ranges, adjustments)
            for image_id, dets in base_raw.items()
        }
        return evaluate(fused, annotations, eval_config).ap

    matrix = {}
    for rerank in RERANK_MODES:
        for merge in MERGE_MODES:
            fusion = replace(base_model.fusion, rerank=rerank, merging=merge)
            matrix[rerank, merge] = ap_for(fusion)
            log.info("rerank=%s merge=%s AP=%.4f", rerank, merge, matrix[rerank, merge])

    multi_config = replace(channel_config, pre_smooth_radii=(1, 2))
    log.info("training multi-scale model (%d features/view)", _num_features(multi_config, window_size))
    multi_model, multi_raw = train_and_scan(cfg=multi_config)
    multi_fused = {
        image_id: apply_fusion(dets, multi_model.fusion, multi_model.score_ranges(), multi_model.adjustments_by_view())
        for image_id, dets in multi_raw.items()
    }
    ap_single = matrix[base_model.fusion.rerank, base_model.fusion.merging]
    ap_multi = evaluate(multi_fused, annotations, eval_config).ap

    lines = ["fusion ablation (AP on held-out set)", ""]
    ref_rr = "/".join(f"{REFERENCE_RERANK[m]:.1f}" for m in RERANK_MODES)
    ref_mg = "/".join(f"{REFERENCE_MERGE[m]:.1f}" for m in MERGE_MODES)
    lines.append(f"reference AP% ({'/'.join(RERANK_MODES)}): {ref_rr}")
    lines.append(f"reference AP% ({'/'.join(MERGE_MODES)}): {ref_mg}")
    lines.append("")
    header = f"{'rerank':<14}" + "".join(f"{m:>13}" for m in MERGE_MODES)
    lines.append(header)
    for rerank in RERANK_MODES:
        row = f"{rerank:<14}" + "".join(f"{matrix[rerank, m]:>13.4f}" for m in MERGE_MODES)
        lines.append(row)
    lines.append("")
    lines.append("channel pre-smoothing scales (default fusion):")
    lines.append(
        f"  radii {channel_config.pre_smooth_radii} "
        f"({_num_features(channel_config, window_size)} features/view): AP {ap_single:.4f}"
    )
    lines.append(
        f"  radii {multi_config.pre_smooth_radii} "
        f"({_num_features(multi_config, window_size)} features/view): AP {ap_multi:.4f}"
    )
    return "\n".join(lines)
