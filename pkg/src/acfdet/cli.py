"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 validation error.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import ablate as ablate_mod
from . import bench as bench_mod
from .backend import available_backends
from .channels import compute_channels, dump_channels
from .config import RunConfig
from .detector import detect_multiview
from .errors import ConfigError, ModelFormatError, ValidationError
from .evaluation import evaluate, load_annotations, load_detections, save_detections
from .modelio import load_model, save_model
from .synth import load_image_png, load_synth_dataset, save_image_png, synth_generate
from .training import train_multiview

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _translate_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            raise _exit_with_message(EXIT_CONFIG, exc)
        except (ModelFormatError, ValidationError) as exc:
            raise _exit_with_message(EXIT_VALIDATION, exc)
        except OSError as exc:
            raise _exit_with_message(EXIT_IO, exc)

    return wrapper


def _exit_with_message(code: int, exc: Exception) -> SystemExit:
    click.echo(f"error: {exc}", err=True)
    return SystemExit(code)


def _load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.load(path)
    except OSError as exc:
        raise _exit_with_message(EXIT_IO, exc)


def _collect_images(inputs: tuple[str, ...]) -> list[tuple[str, Path]]:
    """(image id, file path) pairs from files and/or directories.  A synthetic
    dataset directory contributes its positive images under the ids used in
    its annotation file."""
    out = []
    for raw in inputs:
        path = Path(raw)
        if path.is_dir():
            if (path / "manifest.json").is_file():
                ds = load_synth_dataset(path)
                out.extend((rec["file"], path / rec["file"]) for rec in ds.images)
            else:
                files = sorted(
                    p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
                )
                out.extend((p.name, p) for p in files)
        else:
            out.append((path.name, path))
    if not out:
        raise ValidationError("no input images found")
    return out


def _draw_boxes(image: np.ndarray, detections) -> np.ndarray:
    annotated = image.copy()
    h, w = annotated.shape[:2]
    for d in detections:
        x0, y0 = max(int(round(d.x)), 0), max(int(round(d.y)), 0)
        x1, y1 = min(int(round(d.x + d.w)), w - 1), min(int(round(d.y + d.h)), h - 1)
        if x1 <= x0 or y1 <= y0:
            continue
        color = np.array([0.1, 1.0, 0.2])
        annotated[y0, x0 : x1 + 1] = color
        annotated[y1, x0 : x1 + 1] = color
        annotated[y0 : y1 + 1, x0] = color
        annotated[y0 : y1 + 1, x1] = color
    return annotated


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose: bool):
    """Multi-view channel-feature detector toolkit."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(), help="Run configuration YAML.")
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Output dataset directory.")
@click.option("--seed", type=int, default=None, help="Override the dataset RNG seed.")
@click.option("--images", type=int, default=None, help="Override the positive image count.")
@_translate_errors
def synth(config_path, out_dir, seed, images):
    """Generate a synthetic detection dataset with yaw-labelled targets."""
    cfg = _load_run_config(config_path).synth
    if seed is not None:
        cfg = replace(cfg, rng_seed=seed)
    if images is not None:
        cfg = replace(cfg, image_count=images)
    annotations = synth_generate(cfg, out_dir)
    total = annotations.total_positives()
    click.echo(f"wrote {cfg.image_count} positive images ({total} targets), "
               f"{cfg.negative_image_count} negatives to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), help="Run configuration YAML.")
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Training dataset directory.")
@click.option("--out", "model_path", type=click.Path(), required=True, help="Output model file.")
@click.option("--trees", type=int, default=None, help="Override the number of weak classifiers.")
@_translate_errors
def train(config_path, data_dir, model_path, trees):
    """Train the multi-view cascade model on a synthetic dataset."""
    run = _load_run_config(config_path)
    train_cfg = run.train if trees is None else replace(run.train, num_trees=trees)
    dataset = load_synth_dataset(data_dir)
    model = train_multiview(
        dataset,
        channel_config=run.channel,
        train_config=train_cfg,
        pyramid_config=run.pyramid,
        fusion=run.fusion,
        window_size=run.window_size,
        jitter=run.jitter,
    )
    save_model(model, model_path)
    click.echo(f"trained {len(model.views)} views ({train_cfg.num_trees} trees each) -> {model_path}")


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path())
@click.option("--model", "model_path", type=click.Path(), required=True, help="Trained model file.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Output detection list.")
@click.option("--rerank", type=str, default=None, help="Override the re-ranking mode.")
@click.option("--merging", type=str, default=None, help="Override the merging mode.")
@click.option("--score-threshold", type=float, default=None, help="Override the final score threshold.")
@click.option("--stride", type=int, default=1, show_default=True, help="Window stride in pooled cells.")
@click.option("--render", "render_dir", type=click.Path(), default=None,
              help="Also write annotated copies of the inputs to this directory.")
@_translate_errors
def detect(inputs, model_path, out_path, rerank, merging, score_threshold, stride, render_dir):
    """Run the detector over images, directories, or a dataset directory."""
    model = load_model(model_path)
    overrides = {}
    if rerank is not None:
        overrides["rerank"] = rerank
    if merging is not None:
        overrides["merging"] = merging
    if score_threshold is not None:
        overrides["score_threshold"] = score_threshold
    if overrides:
        model.fusion = replace(model.fusion, **overrides)
    results = {}
    for image_id, path in _collect_images(inputs):
        image = load_image_png(path)
        detections = detect_multiview(image, model, stride=stride)
        results[image_id] = detections
        log.info("%s: %d detections", image_id, len(detections))
        if render_dir is not None:
            out = Path(render_dir) / Path(image_id).name
            out.parent.mkdir(parents=True, exist_ok=True)
            save_image_png(_draw_boxes(image, detections), out)
    save_detections(out_path, results)
    total = sum(len(v) for v in results.values())
    click.echo(f"{total} detections over {len(results)} images -> {out_path}")


@main.command("eval")
@click.option("--detections", "det_path", type=click.Path(), required=True, help="Detection list file.")
@click.option("--annotations", "ann_path", type=click.Path(), required=True, help="Ground-truth file.")
@click.option("--config", "config_path", type=click.Path(), help="Run configuration YAML.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write the report here.")
@_translate_errors
def eval_cmd(det_path, ann_path, config_path, out_path):
    """Score a detection list against ground truth (AP and ROC readouts)."""
    cfg = _load_run_config(config_path).eval
    report = evaluate(load_detections(det_path), load_annotations(ann_path), cfg)
    text = report.format_text()
    click.echo(text)
    if out_path is not None:
        Path(out_path).write_text(text + "\n")


@main.command()
@click.argument("image_path", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Output directory for channel images.")
@click.option("--config", "config_path", type=click.Path(), help="Run configuration YAML.")
@_translate_errors
def channels(image_path, out_dir, config_path):
    """Dump every feature channel of one image as a grayscale PNG."""
    cfg = _load_run_config(config_path).channel
    stack = compute_channels(load_image_png(image_path), cfg)
    files = dump_channels(stack, out_dir)
    click.echo(f"wrote {len(files)} channel images to {out_dir}")


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path())
@click.option("--model", "model_path", type=click.Path(), required=True, help="Trained model file.")
@click.option("--threads", type=int, default=4, show_default=True, help="Thread count for the multi-threaded rows.")
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--limit", type=int, default=8, show_default=True, help="Benchmark at most this many images.")
@_translate_errors
def bench(inputs, model_path, threads, stride, limit):
    """Measure scan throughput and cascade rejection behavior per backend."""
    model = load_model(model_path)
    images = [load_image_png(path) for _, path in _collect_images(inputs)[:limit]]
    thread_counts = (1,) if threads <= 1 else (1, threads)
    rows = bench_mod.bench_images(
        model, images, threads=thread_counts, backends=available_backends(), stride=stride
    )
    num_trees = model.resolved_views()[0].num_trees
    click.echo(bench_mod.format_report(rows, num_trees))


@main.command()
@click.option("--config", "config_path", type=click.Path(), help="Run configuration YAML.")
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Training dataset directory.")
@click.option("--test-data", "test_dir", type=click.Path(), default=None,
              help="Held-out dataset directory (defaults to the training data).")
@click.option("--trees", type=int, default=None, help="Override the number of weak classifiers.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write the report here.")
@_translate_errors
def ablate(config_path, data_dir, test_dir, trees, out_path):
    """Run the fusion-mode and channel-scale ablation study."""
    run = _load_run_config(config_path)
    train_cfg = run.train if trees is None else replace(run.train, num_trees=trees)
    dataset = load_synth_dataset(data_dir)
    test_dataset = load_synth_dataset(test_dir) if test_dir else None
    text = ablate_mod.run_ablation(
        dataset,
        test_dataset=test_dataset,
        channel_config=run.channel,
        train_config=train_cfg,
        pyramid_config=run.pyramid,
        eval_config=run.eval,
        window_size=run.window_size,
        stride=run.stride,
        jitter=run.jitter,
    )
    click.echo(text)
    if out_path is not None:
        Path(out_path).write_text(text + "\n")


if __name__ == "__main__":
    main()
