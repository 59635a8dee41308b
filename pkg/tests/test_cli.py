import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from acfdet.cli import EXIT_CONFIG, EXIT_IO, EXIT_VALIDATION, main
from acfdet.evaluation import load_detections
from acfdet.modelio import load_model
from acfdet.synth import save_image_png


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def tiny_yaml(tmp_path_factory):
    """A miniature run configuration so the full CLI pipeline stays fast."""
    cfg = {
        "window_size": 32,
        "jitter": 1,
        "pyramid": {"min_window": 32, "scales_per_octave": 4},
        "train": {"num_trees": 8, "bootstrap_schedule": [4], "negatives_per_round": 60},
        "synth": {
            "rng_seed": 11,
            "image_count": 6,
            "image_size": 96,
            "scale_range": [36, 56],
            "targets_per_image": [1, 2],
            "negative_image_count": 3,
        },
    }
    path = tmp_path_factory.mktemp("cfg") / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


@pytest.fixture(scope="module")
def work(tmp_path_factory, runner, tiny_yaml):
    """Run synth -> train once and share the artifacts across CLI tests."""
    root = tmp_path_factory.mktemp("cliwork")
    data = root / "data"
    model = root / "model.bin"
    res = runner.invoke(main, ["synth", "--config", tiny_yaml, "--out", str(data)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["train", "--config", tiny_yaml, "--data", str(data), "--out", str(model)])
    assert res.exit_code == 0, res.output
    return {"root": root, "data": data, "model": model}


def test_synth_output(work):
    assert (work["data"] / "manifest.json").is_file()
    assert (work["data"] / "annotations.txt").is_file()


def test_train_output(work):
    model = load_model(work["model"])
    assert len(model.views) == 6
    assert model.resolved_views()[0].num_trees == 8


def test_detect_eval_round_trip(runner, work, tmp_path):
    dets = tmp_path / "dets.txt"
    render = tmp_path / "render"
    res = runner.invoke(
        main,
        ["detect", str(work["data"]), "--model", str(work["model"]), "--out", str(dets),
         "--score-threshold", "-1e9", "--render", str(render)],
    )
    assert res.exit_code == 0, res.output
    assert load_detections(dets)
    assert len(list(render.iterdir())) == 6

    report = tmp_path / "report.txt"
    res = runner.invoke(
        main,
        ["eval", "--detections", str(dets), "--annotations", str(work["data"] / "annotations.txt"),
         "--out", str(report)],
    )
    assert res.exit_code == 0, res.output
    assert "AP:" in res.output
    assert report.read_text().strip() in res.output


def test_channels_command(runner, work, tmp_path):
    rng = np.random.default_rng(0)
    img = tmp_path / "img.png"
    save_image_png(rng.uniform(size=(48, 48, 3)), img)
    out = tmp_path / "ch"
    res = runner.invoke(main, ["channels", str(img), "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert len(list(out.iterdir())) == 10


def test_bench_command(runner, work):
    res = runner.invoke(
        main,
        ["bench", str(work["data"]), "--model", str(work["model"]), "--limit", "2", "--threads", "2"],
    )
    assert res.exit_code == 0, res.output
    assert "windows/s" in res.output


def test_missing_model_is_io_error(runner, work, tmp_path):
    res = runner.invoke(
        main,
        ["detect", str(work["data"]), "--model", str(tmp_path / "nope.bin"), "--out", str(tmp_path / "d.txt")],
    )
    assert res.exit_code == EXIT_IO


def test_bad_config_is_config_error(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("window_size: 81\n")
    res = runner.invoke(main, ["synth", "--config", str(bad), "--out", str(tmp_path / "d")])
    assert res.exit_code == EXIT_CONFIG


def test_empty_input_is_validation_error(runner, work, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    res = runner.invoke(
        main,
        ["detect", str(empty), "--model", str(work["model"]), "--out", str(tmp_path / "d.txt")],
    )
    assert res.exit_code == EXIT_VALIDATION


def test_corrupt_model_is_validation_error(runner, work, tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNK")
    res = runner.invoke(
        main,
        ["detect", str(work["data"]), "--model", str(bad), "--out", str(tmp_path / "d.txt")],
    )
    assert res.exit_code == EXIT_VALIDATION


def test_usage_error_exit_code(runner):
    res = runner.invoke(main, ["train"])  # missing required options
    assert res.exit_code == EXIT_CONFIG
