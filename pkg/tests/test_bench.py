import numpy as np
import pytest
from helpers import random_cascade_model

from acfdet.backend import available_backends
from acfdet.bench import bench_images, format_report
from acfdet.detector import MirrorRef, MultiViewModel
from acfdet.pyramid import PyramidConfig
from conftest import random_image


@pytest.fixture(scope="module")
def model():
    rng = np.random.default_rng(0)
    cascade = random_cascade_model(rng, window=32, num_trees=20)
    # Stage thresholds at the median running score of sampled windows, so the
    # scans reject roughly half the windows and exercise the early-exit path.
    from acfdet.boosting import cumulative_scores
    from acfdet.channels import compute_channels

    stack = compute_channels(random_image(rng, 96, 96), cascade.channel_config).data
    g = cascade.grid_size
    feats = np.array(
        [stack[:, iy : iy + g, ix : ix + g].ravel() for iy in range(0, 16, 3) for ix in range(0, 16, 3)]
    )
    cascade.stage_thresholds = np.median(cumulative_scores(cascade, feats), axis=0)
    return MultiViewModel(views=[cascade, MirrorRef(source=0)])


@pytest.fixture(scope="module")
def images():
    rng = np.random.default_rng(1)
    return [random_image(rng, 56, 64) for _ in range(3)]


def test_bench_rows_cover_backends_and_threads(model, images):
    rows = bench_images(model, images, pyramid_config=PyramidConfig(min_window=32), threads=(1, 2))
    assert len(rows) == len(available_backends()) * 2
    for row in rows:
        assert row.images == 3
        assert row.windows > 0
        assert row.elapsed > 0
        assert row.images_per_sec > 0
        assert row.windows_per_sec > 0
        assert row.stage_histogram.shape == (10,)
        assert row.stage_histogram.sum() == row.rejected_windows


def test_bench_counts_match_across_backends(model, images):
    rows = bench_images(model, images, pyramid_config=PyramidConfig(min_window=32), threads=(1,))
    first = rows[0]
    for row in rows[1:]:
        assert row.windows == first.windows
        assert row.trees_evaluated == first.trees_evaluated
        assert row.rejected_windows == first.rejected_windows
        assert np.array_equal(row.stage_histogram, first.stage_histogram)


def test_early_exit_lowers_tree_counts(model, images):
    cfg = PyramidConfig(min_window=32)
    fast = bench_images(model, images, pyramid_config=cfg, threads=(1,), early_exit=True)[0]
    full = bench_images(model, images, pyramid_config=cfg, threads=(1,), early_exit=False)[0]
    assert fast.windows == full.windows
    assert fast.rejected_windows == full.rejected_windows
    assert fast.trees_evaluated < full.trees_evaluated
    assert full.mean_trees_per_window == 20.0
    assert fast.mean_trees_per_rejected < 20.0


def test_report_formatting(model, images):
    rows = bench_images(model, images, pyramid_config=PyramidConfig(min_window=32), threads=(1,))
    text = format_report(rows, num_trees=20)
    assert "windows/s" in text
    for row in rows:
        assert row.backend in text
