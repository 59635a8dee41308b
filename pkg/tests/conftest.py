import numpy as np
import pytest

from acfdet.boosting import TrainConfig
from acfdet.synth import SynthConfig, load_synth_dataset, synth_generate
from acfdet.training import train_multiview


def random_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    # Smooth low-frequency content plus noise, so gradients are non-trivial.
    coarse = rng.uniform(0, 1, size=(max(h // 8, 2), max(w // 8, 2), 3))
    from acfdet.pyramid import resample_bilinear

    img = resample_bilinear(coarse, h, w)
    img += rng.uniform(-0.1, 0.1, size=img.shape)
    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def tiny_train_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinytrain")
    cfg = SynthConfig(rng_seed=7, image_count=14, image_size=192, scale_range=(84, 120),
                      negative_image_count=10)
    synth_generate(cfg, root)
    return root


@pytest.fixture(scope="session")
def tiny_dataset(tiny_train_root):
    return load_synth_dataset(tiny_train_root)


@pytest.fixture(scope="session")
def tiny_test_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinytest")
    cfg = SynthConfig(rng_seed=31, image_count=6, image_size=192, scale_range=(84, 120),
                      negative_image_count=2)
    synth_generate(cfg, root)
    return root


@pytest.fixture(scope="session")
def tiny_test_dataset(tiny_test_root):
    return load_synth_dataset(tiny_test_root)


@pytest.fixture(scope="session")
def small_model(tiny_dataset):
    """A quick 6-view model shared by detector/serialization/CLI-level tests."""
    tc = TrainConfig(num_trees=32, bootstrap_schedule=(12,), negatives_per_round=250, rng_seed=0)
    return train_multiview(tiny_dataset, train_config=tc, jitter=1)
