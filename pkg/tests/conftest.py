import os
from pathlib import Path

import numpy as np
import pytest

from dlreg.data import Dataset, load_idx, synthetic_glyphs, write_glyph_corpus

def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def record_criterion(request):
    """Collects acceptance-criterion result lines for the terminal summary."""
    return request.config._criterion_lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

MNIST_FILES = {
    "images": "train-images-idx3-ubyte",
    "labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def glyph_dataset(per_class, seed=0, split=0):
    images, labels = synthetic_glyphs(per_class=per_class, seed=seed, split=split)
    return Dataset(
        inputs=images.reshape(images.shape[0], -1) / 255.0,
        targets=np.eye(10)[labels],
        class_count=10,
    )


@pytest.fixture(scope="session")
def small_corpus():
    """Tiny labeled train/test pair for fast loop tests."""
    return glyph_dataset(30, seed=0, split=0), glyph_dataset(10, seed=0, split=1)


def _find_real_mnist():
    root = os.environ.get("DLREG_MNIST_DIR")
    if not root:
        return None
    root = Path(root)
    paths = {}
    for key, name in MNIST_FILES.items():
        for candidate in (root / name, root / (name + ".gz")):
            if candidate.exists():
                paths[key] = candidate
                break
        else:
            return None
    return paths


@pytest.fixture(scope="session")
def bench_corpus(tmp_path_factory):
    """Benchmark-scale train pool and test set for the acceptance suite.

    Real digit IDX files are used when DLREG_MNIST_DIR points at them;
    otherwise a deterministic glyph corpus of the same shape (3000/class
    train pool, 1000/class test) is generated through the same IDX path.
    """
    paths = _find_real_mnist()
    source = "mnist"
    if paths is None:
        source = "synthetic-glyphs"
        corpus_dir = tmp_path_factory.mktemp("glyph-corpus")
        paths = write_glyph_corpus(
            corpus_dir, train_per_class=3000, test_per_class=1000, seed=0
        )
    train_pool = load_idx(paths["images"], paths["labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    return {"train_pool": train_pool, "test": test, "source": source, "paths": paths}
