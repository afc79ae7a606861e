"""Single-layer MNIST harness: IDX ingestion and accuracy-vs-budget sweeps.

The classifier is one 784 -> 10 linear map whose frozen base is zero; the
adapter under test is the sole trainable component.  Data files are read
from disk in IDX format -- fetching them is a manual step (see README).
"""

import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .adapters import LowRankAdapter, SparseAdapter, WaveletAdapter, lora_budget, LayerCensus
from .rng import derive_seed
from .training import TrainConfig, train_linear

__all__ = [
    "Dataset",
    "SweepSpec",
    "load_idx",
    "find_data",
    "run_sweep",
    "accuracy_curve",
    "IdxFormatError",
    "MNIST_LAYER",
    "DEFAULT_BUDGETS",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_LAYER = (10, 784)  # classes x flattened pixels

# Sub-r=1 budgets through the rank-6 equivalent (794 = LoRA r=1 on 784x10).
DEFAULT_BUDGETS = (100, 200, 400, 794, 1588, 2382, 3176, 3970, 4764)

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (N, 784), pixels in [0, 1]
    labels: np.ndarray  # (N,), ints in [0, 10)

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image/label counts differ")
        if self.images.min() < 0 or self.images.max() > 1:
            raise ValueError("pixels must lie in [0, 1]")

    @property
    def n(self):
        return self.images.shape[0]


def _read_header(fh, path, magic, n_dims):
    head = fh.read(4 * (1 + n_dims))
    if len(head) != 4 * (1 + n_dims):
        raise IdxFormatError(f"{path}: truncated header")
    vals = struct.unpack(f">{1 + n_dims}I", head)
    if vals[0] != magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{vals[0]:08x}, expected 0x{magic:08x}"
        )
    return vals[1:]


def load_idx(images_path, labels_path):
    """Read an IDX image/label pair into a Dataset.

    Validates the big-endian magic numbers (0x803 images, 0x801 labels),
    the byte counts and the image/label count match; pixels are scaled
    by 1/255.
    """
    with open(images_path, "rb") as fh:
        n, rows, cols = _read_header(fh, images_path, IMAGES_MAGIC, 3)
        raw = fh.read()
    if len(raw) != n * rows * cols:
        raise IdxFormatError(f"{images_path}: expected {n * rows * cols} pixel bytes")
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)
    images = images.astype(float) / 255.0

    with open(labels_path, "rb") as fh:
        (n_labels,) = _read_header(fh, labels_path, LABELS_MAGIC, 1)
        raw = fh.read()
    if len(raw) != n_labels:
        raise IdxFormatError(f"{labels_path}: expected {n_labels} label bytes")
    if n_labels != n:
        raise IdxFormatError(f"{n} images but {n_labels} labels")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(int)
    if labels.size and labels.max() > 9:
        raise IdxFormatError("labels must lie in [0, 10)")
    return Dataset(images, labels)


def find_data(data_dir=None):
    """Locate the four IDX files; falls back to $WAVEFT_MNIST_DIR.

    Returns (train, test) Datasets or raises FileNotFoundError naming the
    missing files.
    """
    data_dir = data_dir or os.environ.get("WAVEFT_MNIST_DIR")
    if not data_dir:
        raise FileNotFoundError(
            "no data directory given; pass --data-dir or set WAVEFT_MNIST_DIR"
        )
    paths = [os.path.join(data_dir, f) for f in TRAIN_FILES + TEST_FILES]
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise FileNotFoundError(f"missing IDX files: {', '.join(missing)}")
    return load_idx(paths[0], paths[1]), load_idx(paths[2], paths[3])


def default_train_config(seed=0):
    """Batch 64, Adam at 0.01 halved every 5 epochs, 50 epochs, cross-entropy."""
    return TrainConfig(
        lr=0.01, gamma=0.5, step_epochs=5, epochs=50, batch_size=64,
        seed=seed, loss="cross_entropy",
    )


@dataclass
class SweepSpec:
    methods: tuple = ("lora", "shira", "waveft")
    lora_ranks: tuple = (1, 2, 3, 4, 5, 6)
    sparse_budgets: tuple = DEFAULT_BUDGETS
    seeds: tuple = (0, 1, 2)
    train_config: TrainConfig = field(default_factory=default_train_config)
    wavelet_family: str = "db1"
    wavelet_level: int = 2  # limits padding distortion on the 10-wide axis
    lam: float = 1.0

    def __post_init__(self):
        m, n = MNIST_LAYER
        for p in self.sparse_budgets:
            if not 0 <= p <= m * n:
                raise ValueError(f"budget {p} exceeds layer size {m * n}")
        unknown = set(self.methods) - {"lora", "shira", "waveft"}
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")


def _make_adapter(method, budget_or_rank, seed, spec):
    m, n = MNIST_LAYER
    if method == "lora":
        return LowRankAdapter.create((m, n), budget_or_rank, seed)
    if method == "shira":
        return SparseAdapter.create((m, n), budget_or_rank, seed, lam=spec.lam)
    return WaveletAdapter.create(
        (m, n), budget_or_rank, seed,
        family=spec.wavelet_family, level=spec.wavelet_level, lam=spec.lam,
    )


def _param_count(method, budget_or_rank):
    if method == "lora":
        m, n = MNIST_LAYER
        return lora_budget(LayerCensus([((m, n), 1)]), budget_or_rank)
    return budget_or_rank


def test_accuracy(adapter, W0, dataset):
    pred = adapter.forward(W0, dataset.images.T)
    return float(np.mean(np.argmax(pred, axis=0) == dataset.labels))


_METHOD_INDEX = {"lora": 0, "shira": 1, "waveft": 2}


def run_cell(method, budget_or_rank, seed, train, test, spec):
    """Train one fresh adapter and report (method, params, seed, accuracy)."""
    m, n = MNIST_LAYER
    W0 = np.zeros((m, n))
    cell_seed = derive_seed(seed, _METHOD_INDEX[method], budget_or_rank)
    adapter = _make_adapter(method, budget_or_rank, cell_seed, spec)
    cfg = replace(spec.train_config, seed=cell_seed, loss="cross_entropy")
    train_linear(W0, adapter, (train.images, train.labels), cfg)
    if np.any(W0 != 0):
        raise AssertionError("frozen base matrix was modified")
    return (method, _param_count(method, budget_or_rank), seed,
            test_accuracy(adapter, W0, test))


def run_sweep(train, test, spec):
    """All (method x budget x seed) cells; rows sorted by (method, params, seed)."""
    rows = []
    for method in spec.methods:
        grid = spec.lora_ranks if method == "lora" else spec.sparse_budgets
        for b in grid:
            for seed in spec.seeds:
                rows.append(run_cell(method, b, seed, train, test, spec))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def accuracy_curve(table):
    """Aggregate sweep rows into (method, params, mean, std, n_seeds)."""
    if not table:
        raise ValueError("empty sweep table")
    groups = {}
    for method, params, _seed, acc in table:
        groups.setdefault((method, params), []).append(acc)
    out = []
    for (method, params) in sorted(groups):
        accs = np.asarray(groups[(method, params)], dtype=float)
        out.append((method, params, float(accs.mean()),
                    float(accs.std(ddof=0)), accs.size))
    return out
