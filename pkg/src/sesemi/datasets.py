"""Synthetic 2-D datasets, CIFAR-10 binary ingestion and labeled/unlabeled splits."""

import csv
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import FormatError, ParameterError
from .rng import RngStream

# Two-moons geometry: unit-radius arcs whose centers sit this far apart.
MOON_DX = 0.5
MOON_DY = 0.4
# Three-spirals geometry: arms sweep this many full turns.
SPIRAL_TURNS = 1.5

CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"


@dataclass
class Dataset:
    """Inputs with integer class targets in ``[0, num_classes)``."""

    inputs: np.ndarray
    targets: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if len(self.inputs) < 1 or len(self.inputs) != len(self.targets):
            raise ParameterError(
                f"dataset needs N >= 1 inputs matching targets, got "
                f"{len(self.inputs)} inputs and {len(self.targets)} targets"
            )
        if self.targets.min() < 0 or self.targets.max() >= self.num_classes:
            raise ParameterError(f"targets must lie in [0, {self.num_classes})")

    def __len__(self):
        return len(self.targets)

    def subset(self, indices):
        return Dataset(self.inputs[indices], self.targets[indices], self.num_classes)

    @property
    def is_image(self):
        return self.inputs.ndim == 4


@dataclass
class SplitDataset:
    labeled: Dataset
    unlabeled_inputs: np.ndarray
    test: Dataset
    mode: str = "ssl"
    labeled_indices: np.ndarray = None


def _noisy(points, noise_sigma, seed):
    if noise_sigma > 0:
        points = points + RngStream(seed).normal(0.0, noise_sigma, size=points.shape)
    return points


def two_moons(n_per_class, noise_sigma=0.1, seed=0):
    """Two interlocking unit half-circles.

    Class 0 is the upper arc centred at the origin; class 1 is the lower arc
    centred at ``(MOON_DX, MOON_DY)``.
    """
    if n_per_class < 1:
        raise ParameterError("n_per_class must be >= 1")
    t = np.linspace(0.0, np.pi, n_per_class)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([MOON_DX - np.cos(t), MOON_DY - np.sin(t)])
    points = _noisy(np.vstack([upper, lower]), noise_sigma, seed)
    targets = np.repeat([0, 1], n_per_class)
    return Dataset(points, targets, 2)


def three_spirals(n_per_class, noise_sigma=0.1, seed=0):
    """Three Archimedean arms, 120 degrees apart, radius proportional to sweep."""
    if n_per_class < 1:
        raise ParameterError("n_per_class must be >= 1")
    sweep = 2.0 * np.pi * SPIRAL_TURNS
    t = np.linspace(0.0, 1.0, n_per_class + 1)[1:]
    arms = []
    for k in range(3):
        angle = sweep * t + 2.0 * np.pi * k / 3.0
        arms.append(np.column_stack([t * np.cos(angle), t * np.sin(angle)]))
    points = _noisy(np.vstack(arms), noise_sigma, seed)
    targets = np.repeat([0, 1, 2], n_per_class)
    return Dataset(points, targets, 3)


def save_points_csv(dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "label"])
        for (x, y), label in zip(dataset.inputs, dataset.targets):
            writer.writerow([repr(float(x)), repr(float(y)), int(label)])


def load_points_csv(path, num_classes=None):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError:
        raise
    if not rows or [c.strip() for c in rows[0]] != ["x", "y", "label"]:
        raise FormatError(f"{path}: expected header 'x,y,label'")
    try:
        points = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
        labels = np.array([int(r[2]) for r in rows[1:]], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row: {exc}") from exc
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return Dataset(points, labels, num_classes)


def parse_cifar10_bytes(raw, source="<bytes>"):
    """Decode CIFAR-10 binary records: 1 label byte then 3072 pixel bytes."""
    if len(raw) == 0 or len(raw) % CIFAR_RECORD:
        complete = len(raw) // CIFAR_RECORD
        raise FormatError(
            f"{source}: truncated record at byte offset {complete * CIFAR_RECORD} "
            f"(size {len(raw)} is not a positive multiple of {CIFAR_RECORD})"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.max() >= 10:
        bad = int(np.argmax(labels >= 10))
        raise FormatError(f"{source}: label {labels[bad]} out of range at byte offset {bad * CIFAR_RECORD}")
    pixels = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    return Dataset(pixels.astype(np.float32) / np.float32(255.0), labels, 10)


def serialize_cifar10(dataset):
    """Inverse of :func:`parse_cifar10_bytes` for inputs on the 1/255 grid."""
    pixels = np.rint(np.asarray(dataset.inputs, dtype=np.float64) * 255.0).astype(np.uint8)
    records = np.empty((len(dataset), CIFAR_RECORD), dtype=np.uint8)
    records[:, 0] = dataset.targets
    records[:, 1:] = pixels.reshape(len(dataset), -1)
    return records.tobytes()


def _read_batch(path):
    with open(path, "rb") as fh:
        return parse_cifar10_bytes(fh.read(), source=path)


def _concat(parts):
    return Dataset(
        np.concatenate([p.inputs for p in parts]),
        np.concatenate([p.targets for p in parts]),
        10,
    )


def load_cifar10(path):
    """Read the standard binary batches from directory ``path``."""
    train_paths = [os.path.join(path, f) for f in CIFAR_TRAIN_FILES]
    test_path = os.path.join(path, CIFAR_TEST_FILE)
    for p in train_paths + [test_path]:
        if not os.path.isfile(p):
            raise FileNotFoundError(f"missing CIFAR-10 batch: {p}")
    train = _concat([_read_batch(p) for p in train_paths])
    return train, _read_batch(test_path)


def _balanced_indices(targets, num_labeled, num_classes, rng):
    base, extra = divmod(num_labeled, num_classes)
    picked = []
    for c in range(num_classes):
        pool = np.flatnonzero(targets == c)
        want = base + (1 if c < extra else 0)
        if want > len(pool):
            raise ParameterError(f"class {c} has {len(pool)} examples, {want} requested")
        picked.append(pool[rng.permutation(len(pool))[:want]])
    return np.sort(np.concatenate(picked))


def make_split(train, num_labeled, mode="ssl", seed=0, test=None):
    """Sample a class-balanced labeled subset and pick the unlabeled pool.

    ``ssl`` uses every training input as unlabeled data, ``asl`` reuses the
    labeled inputs, ``supervised`` has no unlabeled data.  A remainder of
    ``num_labeled % C`` goes one extra example to each of the lowest classes.
    """
    if mode not in ("supervised", "asl", "ssl"):
        raise ParameterError(f"unknown mode {mode!r}")
    C = train.num_classes
    if num_labeled < C:
        raise ParameterError(f"num_labeled={num_labeled} is below num_classes={C}")
    if num_labeled > len(train):
        raise ParameterError(f"num_labeled={num_labeled} exceeds dataset size {len(train)}")
    rng = RngStream(seed).split("labeled-subset")
    idx = _balanced_indices(train.targets, num_labeled, C, rng)
    labeled = train.subset(idx)
    if mode == "ssl":
        unlabeled = train.inputs
    elif mode == "asl":
        unlabeled = labeled.inputs
    else:
        unlabeled = train.inputs[:0]
    return SplitDataset(labeled, unlabeled, test if test is not None else train, mode, idx)
