"""Dataset ingestion and preparation: IDX and Iris files, PCA, splitting and batching."""

from __future__ import annotations

import csv
import gzip
import hashlib
import os
import struct
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
DATA_DIR_ENV = "ASYT_DATA_DIR"

IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
IRIS_NAMES = {"iris-setosa": 0, "iris-versicolor": 1, "iris-virginica": 2, "setosa": 0, "versicolor": 1, "virginica": 2}


class DataFormatError(ValueError):
    pass


class DataConsistencyError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"
    scaling: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise DataConsistencyError("features must be (samples, dims) with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataConsistencyError("labels out of range")
        if not np.all(np.isfinite(self.features)):
            raise DataConsistencyError("non-finite features")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    def onehot(self) -> np.ndarray:
        return one_hot(self.labels, self.class_count)

    def take(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def with_features(self, features: np.ndarray, **scaling) -> "Dataset":
        return replace(self, features=features, scaling={**self.scaling, **scaling})

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return h.hexdigest()


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def _read_idx(path, magic: int) -> np.ndarray:
    with _open(path) as f:
        data = f.read()
    if len(data) < 8:
        raise OSError(f"{path}: truncated IDX header")
    found = struct.unpack(">I", data[:4])[0]
    if found != magic:
        raise DataFormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = data[3]
    header = 4 + 4 * ndim
    if len(data) < header:
        raise OSError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) - header < count:
        raise OSError(f"{path}: expected {count} bytes of data, found {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, split: str = "train", class_count: int = 10) -> Dataset:
    """Read an IDX image/label pair; pixels scaled to [0, 1] and flattened."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if len(images) != len(labels):
        raise DataConsistencyError(f"{len(images)} images but {len(labels)} labels")
    features = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), class_count, split)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images ``(n, rows, cols)`` and labels in IDX layout."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    for path, magic, arr in ((images_path, IDX_IMAGES_MAGIC, images), (labels_path, IDX_LABELS_MAGIC, labels)):
        header = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape)
        opener = gzip.open if str(path).endswith(".gz") else open
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with opener(path, "wb") as f:
            f.write(header + arr.tobytes())


def find_idx_pair(root, split: str) -> tuple[Path, Path]:
    root = Path(root)
    names = IDX_FILES[split]
    found = []
    for name in names:
        for candidate in (root / name, root / f"{name}.gz", root / name.replace("-idx", ".idx")):
            if candidate.exists():
                found.append(candidate)
                break
        else:
            raise FileNotFoundError(f"{name}[.gz] not found under {root}")
    return found[0], found[1]


def load_idx_dir(root, split: str) -> Dataset:
    images, labels = find_idx_pair(root, split)
    return load_idx(images, labels, split)


def data_root(name: str | None = None) -> Path:
    """Dataset directory from ``$ASYT_DATA_DIR`` (optionally a per-dataset subdirectory)."""
    base = os.environ.get(DATA_DIR_ENV)
    if not base:
        raise FileNotFoundError(f"set {DATA_DIR_ENV} to the directory holding the dataset files")
    return Path(base) / name if name else Path(base)


def bundled_iris_path() -> Path:
    return Path(str(resources.files("asyt") / "resources" / "iris.csv"))


def load_iris(path=None) -> Dataset:
    """Iris CSV: four numeric features then a class name or integer label per row."""
    path = Path(path) if path else bundled_iris_path()
    feats, labels = [], []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 5:
                raise DataFormatError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                values = [float(v) for v in row[:4]]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric feature") from None
            tag = row[4].strip().lower()
            if tag in IRIS_NAMES:
                label = IRIS_NAMES[tag]
            else:
                try:
                    label = int(tag)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: unknown class {row[4]!r}") from None
            feats.append(values)
            labels.append(label)
    labels = np.array(labels, dtype=np.int64)
    if len(labels) == 0:
        raise DataFormatError(f"{path}: no rows")
    return Dataset(np.array(feats), labels, int(labels.max()) + 1, "all")


def subset_classes(dataset: Dataset, classes: Sequence[int]) -> Dataset:
    """Keep ``classes`` and relabel them ``0..k-1`` in the order given."""
    classes = list(classes)
    mask = np.isin(dataset.labels, classes)
    if not mask.any():
        raise ValueError(f"no samples of classes {classes}")
    remap = np.full(max(dataset.class_count, max(classes) + 1), -1)
    remap[classes] = np.arange(len(classes))
    return replace(
        dataset,
        features=dataset.features[mask],
        labels=remap[dataset.labels[mask]],
        class_count=len(classes),
    )


def stratified_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(dataset.class_count):
        idx = np.flatnonzero(dataset.labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return replace(dataset.take(train_idx), split="train"), replace(dataset.take(test_idx), split="test")


def sample_per_class(dataset: Dataset, per_class: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    keep = []
    for c in range(dataset.class_count):
        idx = np.flatnonzero(dataset.labels == c)
        keep.append(rng.choice(idx, size=min(per_class, len(idx)), replace=False))
    return dataset.take(np.sort(np.concatenate(keep)))


@dataclass(frozen=True)
class MinMaxScaler:
    low: np.ndarray
    high: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        span = np.where(self.high > self.low, self.high - self.low, 1.0)
        return np.clip((x - self.low) / span, 0.0, 1.0)


def minmax_fit(features: np.ndarray) -> MinMaxScaler:
    return MinMaxScaler(features.min(axis=0), features.max(axis=0))


def normalize_pair(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
    """Min-max to [0, 1] fitted on the train split; test values are clipped into range."""
    scaler = minmax_fit(train.features)
    return (
        train.with_features(scaler.apply(train.features), minmax=scaler),
        test.with_features(scaler.apply(test.features), minmax=scaler),
    )


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, dims), orthonormal rows
    explained_variance: np.ndarray
    scaler: MinMaxScaler | None = None

    def __post_init__(self):
        for arr in (self.mean, self.components, self.explained_variance):
            arr.setflags(write=False)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def project(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) @ self.components.T

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        return scores @ self.components + self.mean


def pca_fit(features: np.ndarray, k: int) -> PcaModel:
    """PCA through eigendecomposition of the sample covariance; fit on the train split only."""
    x = np.asarray(features, dtype=np.float64)
    n, dims = x.shape
    if not 1 <= k <= dims:
        raise ValueError(f"k must be in [1, {dims}], got {k}")
    if n < k:
        raise ValueError(f"need at least {k} samples, got {n}")
    mean = x.mean(axis=0)
    cov = np.cov(x - mean, rowvar=False, bias=False).reshape(dims, dims)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    comps = evecs[:, order].T.copy()
    # deterministic sign: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= np.where(flip == 0, 1.0, flip)[:, None]
    model = PcaModel(mean, comps, np.clip(evals[order], 0.0, None))
    return replace(model, scaler=minmax_fit(model.project(x)))


def pca_apply(model: PcaModel, features: np.ndarray, rescale: bool = True) -> np.ndarray:
    scores = model.project(np.asarray(features, dtype=np.float64))
    return model.scaler.apply(scores) if rescale else scores


def pca_pair(train: Dataset, test: Dataset, k: int) -> tuple[Dataset, Dataset, PcaModel]:
    model = pca_fit(train.features, k)
    return (
        train.with_features(pca_apply(model, train.features), pca=model),
        test.with_features(pca_apply(model, test.features), pca=model),
        model,
    )


def one_hot(labels, class_count: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ValueError(f"labels must lie in [0, {class_count})")
    out = np.zeros((labels.size, class_count))
    out[np.arange(labels.size), labels] = 1.0
    return out


def epoch_permutation(n: int, seed: int, epoch: int, shuffle: bool = True) -> np.ndarray:
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed, epoch, 0x5EED]).permutation(n)


def batch_iterator(
    dataset: Dataset, batch_size: int, seed: int = 0, epoch: int = 0, shuffle: bool = True
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(features, onehot_targets, labels)`` batches; the last one may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = epoch_permutation(len(dataset), seed, epoch, shuffle)
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        labels = dataset.labels[idx]
        yield dataset.features[idx], one_hot(labels, dataset.class_count), labels


def batches_per_epoch(n: int, batch_size: int) -> int:
    return -(-n // batch_size)


def batch_schedule_digest(dataset: Dataset, batch_size: int, seed: int, epochs: int, shuffle: bool = True) -> str:
    """Binds a training run to its data and sample order."""
    h = hashlib.sha256(dataset.fingerprint().encode())
    h.update(struct.pack("<qqq", batch_size, seed, epochs))
    for epoch in range(epochs):
        h.update(np.ascontiguousarray(epoch_permutation(len(dataset), seed, epoch, shuffle), dtype="<i8").tobytes())
    return h.hexdigest()
