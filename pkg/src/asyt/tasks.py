"""Dataset and network recipes for the reproduced experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .data import (
    Dataset,
    data_root,
    load_idx_dir,
    load_iris,
    normalize_pair,
    pca_pair,
    sample_per_class,
    stratified_split,
    subset_classes,
)
from .netcore import NetworkSpec

MNIST_FAMILY = ("mnist", "fmnist", "kmnist")
DATASETS = ("iris2", "iris3", "digits4") + MNIST_FAMILY
IRIS_TEST_FRACTION = 0.3
# optical gain between emulated modules and the extra per-layer control error level
COMPONENT_WEIGHT_SCALE = 4.0
COMPONENT_REINJECTION = 2.5
MNIST_HIDDEN = (256, 256)


@dataclass(frozen=True)
class Recipe:
    """Everything about a task that does not need the data itself."""

    name: str
    spec: NetworkSpec
    mode: str = "transform"
    ppm_dim: int | None = None
    snr_db: float = math.inf
    weight_scale: float = 1.0
    reinjection_level: float = 0.0
    defaults: dict = field(default_factory=dict)

    def device_kwargs(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "mode": self.mode,
            "ppm_dim": self.ppm_dim,
            "weight_scale": self.weight_scale,
            "reinjection_level": self.reinjection_level,
        }


def _component_defaults(lr: float, epochs: int, batch_size: int) -> dict:
    return {"learning_rate": lr, "epochs": epochs, "batch_size": batch_size, "init_bias": 1.0,
            "weight_bound": COMPONENT_WEIGHT_SCALE}


def recipe(name: str, hidden=MNIST_HIDDEN) -> Recipe:
    if name == "iris3":
        return Recipe(name, NetworkSpec((4, 4, 3), "sigmoid_like"), "component", 4,
                      weight_scale=COMPONENT_WEIGHT_SCALE, reinjection_level=COMPONENT_REINJECTION,
                      defaults=_component_defaults(0.1, 200, 8))
    if name == "iris2":
        # no deliberate re-entry error: the signal stays optical between the two modules
        return Recipe(name, NetworkSpec((2, 2, 2), "tanh_saturating"), "component", 4,
                      weight_scale=COMPONENT_WEIGHT_SCALE, defaults=_component_defaults(0.1, 30, 1))
    if name == "digits4":
        return Recipe(name, NetworkSpec((8, 4, 4), "sigmoid_like"), "component", 4,
                      weight_scale=COMPONENT_WEIGHT_SCALE, reinjection_level=COMPONENT_REINJECTION,
                      defaults=_component_defaults(0.1, 200, 8))
    if name in MNIST_FAMILY:
        return Recipe(name, NetworkSpec((784,) + tuple(hidden) + (10,), "relu"), snr_db=10.0,
                      defaults={"learning_rate": 0.3, "epochs": 100, "batch_size": 600, "init_bias": 0.1,
                                "weight_bound": 1.0})
    raise ValueError(f"unknown dataset {name!r}; expected one of {DATASETS}")


@dataclass
class Task:
    name: str
    spec: NetworkSpec
    train_set: Dataset
    test_set: Dataset
    mode: str = "transform"
    ppm_dim: int | None = None
    snr_db: float = math.inf
    weight_scale: float = 1.0
    reinjection_level: float = 0.0
    defaults: dict = field(default_factory=dict)

    @classmethod
    def from_recipe(cls, r: Recipe, train_set: Dataset, test_set: Dataset) -> "Task":
        return cls(r.name, r.spec, train_set, test_set, r.mode, r.ppm_dim, r.snr_db, r.weight_scale,
                   r.reinjection_level, dict(r.defaults))

    def device_kwargs(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "mode": self.mode,
            "ppm_dim": self.ppm_dim,
            "weight_scale": self.weight_scale,
            "reinjection_level": self.reinjection_level,
        }


def iris3(split_seed: int = 0, path=None) -> Task:
    """Three-class Iris on [4, 4, 3] with a sigmoid-like hidden layer, cell-level device model."""
    train, test = normalize_pair(*stratified_split(load_iris(path), IRIS_TEST_FRACTION, split_seed))
    return Task.from_recipe(recipe("iris3"), train, test)


def iris2(split_seed: int = 0, path=None) -> Task:
    """Setosa vs Versicolor compressed to two principal components on [2, 2, 2]."""
    ds = subset_classes(load_iris(path), [0, 1])
    train, test, _ = pca_pair(*stratified_split(ds, IRIS_TEST_FRACTION, split_seed), k=2)
    return Task.from_recipe(recipe("iris2"), train, test)


def digits4(root=None, train_per_class: int = 150, test_per_class: int = 50, seed: int = 0) -> Task:
    """Digits 0-3 from an MNIST IDX directory, PCA to 8 features, [8, 4, 4] on 4x4 modules."""
    root = Path(root) if root else data_root("mnist")
    train = subset_classes(load_idx_dir(root, "train"), [0, 1, 2, 3])
    test = subset_classes(load_idx_dir(root, "test"), [0, 1, 2, 3])
    train = sample_per_class(train, train_per_class, seed)
    test = sample_per_class(test, test_per_class, seed + 1)
    train, test, _ = pca_pair(train, test, k=8)
    return Task.from_recipe(recipe("digits4"), train, test)


def mnist_family(name: str = "mnist", root=None, hidden=MNIST_HIDDEN, train_per_class: int = 0,
                 test_per_class: int = 0, seed: int = 0) -> Task:
    """Full 784-pixel MNIST, FMNIST or KMNIST; per-class caps of 0 keep every sample."""
    if name not in MNIST_FAMILY:
        raise ValueError(f"dataset must be one of {MNIST_FAMILY}")
    root = Path(root) if root else data_root(name)
    train = load_idx_dir(root, "train")
    test = load_idx_dir(root, "test")
    if train_per_class:
        train = sample_per_class(train, train_per_class, seed)
    if test_per_class:
        test = sample_per_class(test, test_per_class, seed + 1)
    return Task.from_recipe(recipe(name, hidden), train, test)


def load_task(name: str, root=None, **kw) -> Task:
    if name == "iris3":
        return iris3(**kw)
    if name == "iris2":
        return iris2(**kw)
    if name == "digits4":
        return digits4(root, **kw)
    if name in MNIST_FAMILY:
        return mnist_family(name, root, **kw)
    raise ValueError(f"unknown dataset {name!r}; expected one of {DATASETS}")
