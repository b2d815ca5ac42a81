import os
import struct

import numpy as np
import pytest

from asyt import data
from asyt.data import Dataset


def _write_fake_idx(tmp_path, n=20, seed=0, gz=False):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(n, 28, 28), dtype=np.uint8)
    images[0, 0, 0], images[0, 0, 1] = 255, 0
    labels = rng.integers(0, 10, size=n, dtype=np.uint8)
    suffix = ".gz" if gz else ""
    ip = tmp_path / f"train-images-idx3-ubyte{suffix}"
    lp = tmp_path / f"train-labels-idx1-ubyte{suffix}"
    data.write_idx(ip, lp, images, labels)
    return ip, lp, images, labels


# -- IDX -----------------------------------------------------------------------


def test_idx_header_bytes(tmp_path):
    ip, _, _, _ = _write_fake_idx(tmp_path)
    raw = ip.read_bytes()
    assert raw[:4] == bytes([0, 0, 8, 3])
    assert struct.unpack(">III", raw[4:16]) == (20, 28, 28)


def test_idx_round_trip_and_scaling(tmp_path):
    ip, lp, images, labels = _write_fake_idx(tmp_path)
    ds = data.load_idx(ip, lp)
    assert ds.features.shape == (20, 784)
    assert ds.features[0, 0] == 1.0 and ds.features[0, 1] == 0.0
    np.testing.assert_array_equal(ds.features, images.reshape(20, -1) / 255.0)
    np.testing.assert_array_equal(ds.labels, labels)


def test_idx_gzip_and_directory_lookup(tmp_path):
    _, _, images, _ = _write_fake_idx(tmp_path, gz=True)
    ds = data.load_idx_dir(tmp_path, "train")
    np.testing.assert_array_equal(ds.features, images.reshape(len(images), -1) / 255.0)


def test_idx_bad_magic(tmp_path):
    ip, lp, _, _ = _write_fake_idx(tmp_path)
    with pytest.raises(data.DataFormatError):
        data.load_idx(lp, lp)


def test_idx_truncated(tmp_path):
    ip, lp, _, _ = _write_fake_idx(tmp_path)
    ip.write_bytes(ip.read_bytes()[:-5])
    with pytest.raises(OSError):
        data.load_idx(ip, lp)


def test_idx_count_mismatch(tmp_path):
    ip, lp, images, labels = _write_fake_idx(tmp_path)
    data.write_idx(tmp_path / "x", lp, images, labels[:-1])
    with pytest.raises(data.DataConsistencyError):
        data.load_idx(ip, lp)


def test_missing_data_dir(monkeypatch):
    monkeypatch.delenv(data.DATA_DIR_ENV, raising=False)
    with pytest.raises(FileNotFoundError):
        data.data_root("mnist")


@pytest.mark.skipif(not os.environ.get("ASYT_DATA_DIR"), reason="real MNIST not provided")
def test_real_mnist_train_counts():
    ds = data.load_idx_dir(data.data_root("mnist"), "train")
    assert len(ds) == 60000 and set(np.unique(ds.labels)) == set(range(10))


# -- Iris ----------------------------------------------------------------------


def test_iris_canonical_counts_and_means():
    ds = data.load_iris()
    assert len(ds) == 150 and ds.class_count == 3
    assert np.bincount(ds.labels).tolist() == [50, 50, 50]
    # column means of the canonical file
    np.testing.assert_allclose(ds.features.mean(axis=0), [5.8433, 3.0573, 3.7580, 1.1993], atol=5e-4)


def test_iris_binary_subset():
    ds = data.subset_classes(data.load_iris(), [0, 1])
    assert len(ds) == 100 and ds.class_count == 2


def test_iris_malformed_row(tmp_path):
    p = tmp_path / "iris.csv"
    p.write_text("5.1,3.5,1.4,0.2,setosa\n5.0,abc,1.4,0.2,setosa\n")
    with pytest.raises(data.DataFormatError):
        data.load_iris(p)
    p.write_text("5.1,3.5,1.4,setosa\n")
    with pytest.raises(data.DataFormatError):
        data.load_iris(p)


def test_iris_integer_labels(tmp_path):
    p = tmp_path / "iris.csv"
    p.write_text("5.1,3.5,1.4,0.2,0\n6.0,3.0,4.5,1.5,1\n")
    assert data.load_iris(p).labels.tolist() == [0, 1]


def test_minmax_normalisation_on_train():
    train, test = data.stratified_split(data.load_iris(), 0.3, 0)
    ntrain, ntest = data.normalize_pair(train, test)
    np.testing.assert_allclose(ntrain.features.min(axis=0), 0.0)
    np.testing.assert_allclose(ntrain.features.max(axis=0), 1.0)
    assert ntest.features.min() >= 0.0 and ntest.features.max() <= 1.0


def test_stratified_split_counts():
    train, test = data.stratified_split(data.load_iris(), 0.3, 0)
    assert np.bincount(train.labels).tolist() == [35, 35, 35]
    assert np.bincount(test.labels).tolist() == [15, 15, 15]
    assert train.split == "train" and test.split == "test"


# -- PCA -----------------------------------------------------------------------


def test_pca_full_rank_reconstructs():
    x = np.random.default_rng(0).normal(size=(50, 5))
    model = data.pca_fit(x, 5)
    np.testing.assert_allclose(model.reconstruct(data.pca_apply(model, x, rescale=False)), x, atol=1e-8)


def test_pca_line_is_rank_one():
    t = np.linspace(-1, 1, 30)
    model = data.pca_fit(np.stack([t, 2 * t], axis=1), 2)
    ev = model.explained_variance
    assert ev[0] / ev.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.abs(model.components[0]), np.array([1, 2]) / np.sqrt(5), atol=1e-12)


def test_pca_components_orthonormal_and_scores_decorrelated():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(400, 30)) @ rng.normal(size=(30, 30))
    model = data.pca_fit(x, 8)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(8), atol=1e-8)
    cov = np.cov(data.pca_apply(model, x, rescale=False), rowvar=False)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 1e-6 * np.max(np.diag(cov))


def test_pca_matches_svd_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(100, 6)) @ rng.normal(size=(6, 6))
    model = data.pca_fit(x, 3)
    _, s, vt = np.linalg.svd(x - x.mean(axis=0), full_matrices=False)
    np.testing.assert_allclose(np.abs(model.components), np.abs(vt[:3]), atol=1e-8)
    np.testing.assert_allclose(model.explained_variance, s[:3] ** 2 / (len(x) - 1), rtol=1e-10)


def test_pca_rejects_large_k():
    with pytest.raises(ValueError):
        data.pca_fit(np.zeros((10, 3)), 4)


def test_pca_fit_is_immutable_and_train_only():
    rng = np.random.default_rng(3)
    train = Dataset(rng.uniform(size=(40, 5)), rng.integers(0, 2, 40), 2)
    test = Dataset(rng.uniform(size=(10, 5)) * 3, rng.integers(0, 2, 10), 2, "test")
    ptrain, ptest, model = data.pca_pair(train, test, 2)
    np.testing.assert_array_equal(model.mean, train.features.mean(axis=0))
    with pytest.raises(ValueError):
        model.components[0, 0] = 0.0
    assert ptrain.features.min() >= 0.0 and ptrain.features.max() <= 1.0
    assert ptest.features.min() >= 0.0 and ptest.features.max() <= 1.0


# -- subsets, one-hot, batching ------------------------------------------------


def test_subset_relabels_in_given_order():
    ds = Dataset(np.zeros((6, 1)), np.array([0, 1, 2, 3, 2, 1]), 4)
    sub = data.subset_classes(ds, [2, 1])
    assert sub.labels.tolist() == [1, 0, 0, 1] and sub.class_count == 2
    same = data.subset_classes(ds, [0, 1, 2, 3])
    np.testing.assert_array_equal(same.labels, ds.labels)


def test_subset_empty_raises():
    ds = Dataset(np.zeros((2, 1)), np.array([0, 1]), 4)
    with pytest.raises(ValueError):
        data.subset_classes(ds, [3])


def test_one_hot_contract():
    assert data.one_hot([2], 4).tolist() == [[0, 0, 1, 0]]
    y = np.random.default_rng(0).integers(0, 7, 50)
    oh = data.one_hot(y, 7)
    assert (oh.sum(axis=1) == 1).all()
    np.testing.assert_array_equal(oh.argmax(axis=1), y)
    with pytest.raises(ValueError):
        data.one_hot([4], 4)


def _tiny(n=23):
    return Dataset(np.arange(n, dtype=float)[:, None] / n, np.arange(n) % 3, 3)


def test_batches_partition_dataset():
    ds = _tiny()
    seen = np.concatenate([x[:, 0] for x, _, _ in data.batch_iterator(ds, 5, seed=1, epoch=2)])
    assert sorted(seen.tolist()) == sorted(ds.features[:, 0].tolist())
    sizes = [len(x) for x, _, _ in data.batch_iterator(ds, 5)]
    assert sizes == [5, 5, 5, 5, 3]


def test_batches_deterministic_and_unshuffled_identity():
    ds = _tiny()
    a = [y.tolist() for _, _, y in data.batch_iterator(ds, 4, seed=7, epoch=3)]
    b = [y.tolist() for _, _, y in data.batch_iterator(ds, 4, seed=7, epoch=3)]
    c = [y.tolist() for _, _, y in data.batch_iterator(ds, 4, seed=7, epoch=4)]
    assert a == b and a != c
    order = np.concatenate([x[:, 0] for x, _, _ in data.batch_iterator(ds, 4, shuffle=False)])
    np.testing.assert_array_equal(order, ds.features[:, 0])


def test_batch_targets_are_one_hot():
    ds = _tiny()
    for _, t, y in data.batch_iterator(ds, 6):
        np.testing.assert_array_equal(t.argmax(axis=1), y)


def test_batch_size_must_be_positive():
    with pytest.raises(ValueError):
        list(data.batch_iterator(_tiny(), 0))


def test_dataset_validation():
    with pytest.raises(data.DataConsistencyError):
        Dataset(np.zeros((2, 1)), np.array([0, 5]), 3)
    with pytest.raises(data.DataConsistencyError):
        Dataset(np.array([[np.nan]]), np.array([0]), 1)


def test_schedule_digest_binds_order():
    ds = _tiny()
    a = data.batch_schedule_digest(ds, 4, 0, 3)
    assert a == data.batch_schedule_digest(ds, 4, 0, 3)
    assert a != data.batch_schedule_digest(ds, 4, 1, 3)
    assert a != data.batch_schedule_digest(ds, 5, 0, 3)
