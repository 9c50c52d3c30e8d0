"""Dataset module: pyramid features, loaders, synthetic data, splits."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isletnet.dataset import (DataError, Dataset, FIG2_SPEC, kfold_split,
                              load_csv_dataset, load_dataset,
                              load_idx_dataset, pyramid_features,
                              synth_density_variation)


class TestPyramidFeatures:
    def test_all_zero_grid(self):
        out = pyramid_features(np.zeros((8, 8)))
        assert out.shape == (85,)
        assert np.all(out == 0.0)

    def test_all_one_grid(self):
        out = pyramid_features(np.ones((8, 8)))
        np.testing.assert_allclose(out, 1.0)

    def test_single_hot_pixel(self):
        """One lit pixel halves in value per pooling level: 1, 1/4, 1/16, 1/64."""
        grid = np.zeros((8, 8))
        grid[3, 5] = 1.0
        out = pyramid_features(grid)
        root, l2, l4, l8 = out[:1], out[1:5], out[5:21], out[21:]
        assert l8.max() == 1.0 and np.count_nonzero(l8) == 1
        assert l4.max() == pytest.approx(0.25) and np.count_nonzero(l4) == 1
        assert l2.max() == pytest.approx(0.0625)
        assert root[0] == pytest.approx(0.015625)

    def test_constant_non_divisible_grid(self):
        out = pyramid_features(np.full((12, 12), 0.7))
        np.testing.assert_allclose(out, 0.7)

    def test_divisible_grid_matches_block_mean(self):
        rng = np.random.default_rng(0)
        grid = rng.uniform(size=(16, 16))
        out = pyramid_features(grid)
        block = grid.reshape(8, 2, 8, 2).mean(axis=(1, 3))
        np.testing.assert_allclose(out[21:], block.ravel(), atol=1e-12)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_coarse_cells_average_children(self, seed):
        rng = np.random.default_rng(seed)
        grid = rng.uniform(size=(8, 8))
        out = pyramid_features(grid)
        l2 = out[1:5].reshape(2, 2)
        l4 = out[5:21].reshape(4, 4)
        l8 = out[21:].reshape(8, 8)
        np.testing.assert_allclose(l4, l8.reshape(4, 2, 4, 2).mean(axis=(1, 3)),
                                   atol=1e-12)
        np.testing.assert_allclose(l2, l4.reshape(2, 2, 2, 2).mean(axis=(1, 3)),
                                   atol=1e-12)
        np.testing.assert_allclose(out[0], l2.mean(), atol=1e-12)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_rejects_non_square(self):
        with pytest.raises(DataError):
            pyramid_features(np.zeros((8, 9)))

    def test_rejects_small_grid(self):
        with pytest.raises(DataError):
            pyramid_features(np.zeros((7, 7)))

    def test_rejects_out_of_range(self):
        grid = np.zeros((8, 8))
        grid[0, 0] = 1.5
        with pytest.raises(DataError):
            pyramid_features(grid)


class TestCsvLoader:
    def test_basic(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,0,A\n3,4,A\n0,5,B\n")
        ds = load_csv_dataset(path)
        assert ds.n == 3 and ds.dim == 2
        assert list(ds.classes) == [0, 1]
        assert ds.label_names == ("A", "B")
        np.testing.assert_allclose(ds.features[1], [3.0, 4.0])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError):
            load_csv_dataset(path)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("0,0,A\n1,2,3,B\n")
        with pytest.raises(DataError, match="dimension"):
            load_csv_dataset(path)

    def test_bad_float(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,zap,A\n")
        with pytest.raises(DataError, match="line 1"):
            load_csv_dataset(path)

    def test_header_skip(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("x,y,label\n1,2,A\n")
        ds = load_csv_dataset(path, skip_header=True)
        assert ds.n == 1

    def test_labels_first_seen_order(self, tmp_path):
        path = tmp_path / "order.csv"
        path.write_text("0,Z\n1,A\n2,Z\n")
        ds = load_csv_dataset(path)
        assert ds.label_names == ("Z", "A")
        assert list(ds.labels) == [0, 1, 0]


def _write_idx_pair(tmp_path, images, labels):
    img_path = tmp_path / "imgs.idx"
    lab_path = tmp_path / "labs.idx"
    n, rows, cols = images.shape
    with open(img_path, "wb") as fh:
        fh.write(struct.pack(">iiii", 2051, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())
    with open(lab_path, "wb") as fh:
        fh.write(struct.pack(">ii", 2049, len(labels)))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())
    return img_path, lab_path


class TestIdxLoader:
    def test_ten_images(self, tmp_path):
        rng = np.random.default_rng(3)
        images = rng.integers(0, 256, size=(10, 28, 28))
        labels = rng.integers(0, 10, size=10)
        img_path, lab_path = _write_idx_pair(tmp_path, images, labels)
        ds = load_idx_dataset(img_path, lab_path)
        assert ds.n == 10 and ds.dim == 85
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0
        # spot-check against the pyramid oracle on the raw image
        expected = pyramid_features(images[4] / 255.0)
        np.testing.assert_allclose(ds.features[4], expected, atol=1e-12)

    def test_count_mismatch(self, tmp_path):
        images = np.zeros((3, 8, 8))
        img_path, lab_path = _write_idx_pair(tmp_path, images, [0, 1])
        with pytest.raises(DataError, match="labels"):
            load_idx_dataset(img_path, lab_path)

    def test_bad_magic(self, tmp_path):
        images = np.zeros((2, 8, 8))
        img_path, lab_path = _write_idx_pair(tmp_path, images, [0, 1])
        raw = bytearray(img_path.read_bytes())
        raw[3] = 99
        img_path.write_bytes(bytes(raw))
        with pytest.raises(DataError, match="magic"):
            load_idx_dataset(img_path, lab_path)

    def test_dispatch(self, tmp_path):
        images = np.zeros((2, 8, 8))
        img_path, lab_path = _write_idx_pair(tmp_path, images, [0, 1])
        ds = load_dataset(img_path, fmt="idx-image-pair", labels_path=lab_path)
        assert ds.dim == 85
        with pytest.raises(DataError):
            load_dataset(img_path, fmt="nope")


class TestSynth:
    def test_single_cluster(self):
        ds = synth_density_variation([((0.0, 0.0), 1.0, 5)], seed=1)
        assert ds.n == 5
        assert list(ds.classes) == [0]

    def test_deterministic(self):
        a = synth_density_variation(seed=7)
        b = synth_density_variation(seed=7)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_seed_changes_data(self):
        a = synth_density_variation(seed=0)
        b = synth_density_variation(seed=1)
        assert not np.array_equal(a.features, b.features)

    def test_fig2_preset_structure(self):
        ds = synth_density_variation(seed=0)
        assert ds.classes.size == 6
        assert len(FIG2_SPEC) == 6
        spreads = [entry[1] for entry in FIG2_SPEC]
        assert max(spreads[3:]) <= min(spreads[:3]) / 10

    def test_fig2_density_contrast(self):
        """Dense clusters are at least 5x tighter than sparse ones."""
        ds = synth_density_variation(seed=0)

        def mean_intra(label):
            pts = ds.features[ds.labels == label]
            diff = pts[:, None, :] - pts[None, :, :]
            return np.sqrt((diff ** 2).sum(axis=2)).mean()

        sparse = np.mean([mean_intra(c) for c in (0, 1, 2)])
        dense = np.mean([mean_intra(c) for c in (3, 4, 5)])
        assert dense < sparse / 5

    def test_rejects_bad_spec(self):
        with pytest.raises(DataError):
            synth_density_variation([((0.0,), 1.0, 0)], seed=0)
        with pytest.raises(DataError):
            synth_density_variation([((0.0,), -1.0, 3)], seed=0)


class TestKfold:
    def _dataset(self, n, dim=2, seed=0):
        rng = np.random.default_rng(seed)
        return Dataset(rng.normal(size=(n, dim)), rng.integers(0, 3, size=n))

    def test_five_folds_of_ten(self):
        ds = self._dataset(10)
        splits = kfold_split(ds, 5, seed=0)
        assert len(splits) == 5
        for train, test in splits:
            assert train.n == 8 and test.n == 2

    def test_leave_one_out(self):
        ds = self._dataset(6)
        splits = kfold_split(ds, 6, seed=0)
        assert all(test.n == 1 for _, test in splits)

    def test_uneven_sizes(self):
        ds = self._dataset(11)
        sizes = sorted(test.n for _, test in kfold_split(ds, 5, seed=0))
        assert sizes == [2, 2, 2, 2, 3]

    def test_too_many_folds(self):
        ds = self._dataset(4)
        with pytest.raises(ValueError):
            kfold_split(ds, 5)
        with pytest.raises(ValueError):
            kfold_split(ds, 1)

    def test_deterministic(self):
        ds = self._dataset(20)
        a = kfold_split(ds, 4, seed=3)
        b = kfold_split(ds, 4, seed=3)
        for (tr1, te1), (tr2, te2) in zip(a, b):
            np.testing.assert_array_equal(te1.features, te2.features)

    @given(st.integers(8, 40), st.integers(2, 6), st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_test_sets_partition_dataset(self, n, folds, seed):
        if folds > n:
            return
        ds = self._dataset(n, seed=1)
        splits = kfold_split(ds, folds, seed=seed)
        # Rebuild the union of test rows; every original row exactly once.
        rows = np.vstack([test.features for _, test in splits])
        assert rows.shape[0] == n
        order_a = np.lexsort(rows.T)
        order_b = np.lexsort(ds.features.T)
        np.testing.assert_allclose(rows[order_a], ds.features[order_b])
        for train, test in splits:
            assert train.n + test.n == n
