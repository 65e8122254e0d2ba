import math

import numpy as np
import pytest

import monogam as mg


def test_first_order_signal_point_values():
    assert mg.first_order_signal(np.zeros(4)) == 0.0
    expected = 0.5 + 1.0 - 1.0 + 0.5 * (math.exp(6) - 1) / (1 + math.exp(6))
    got = mg.first_order_signal(np.array([1.0, 1.0, -1.0, 1.0]))
    assert got == pytest.approx(expected, abs=1e-12)
    # antisymmetric partner of the previous point
    got = mg.first_order_signal(np.array([-1.0, -1.0, 1.0, -1.0]))
    assert got == pytest.approx(-expected, abs=1e-12)


def test_second_order_signal_point_values():
    assert mg.second_order_signal(np.zeros(4)) == 0.0
    assert mg.second_order_signal(np.ones(4)) == pytest.approx(4.0, abs=1e-15)
    got = mg.second_order_signal(np.array([-1.0, 0.5, -1.0, 1.0]))
    assert got == pytest.approx(-0.5, abs=1e-15)


def test_generators_are_deterministic():
    cfg = mg.SimConfig(n=500, sigma=2.0, seed=42)
    a = mg.generate_first_order(cfg)
    b = mg.generate_first_order(cfg)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.response, b.response)
    c = mg.generate_first_order(mg.SimConfig(n=500, sigma=2.0, seed=43))
    assert not np.array_equal(a.response, c.response)


def test_generator_ranges_and_kinds():
    ds = mg.generate_second_order(mg.SimConfig(n=1000, seed=5))
    assert ds.features.shape == (1000, 4)
    assert ds.features.min() >= -1.0 and ds.features.max() <= 1.0
    binary = mg.generate_second_order(
        mg.SimConfig(n=1000, seed=5, response_kind="binary"))
    assert set(np.unique(binary.response)) <= {0.0, 1.0}
    assert np.array_equal(binary.features, ds.features)


def test_continuous_noise_matches_sigma():
    ds = mg.generate_first_order(mg.SimConfig(n=15000, sigma=2.0, seed=7))
    noise = ds.response - mg.first_order_signal(ds.features)
    assert abs(noise.std() - 2.0) < 0.05
    assert abs(noise.mean()) < 0.05


def test_sim_config_validation():
    with pytest.raises(ValueError):
        mg.SimConfig(n=0)
    with pytest.raises(ValueError):
        mg.SimConfig(n=10, sigma=-1.0)
    with pytest.raises(ValueError):
        mg.SimConfig(n=10, response_kind="counts")


@pytest.mark.parametrize("n,expected", [
    (15000, (7500, 3750, 3750)),
    (4, (2, 1, 1)),
    (5, (3, 1, 1)),  # floor rule, remainder to train
])
def test_split_sizes(n, expected):
    ds = mg.generate_first_order(mg.SimConfig(n=n, seed=3))
    parts = mg.split_dataset(ds, (0.5, 0.25, 0.25), seed=0)
    assert tuple(p.n for p in parts) == expected


def test_split_is_a_partition():
    ds = mg.generate_first_order(mg.SimConfig(n=337, seed=3))
    parts = mg.split_dataset(ds, (0.5, 0.25, 0.25), seed=9)
    rows = np.vstack([p.features for p in parts])
    order = np.lexsort(rows.T)
    base = np.lexsort(ds.features.T)
    assert np.array_equal(rows[order], ds.features[base])


def test_split_rejects_bad_fractions():
    ds = mg.generate_first_order(mg.SimConfig(n=100, seed=3))
    with pytest.raises(ValueError):
        mg.split_dataset(ds, (0.5, 0.3, 0.3), seed=0)
    with pytest.raises(ValueError):
        mg.split_dataset(ds, (1.0, 0.0, 0.0), seed=0)


def test_binning_constant_feature_collapses():
    X = np.column_stack([np.full(50, 3.3), np.arange(50.0)])
    ds = mg.Dataset(X, np.zeros(50), ("a", "b"), "continuous")
    binned = mg.bin_features(ds, 32)
    assert binned.bin_edges[0].size == 0
    assert binned.n_bins[0] == 1
    assert np.all(binned.bin_index[:, 0] == 0)


def test_binning_median_cut():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    ds = mg.Dataset(X, np.zeros(4), ("a",), "continuous")
    binned = mg.bin_features(ds, 2)
    assert binned.bin_edges[0].tolist() == [2.0]
    assert binned.bin_index[:, 0].tolist() == [0, 0, 1, 1]


def test_binning_near_equal_counts():
    ds = mg.generate_first_order(mg.SimConfig(n=7500, seed=21))
    binned = mg.bin_features(ds, 32)
    for j in range(4):
        counts = np.bincount(binned.bin_index[:, j], minlength=32)
        assert counts.size == 32
        assert np.abs(counts - 7500 / 32).max() <= 2


def test_binning_monotone(rng):
    ds = mg.generate_first_order(mg.SimConfig(n=600, seed=4))
    binned = mg.bin_features(ds, 8)
    for j in range(4):
        order = np.argsort(ds.features[:, j], kind="stable")
        assert np.all(np.diff(binned.bin_index[order, j]) >= 0)


def test_binning_requires_two_bins():
    ds = mg.generate_first_order(mg.SimConfig(n=10, seed=4))
    with pytest.raises(ValueError):
        mg.bin_features(ds, 1)


def test_dataset_validation():
    with pytest.raises(ValueError):
        mg.Dataset(np.array([[np.inf]]), np.array([0.0]), ("a",), "continuous")
    with pytest.raises(ValueError):
        mg.Dataset(np.ones((2, 1)), np.array([0.0, 2.0]), ("a",), "binary")
    with pytest.raises(ValueError):
        mg.Dataset(np.ones((2, 1)), np.array([0.0]), ("a",), "continuous")


def test_csv_round_trip(tmp_path):
    ds = mg.generate_first_order(mg.SimConfig(n=40, sigma=2.0, seed=12))
    path = tmp_path / "data.csv"
    mg.write_dataset_csv(ds, path)
    header = path.read_text().splitlines()[0]
    assert header == "x1,x2,x3,x4,y"
    back = mg.read_dataset_csv(path)
    assert back.response_kind == "continuous"
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.response, ds.response)


def test_csv_binary_kind_inference(tmp_path):
    ds = mg.generate_first_order(
        mg.SimConfig(n=40, seed=12, response_kind="binary"))
    path = tmp_path / "data.csv"
    mg.write_dataset_csv(ds, path)
    assert mg.read_dataset_csv(path).response_kind == "binary"


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        mg.read_dataset_csv(path)
