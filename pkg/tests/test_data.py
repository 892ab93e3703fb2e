import numpy as np
import pytest

from rddkit.data import Dataset, denormalize, load_dataset, normalize, save_samples
from rddkit.exceptions import DataError


def test_normalize_two_point_example():
    ds, stats = normalize(Dataset(X=np.array([[0.0, 0.0], [2.0, 2.0]])))
    assert np.array_equal(ds.X, np.array([[-1.0, -1.0], [1.0, 1.0]]))
    assert np.array_equal(stats.mean, np.array([1.0, 1.0]))
    assert np.array_equal(stats.std, np.array([1.0, 1.0]))


def test_normalize_statistics_oracle():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((1000, 4)) * np.array([3.0, 0.1, 10.0, 1.0]) + 5.0
    ds, stats = normalize(Dataset(X=X))
    assert np.all(np.abs(ds.X.mean(axis=0)) < 1e-10)
    assert np.all(np.abs(ds.X.var(axis=0) - 1.0) < 1e-10)
    assert np.allclose(denormalize(ds.X, stats), X, atol=1e-12)


def test_normalize_constant_column_floors_std():
    X = np.column_stack([np.ones(50), np.linspace(0, 1, 50)])
    with pytest.warns(UserWarning):
        ds, stats = normalize(Dataset(X=X))
    assert stats.std[0] == 1e-8
    assert np.allclose(denormalize(ds.X, stats), X, atol=1e-12)


def test_normalize_needs_two_rows():
    with pytest.raises(ValueError):
        normalize(Dataset(X=np.ones((1, 3))))


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 3)) * 1e3
    r = rng.standard_normal(40) / 7.0
    path = str(tmp_path / "d.csv")
    save_samples(path, X, r)
    ds = load_dataset(path)
    assert np.array_equal(ds.X, X)
    assert np.array_equal(ds.rewards, r)


def test_csv_without_rewards(tmp_path):
    path = str(tmp_path / "d.csv")
    save_samples(path, np.eye(3))
    ds = load_dataset(path)
    assert ds.rewards is None
    assert np.array_equal(ds.X, np.eye(3))


def test_csv_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "bad.csv"

    p.write_text("x0,x1\n1.0\n")
    with pytest.raises(DataError, match="line 2"):
        load_dataset(str(p))

    p.write_text("x0,x1\n1.0,2.0\n1.0,oops\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset(str(p))

    p.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(DataError, match="line 1"):
        load_dataset(str(p))

    p.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_dataset(str(p))


def test_large_table_round_trip(tmp_path):
    # shaped like a parametric design table: wide rows, thousands of entries
    rng = np.random.default_rng(2)
    X = rng.random((2000, 20))
    path = str(tmp_path / "wide.csv")
    save_samples(path, X)
    ds = load_dataset(path)
    assert ds.X.shape == (2000, 20)
    assert np.array_equal(ds.X, X)
