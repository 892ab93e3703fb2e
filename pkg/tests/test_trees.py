import numpy as np
import pytest

from rddkit.exceptions import DataError, NumericalError
from rddkit.trees import (
    fit_ensemble,
    load_ensemble,
    predict_ensemble,
    r2_score,
    save_ensemble,
)


def make_regression(n, d, seed, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, d))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 - 0.5 * X[:, 2] + noise * rng.standard_normal(n)
    return X, y


def test_single_stump_recovers_two_level_target():
    X = np.repeat([[0.0], [1.0]], 5, axis=0)
    y = np.repeat([0.0, 10.0], 5)
    ens, history = fit_ensemble(X, y, n_trees=1, max_depth=1, shrinkage=1.0)
    assert ens.base_prediction == 5.0
    assert len(ens.trees) == 1
    tree = ens.trees[0]
    assert tree.feature[0] == 0
    # the tied candidate thresholds all induce the same partition; the
    # smallest one wins
    assert tree.threshold[0] == 0.0
    pred = predict_ensemble(ens, X)
    assert np.array_equal(pred, y)


def test_depth_zero_trees_predict_the_mean():
    X, y = make_regression(50, 3, seed=1)
    ens, _ = fit_ensemble(X, y, n_trees=3, max_depth=0, shrinkage=1.0)
    pred = predict_ensemble(ens, X)
    assert np.allclose(pred, y.mean(), atol=1e-12)


def best_split_bruteforce(X, resid, n_thresholds=32):
    """Scan every (feature, quantile threshold) pair for the largest SSE drop.

    Ties resolve to the lowest feature index, then the lowest threshold
    index, matching the fitting convention.
    """
    n, d = X.shape
    qs = np.arange(1, n_thresholds + 1) / (n_thresholds + 1)
    thresholds = np.quantile(X, qs, axis=0).T
    total = resid.sum()
    parent = total * total / n
    best = (0.0, -1, -1)
    for f in range(d):
        for k in range(n_thresholds):
            mask = X[:, f] <= thresholds[f, k]
            nl = int(mask.sum())
            if nl == 0 or nl == n:
                continue
            sl = resid[mask].sum()
            sr = total - sl
            gain = sl * sl / nl + sr * sr / (n - nl) - parent
            if gain > best[0]:
                best = (gain, f, k)
    return best, thresholds


def test_root_split_matches_exhaustive_search():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((200, 5))
        y = rng.standard_normal(200) + 2.0 * (X[:, seed % 5] > 0.3)
        ens, _ = fit_ensemble(X, y, n_trees=1, max_depth=1, shrinkage=1.0)
        tree = ens.trees[0]
        resid = y - y.mean()
        (gain, f, k), thresholds = best_split_bruteforce(X, resid)
        assert tree.feature[0] == f
        assert tree.threshold[0] == thresholds[f, k]
        # leaves carry the mean residual of their side
        mask = X[:, f] <= thresholds[f, k]
        left_leaf = tree.value[tree.left[0]]
        right_leaf = tree.value[tree.right[0]]
        assert left_leaf == pytest.approx(resid[mask].mean(), rel=1e-12)
        assert right_leaf == pytest.approx(resid[~mask].mean(), rel=1e-12)


def test_split_tie_breaks_to_lowest_feature():
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal(100)
    X = np.column_stack([x0, x0.copy()])  # duplicate feature
    y = 1.5 * x0 + 0.1 * rng.standard_normal(100)
    ens, _ = fit_ensemble(X, y, n_trees=1, max_depth=1, shrinkage=1.0)
    assert ens.trees[0].feature[0] == 0


def test_mse_monotone_in_shrinkage_range():
    X, y = make_regression(300, 3, seed=4)
    for shrinkage in (0.1, 1.0, 2.0):
        _, history = fit_ensemble(X, y, n_trees=50, max_depth=3, shrinkage=shrinkage)
        h = np.array(history)
        assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, h[:-1]))
        if shrinkage < 2.0:
            assert h[-1] < h[0]
        else:
            # the update reflects residuals about the leaf mean, leaving the
            # squared error exactly unchanged round over round
            assert np.allclose(h, h[0], rtol=1e-12)


def test_heldout_r2_on_learnable_function():
    X, y = make_regression(1000, 4, seed=9)
    ens, history = fit_ensemble(X[:800], y[:800], n_trees=200, max_depth=4,
                                shrinkage=0.1)
    pred = predict_ensemble(ens, X[800:])
    assert r2_score(pred, y[800:]) > 0.9
    assert history[-1] < history[0]


def test_prediction_matches_manual_traversal():
    X, y = make_regression(150, 3, seed=2)
    ens, _ = fit_ensemble(X, y, n_trees=20, max_depth=4, shrinkage=0.3)

    def walk(tree, row):
        node = 0
        while tree.feature[node] >= 0:
            if row[tree.feature[node]] <= tree.threshold[node]:
                node = tree.left[node]
            else:
                node = tree.right[node]
        return tree.value[node]

    manual = np.full(X.shape[0], ens.base_prediction)
    for tree in ens.trees:
        manual += ens.shrinkage * np.array([walk(tree, row) for row in X])
    assert np.array_equal(predict_ensemble(ens, X), manual)


def test_single_vector_prediction():
    X, y = make_regression(100, 3, seed=3)
    ens, _ = fit_ensemble(X, y, n_trees=10, max_depth=3)
    batch = predict_ensemble(ens, X[:5])
    for i in range(5):
        assert predict_ensemble(ens, X[i]) == batch[i]
    with pytest.raises(ValueError):
        predict_ensemble(ens, np.zeros(7))


def test_fit_determinism():
    X, y = make_regression(200, 4, seed=11)
    e1, h1 = fit_ensemble(X, y, n_trees=30, max_depth=3)
    e2, h2 = fit_ensemble(X, y, n_trees=30, max_depth=3)
    assert h1 == h2
    assert np.array_equal(predict_ensemble(e1, X), predict_ensemble(e2, X))


def test_constant_targets_yield_base_only_model():
    X = np.random.default_rng(0).standard_normal((20, 3))
    y = np.full(20, 2.5)
    ens, history = fit_ensemble(X, y)
    assert ens.n_trees == 0
    assert history == []
    assert np.all(predict_ensemble(ens, X) == 2.5)


def test_fit_input_validation():
    X, y = make_regression(9, 3, seed=0)
    with pytest.raises(ValueError):
        fit_ensemble(X, y)
    X, y = make_regression(20, 3, seed=0)
    y[3] = np.nan
    with pytest.raises(ValueError):
        fit_ensemble(X, y)


def test_r2_score_values():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2_score(t, t) == 1.0
    assert r2_score(np.full(4, t.mean()), t) == 0.0
    with pytest.raises(ValueError):
        r2_score(t[:3], t)
    with pytest.raises(NumericalError):
        r2_score(t, np.full(4, 1.0))


def test_save_load_round_trip(tmp_path):
    X, y = make_regression(200, 3, seed=5)
    ens, _ = fit_ensemble(X, y, n_trees=25, max_depth=4, shrinkage=0.2)
    path = tmp_path / "model.rddt"
    save_ensemble(path, ens)
    back = load_ensemble(path)
    assert back.d == ens.d
    assert back.shrinkage == ens.shrinkage
    assert back.base_prediction == ens.base_prediction
    assert back.max_depth == ens.max_depth
    assert len(back.trees) == len(ens.trees)
    assert np.array_equal(predict_ensemble(back, X), predict_ensemble(ens, X))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.rddt"
    path.write_bytes(b"not a model at all")
    with pytest.raises(DataError):
        load_ensemble(path)
    good = tmp_path / "good.rddt"
    X, y = make_regression(50, 3, seed=6)
    ens, _ = fit_ensemble(X, y, n_trees=2, max_depth=2)
    save_ensemble(good, ens)
    raw = bytearray(good.read_bytes())
    raw[4:8] = (99).to_bytes(4, "little")
    bad = tmp_path / "bad_version.rddt"
    bad.write_bytes(bytes(raw))
    with pytest.raises(DataError):
        load_ensemble(bad)
