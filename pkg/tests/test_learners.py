import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_enumerated_split, central_differences, enumerate_splits, knn_bruteforce, least_squares_gd
from solarcast.errors import DimensionMismatch, InvalidHyperparameter, NonFiniteInput, NonFiniteLoss
from solarcast.learners import (
    ForestModel,
    LearnerSpec,
    LinearModel,
    Tree,
    best_split,
    fit_forest,
    fit_gbm,
    fit_knn,
    fit_learner,
    fit_linear,
    fit_mlp,
    fit_svr,
    fit_tree,
    knn_predict,
    predict,
)
from solarcast.learners.mlp import MlpParams, forward, loss_and_grad, xavier_init
from solarcast.learners.svr import svr_subgradient

X4 = np.array([[1.0], [2.0], [3.0], [4.0]])
Y4 = np.array([0.0, 0.0, 10.0, 10.0])


# ---- linear


def test_linear_exact_interpolation():
    m = fit_linear([[0.0], [1.0]], [1.0, 3.0])
    assert m.intercept == pytest.approx(1.0, abs=1e-12)
    assert m.weights[0] == pytest.approx(2.0, abs=1e-12)


def test_linear_constant_target(rng):
    X = rng.normal(size=(20, 3))
    m = fit_linear(X, np.full(20, 4.2))
    np.testing.assert_allclose(m.weights, 0.0, atol=1e-12)
    assert m.intercept == pytest.approx(4.2, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_linear_matches_gradient_descent(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(6, 2))
    y = rng.normal(size=6)
    w_gd, b_gd = least_squares_gd(X, y)
    m = fit_linear(X, y)
    np.testing.assert_allclose(m.weights, w_gd, atol=1e-6)
    assert m.intercept == pytest.approx(b_gd, abs=1e-6)


def test_linear_singular_falls_back_to_tiny_ridge(rng):
    x = rng.normal(size=10)
    X = np.column_stack([x, x])
    m = fit_linear(X, 3 * x + 1)
    assert m.ridge_lambda == 1e-8
    np.testing.assert_allclose(m.predict(X), 3 * x + 1, atol=1e-6)


def test_ridge_shrinks(rng):
    X = rng.normal(size=(30, 2))
    y = X @ [2.0, -1.0]
    assert np.linalg.norm(fit_linear(X, y, 10.0).weights) < np.linalg.norm(fit_linear(X, y).weights)


def test_linear_rejects_nan():
    with pytest.raises(NonFiniteInput):
        fit_linear([[np.nan]], [1.0])


def test_linear_predict_affine():
    m = LinearModel(np.array([2.0]), 1.0)
    assert predict(m, [[3.0]])[0] == 7.0


def test_predict_dimension_mismatch():
    m = LinearModel(np.array([2.0, 1.0]), 0.0)
    with pytest.raises(DimensionMismatch):
        m.predict(np.ones((3, 3)))


# ---- splits and trees


def test_best_split_constant_targets():
    assert best_split([1, 2, 3], [5, 5, 5]) is None


def test_best_split_step_function():
    thr, gain = best_split(X4[:, 0], Y4)
    candidates = enumerate_splits(list(X4[:, 0]), list(Y4))
    best = min(candidates, key=lambda c: c[1])
    assert thr == best[0] == 2.5
    assert best[1] == 0.0
    assert gain == pytest.approx(100.0)


def test_best_split_two_samples():
    thr, _ = best_split([1.0, 3.0], [0.0, 1.0])
    assert thr == 2.0


@given(
    xs=st.lists(st.integers(0, 12), min_size=2, max_size=30),
    seed=st.integers(0, 2**31),
    min_leaf=st.integers(1, 4),
)
@settings(max_examples=300, deadline=None)
def test_best_split_matches_enumeration_on_ties(xs, seed, min_leaf):
    rng = np.random.default_rng(seed)
    x = np.array(xs, dtype=float)
    y = rng.integers(-20, 20, size=x.size).astype(float)
    res = best_split(x, y, min_leaf)
    ref = best_enumerated_split(list(x), list(y), min_leaf)
    if ref is None or np.all(y == y[0]):
        assert res is None
        return
    assert res[0] == ref[0]
    assert res[1] == pytest.approx(float(ref[1]), rel=1e-9, abs=1e-9)


@given(seed=st.integers(0, 2**31), n=st.integers(2, 60))
@settings(max_examples=100, deadline=None)
def test_best_split_matches_enumeration_continuous(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = rng.normal(size=n) * 100
    res = best_split(x, y)
    ref = best_enumerated_split(list(x), list(y))
    assert res[0] == ref[0]
    assert res[1] == pytest.approx(float(ref[1]), rel=1e-9)


def test_tree_depth_zero_is_mean():
    t = fit_tree(X4, Y4, max_depth=0)
    assert t.node_count == 1
    assert t.predict(X4).tolist() == [5.0] * 4


def test_tree_stump():
    t = fit_tree(X4, Y4, max_depth=1, min_samples_leaf=1)
    assert t.threshold[0] == 2.5
    assert t.predict(X4).tolist() == [0.0, 0.0, 10.0, 10.0]
    assert predict(t, [[4.0]])[0] == 10.0


def test_stump_prediction_from_parts():
    t = Tree.stump(0, 2.5, 0.0, 10.0, 1)
    assert t.predict([[4.0], [1.0]]).tolist() == [10.0, 0.0]


@given(seed=st.integers(0, 2**31), n=st.integers(2, 60), d=st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_full_tree_interpolates_unique_points(seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(n, d)).astype(float) + rng.normal(size=(n, d)) * 1e-3
    y = rng.normal(size=n)
    t = fit_tree(X, y, max_depth=None, min_samples_leaf=1, min_improvement=0.0)
    np.testing.assert_array_equal(t.predict(X), y)


def test_xor_needs_zero_gain_splits():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    assert fit_tree(X, y, max_depth=None, min_samples_leaf=1).node_count == 1
    t = fit_tree(X, y, max_depth=None, min_samples_leaf=1, min_improvement=0.0)
    np.testing.assert_array_equal(t.predict(X), y)


def test_min_samples_leaf_respected(rng):
    X = rng.normal(size=(200, 3))
    t = fit_tree(X, rng.normal(size=200), max_depth=None, min_samples_leaf=7)
    leaves = t.feature == -1
    assert t.n_samples[leaves].min() >= 7


def test_tree_ties_go_to_lower_feature():
    X = np.column_stack([X4[:, 0], X4[:, 0]])
    t = fit_tree(X, Y4, max_depth=1, min_samples_leaf=1)
    assert t.feature[0] == 0


def test_thresholds_are_midpoints(rng):
    X = rng.integers(0, 20, size=(100, 2)).astype(float)
    t = fit_tree(X, rng.normal(size=100), max_depth=4)
    stack = [(0, np.arange(100))]
    while stack:
        node, rows = stack.pop()
        f = t.feature[node]
        if f < 0:
            continue
        vals = np.unique(X[rows, f])
        i = np.searchsorted(vals, t.threshold[node])
        assert vals[i - 1] < t.threshold[node] < vals[i]
        assert t.threshold[node] == (vals[i - 1] + vals[i]) / 2
        go_left = X[rows, f] <= t.threshold[node]
        stack += [(t.left[node], rows[go_left]), (t.right[node], rows[~go_left])]


# ---- forest


def test_forest_degenerates_to_tree(rng):
    X = rng.normal(size=(120, 4))
    y = rng.normal(size=120)
    f = fit_forest(X, y, n_trees=1, bootstrap=False, feature_subsample=4)
    t = fit_tree(X, y)
    Q = rng.normal(size=(100, 4))
    assert f.predict(Q).tobytes() == t.predict(Q).tobytes()


def test_forest_averages():
    f = ForestModel((Tree.leaf(1.0, 1, 2), Tree.leaf(3.0, 1, 2)), (0, 1), 1, True, 2)
    assert f.predict(np.random.default_rng(0).normal(size=(5, 2))).tolist() == [2.0] * 5


def test_forest_deterministic_and_worker_independent(rng):
    X = rng.normal(size=(150, 4))
    y = X[:, 0] * 3 + rng.normal(size=150)
    a = fit_forest(X, y, n_trees=8, seed=11)
    b = fit_forest(X, y, n_trees=8, seed=11)
    c = fit_forest(X, y, n_trees=8, seed=11, n_jobs=4)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert fit_forest(X, y, n_trees=8, seed=12).to_dict() != a.to_dict()


def test_forest_bad_hyperparameters(rng):
    X = rng.normal(size=(10, 3))
    with pytest.raises(InvalidHyperparameter):
        fit_forest(X, np.ones(10), n_trees=0)
    with pytest.raises(InvalidHyperparameter):
        fit_forest(X, np.ones(10), feature_subsample=4)


def test_forest_default_subsample(rng):
    f = fit_forest(rng.normal(size=(30, 4)), rng.normal(size=30), n_trees=2)
    assert f.feature_subsample == 1


# ---- gbm


def test_gbm_one_stump_fits_step():
    g = fit_gbm(X4, Y4, rounds=1, learning_rate=1.0, max_depth=1, min_samples_leaf=1)
    assert g.initial == 5.0
    assert g.predict(X4).tolist() == [0.0, 0.0, 10.0, 10.0]
    assert g.train_mse[-1] == 0.0


def test_gbm_zero_rate_predicts_mean():
    g = fit_gbm(X4, Y4, rounds=1, learning_rate=0.0)
    assert g.predict(X4).tolist() == [5.0] * 4


def test_gbm_mse_non_increasing(rng):
    X = rng.normal(size=(300, 4))
    y = np.sin(X[:, 0]) * 10 + X[:, 1] ** 2 + rng.normal(size=300)
    g = fit_gbm(X, y, rounds=60)
    mse = [float(np.mean((y - F) ** 2)) for F in g.staged_predict(X)]
    assert all(b <= a for a, b in zip(mse, mse[1:]))
    assert mse == pytest.approx(list(g.train_mse), rel=0, abs=0)


@pytest.mark.parametrize("kw", [{"rounds": 0}, {"learning_rate": 1.5}, {"learning_rate": -0.1}])
def test_gbm_bad_hyperparameters(kw):
    with pytest.raises(InvalidHyperparameter):
        fit_gbm(X4, Y4, **kw)


@pytest.mark.parametrize("kind", ["tree", "forest", "gbm", "linreg"])
def test_location_consistency(kind, rng):
    X = rng.normal(size=(80, 3))
    y = X[:, 0] * 5 + rng.normal(size=80)
    params = {"forest": {"n_trees": 5}, "gbm": {"rounds": 10}}.get(kind, {})
    spec = LearnerSpec(kind, params)
    base = fit_learner(spec, X, y).predict(X)
    shifted = fit_learner(spec, X, y + 100.0).predict(X)
    np.testing.assert_allclose(shifted, base + 100.0, rtol=0, atol=1e-9)


# ---- knn


def test_knn_self_neighbour(rng):
    X = rng.normal(size=(20, 3))
    y = rng.normal(size=20)
    m = fit_knn(X, y, k=1)
    assert knn_predict(m, X[7]) == y[7]


def test_knn_all_neighbours_is_mean(rng):
    X = rng.normal(size=(16, 2))
    y = rng.normal(size=16)
    m = fit_knn(X, y, k=16)
    assert knn_predict(m, [0.3, -0.2]) == pytest.approx(y.mean(), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_knn_matches_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 4))
    y = rng.normal(size=50)
    m = fit_knn(X, y, k=5)
    for q in rng.normal(size=(20, 4)):
        assert knn_predict(m, q) == knn_bruteforce(X.tolist(), y.tolist(), q.tolist(), 5)


def test_knn_distance_ties_prefer_lower_row():
    X = np.array([[1.0], [-1.0], [1.0]])
    y = np.array([10.0, 20.0, 30.0])
    assert knn_predict(fit_knn(X, y, k=1), [0.0]) == 10.0
    assert knn_predict(fit_knn(X, y, k=2), [0.0]) == 15.0


def test_knn_inverse_distance():
    X = np.array([[0.0], [3.0]])
    y = np.array([0.0, 9.0])
    m = fit_knn(X, y, k=2, weighting="distance")
    # weights 1/1 and 1/2
    assert knn_predict(m, [1.0]) == pytest.approx(3.0)
    assert knn_predict(m, [3.0]) == 9.0


def test_knn_bad_k(rng):
    with pytest.raises(InvalidHyperparameter):
        fit_knn(rng.normal(size=(3, 1)), np.zeros(3), k=4)


# ---- mlp


def test_zero_network_outputs_bias():
    p = MlpParams(np.zeros((4, 3)), np.zeros(4), np.zeros(4), 0.0)
    assert np.all(forward(p, np.random.default_rng(0).normal(size=(5, 3))) == 0.0)
    p.b2 = 2.5
    assert np.all(forward(p, np.ones((2, 3))) == 2.5)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(3, 4))
    t = rng.normal(size=3)
    p = xavier_init(4, 6, rng)
    p.b1 = rng.normal(size=6)
    p.b2 = 0.3
    _, g = loss_and_grad(p, X, t)
    fd = central_differences(lambda v: loss_and_grad(MlpParams.unflat(v, 6, 4), X, t)[0], p.flat())
    an = g.flat()
    rel = np.abs(an - fd) / np.maximum(np.maximum(np.abs(an), np.abs(fd)), 1e-8)
    assert rel.max() < 1e-4


def test_mlp_learns_zero_function(rng):
    X = rng.uniform(0, 1, size=(64, 3))
    m = fit_mlp(X, np.zeros(64), epochs=500, seed=2)
    assert np.mean(m.predict(X) ** 2) < 1e-3


def test_mlp_deterministic(rng):
    X = rng.uniform(0, 1, size=(50, 2))
    y = X[:, 0] * 4
    a = fit_mlp(X, y, epochs=5, seed=1)
    b = fit_mlp(X, y, epochs=5, seed=1)
    assert a.to_dict() == b.to_dict()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_mlp_divergence_raises(rng):
    X = rng.uniform(0, 1, size=(50, 2))
    with pytest.raises(NonFiniteLoss):
        fit_mlp(X, X[:, 0], learning_rate=1e6, epochs=50)


def test_mlp_fits_smooth_function(rng):
    X = rng.uniform(0, 1, size=(400, 2))
    y = 100 * np.sin(3 * X[:, 0]) + 20 * X[:, 1]
    m = fit_mlp(X, y, epochs=1000, seed=0)
    assert np.sqrt(np.mean((m.predict(X) - y) ** 2)) < 0.2 * y.std()


# ---- svr


def test_svr_wide_tube_stays_at_zero(rng):
    X = rng.normal(size=(30, 2))
    y = rng.uniform(-1, 1, size=30)
    m = fit_svr(X, y, epsilon=np.abs(y).max(), steps=500)
    assert np.all(m.weights == 0.0) and m.intercept == 0.0


def test_svr_recovers_slope(rng):
    x = rng.uniform(0, 1, size=(200, 1))
    y = 3 * x[:, 0]
    m = fit_svr(x, y, epsilon=0.0, C=1000.0, steps=20000, seed=1)
    ls = fit_linear(x, y)
    assert abs(m.weights[0] - 3.0) < 0.05
    assert abs(m.weights[0] - ls.weights[0]) < 0.05


def test_svr_subgradient_inside_tube_is_regularizer_only():
    w = np.array([0.5, -1.0])
    gw, gb = svr_subgradient(w, 0.0, np.array([1.0, 1.0]), -0.4, epsilon=0.2, reg=0.1)
    np.testing.assert_array_equal(gw, 0.1 * w)
    assert gb == 0.0
    gw, gb = svr_subgradient(w, 0.0, np.array([1.0, 1.0]), 3.0, epsilon=0.2, reg=0.1)
    np.testing.assert_array_equal(gw, 0.1 * w - np.array([1.0, 1.0]))
    assert gb == -1.0


@pytest.mark.parametrize("kw", [{"epsilon": -1.0}, {"C": 0.0}])
def test_svr_bad_hyperparameters(kw, rng):
    with pytest.raises(InvalidHyperparameter):
        fit_svr(rng.normal(size=(5, 1)), np.zeros(5), **kw)


# ---- registry


def test_unknown_learner_or_param():
    with pytest.raises(InvalidHyperparameter):
        LearnerSpec("lgbm")
    with pytest.raises(InvalidHyperparameter):
        LearnerSpec("knn", {"depth": 3})


@pytest.mark.parametrize("kind", ["linreg", "tree", "forest", "gbm", "knn", "mlp", "svr"])
def test_every_learner_is_deterministic(kind, rng):
    X = rng.uniform(0, 1, size=(60, 3))
    y = X @ [1.0, 2.0, 3.0]
    small = {"forest": {"n_trees": 3}, "gbm": {"rounds": 5}, "mlp": {"epochs": 3}, "svr": {"steps": 200}}
    spec = LearnerSpec(kind, small.get(kind, {}))
    a = fit_learner(spec, X, y)
    b = fit_learner(spec, X, y)
    assert a.kind == kind
    Q = rng.uniform(0, 1, size=(10, 3))
    assert a.predict(Q).tobytes() == b.predict(Q).tobytes()
    with pytest.raises(DimensionMismatch):
        a.predict(np.ones((2, 5)))
