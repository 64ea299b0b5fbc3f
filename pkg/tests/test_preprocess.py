import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import pearson_definition
from solarcast.data import LabeledDataset
from solarcast.errors import AllMissingFeature, EmptyInput, LengthMismatch, SchemaMismatch, TooShort, \
    TopMExceedsFeatureCount
from solarcast.data import FeatureSchema
from solarcast.preprocess import (
    FittedPipeline,
    PreprocessOptions,
    apply_pipeline,
    denormalize,
    fit_pipeline,
    pearson_r,
    quantile,
    select_features,
    tukey_fences,
)


def make_ds(features, target=None):
    X = np.asarray(features, dtype=float)
    n = X.shape[0]
    y = np.arange(n, dtype=float) if target is None else np.asarray(target, dtype=float)
    names = tuple(f"f{i}" for i in range(X.shape[1]))
    return LabeledDataset(np.arange(n), X, y, FeatureSchema(names, ("u",) * len(names)))


# ---- quantile


def test_quantile_midpoint():
    assert quantile([1, 2, 3, 4], 0.5) == 2.5


@pytest.mark.parametrize("q", [0.0, 0.3, 1.0])
def test_quantile_singleton(q):
    assert quantile([5], q) == 5


def test_quantile_exact_rank():
    # position 0.25 * 4 = 1.0 lands on the second element
    assert quantile([1, 2, 3, 4, 5], 0.25) == 2.0


def test_quantile_empty():
    with pytest.raises(EmptyInput):
        quantile([], 0.5)


def test_fence_flags_large_value():
    values = [1, 2, 3, 4, 5, 6, 7, 8, 1000]
    # 9 sorted values: Q1 at position 2 -> 3, Q3 at position 6 -> 7, IQR 4
    assert quantile(values, 0.25) == 3.0
    assert quantile(values, 0.75) == 7.0
    lo, hi = tukey_fences(values)
    assert (lo, hi) == (-3.0, 13.0)
    assert 1000 > hi


def test_outlier_row_dropped_at_fit_and_apply():
    col = np.array([1, 2, 3, 4, 5, 6, 7, 8, 1000], dtype=float)
    ds = make_ds(np.column_stack([col, np.arange(9.0)]), target=np.ones(9))
    p = fit_pipeline(ds, np.arange(9))
    assert p.fences.upper[0] == 13.0
    Z, y, kept = apply_pipeline(p, ds)
    assert 8 not in kept and len(kept) == 8
    clip = fit_pipeline(ds, np.arange(9), PreprocessOptions(policy="clip"))
    Z, y, kept = apply_pipeline(clip, ds)
    assert len(kept) == 9


def test_no_outliers_drops_nothing(rng):
    X = rng.uniform(0, 1, size=(200, 3))
    ds = make_ds(X, target=rng.uniform(0, 1, 200))
    p = fit_pipeline(ds, np.arange(200))
    _, _, kept = apply_pipeline(p, ds)
    assert len(kept) == 200


# ---- pearson


def test_pearson_affine():
    x = np.array([1.0, 4.0, 2.0, 8.0])
    assert pearson_r(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-15)
    assert pearson_r(x, -x) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_hand_example():
    x, y = [1.0, 2.0, 3.0], [2.0, 1.0, 3.0]
    # deviations (-1,0,1) and (0,-1,1): sxy=1, sxx=syy=2
    assert pearson_definition(x, y) == 0.5
    assert pearson_r(x, y) == pytest.approx(0.5, abs=1e-15)


def test_pearson_zero_variance_is_zero():
    assert pearson_r([1, 1, 1], [1, 2, 3]) == 0.0


def test_pearson_errors():
    with pytest.raises(LengthMismatch):
        pearson_r([1, 2], [1, 2, 3])
    with pytest.raises(TooShort):
        pearson_r([1], [1])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(
    x=arrays(np.float64, 12, elements=finite),
    y=arrays(np.float64, 12, elements=finite),
    a=st.floats(0.1, 100),
    b=finite,
)
@settings(max_examples=80, deadline=None)
def test_pearson_affine_invariance(x, y, a, b):
    r = pearson_r(x, y)
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert pearson_r(a * x + b, y) == pytest.approx(r, abs=1e-9)
    assert pearson_r(-a * x + b, y) == pytest.approx(-r, abs=1e-9)
    assert -1.0 <= r <= 1.0


@given(x=arrays(np.float64, 8, elements=finite), y=arrays(np.float64, 8, elements=finite))
@settings(max_examples=60, deadline=None)
def test_pearson_matches_definition(x, y):
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert pearson_r(x, y) == pytest.approx(pearson_definition(list(x), list(y)), abs=1e-9)


# ---- selection


def test_select_ranking():
    assert select_features([0.9, 0.1, 0.5], 2).kept == (0, 2)


def test_select_all_preserves_score_order():
    assert select_features([0.2, 0.9, 0.5]).kept == (1, 2, 0)


def test_select_tie_goes_to_lower_index():
    assert select_features([0.5, 0.5], 1).kept == (0,)


def test_select_uses_absolute_score():
    assert select_features([-0.9, 0.5], 1).kept == (0,)


def test_select_too_many():
    with pytest.raises(TopMExceedsFeatureCount):
        select_features([0.1, 0.2], 3)


def test_feature_identical_to_target_ranks_first(rng):
    y = rng.uniform(0, 10, 50)
    X = np.column_stack([rng.normal(size=50), y, rng.normal(size=50)])
    p = fit_pipeline(make_ds(X, y), np.arange(50), PreprocessOptions(fence_k=100.0))
    assert p.select.kept[0] == 1
    assert p.select.scores[1] == pytest.approx(1.0, abs=1e-12)


# ---- fit / apply


def test_minmax_params_are_extremes():
    ds = make_ds([[0.0], [10.0]], target=[1.0, 2.0])
    p = fit_pipeline(ds, [0, 1])
    assert (p.norm.a[0], p.norm.b[0]) == (0.0, 10.0)
    Z, _, _ = apply_pipeline(p, ds)
    assert Z[:, 0].tolist() == [0.0, 1.0]


def test_constant_column_maps_to_zero():
    ds = make_ds([[3.0, 1.0], [3.0, 2.0], [3.0, 3.0]])
    p = fit_pipeline(ds, [0, 1, 2], PreprocessOptions(policy="clip"))
    other = make_ds([[7.0, 1.0]])
    Z, _, _ = apply_pipeline(p, other)
    col = p.select.kept.index(0)
    assert Z[0, col] == 0.0


def test_test_value_above_train_max_is_not_reclamped():
    X = np.column_stack([np.arange(10.0), np.arange(10.0)])
    ds = make_ds(np.vstack([X, [[9.5, 9.5]]]))
    p = fit_pipeline(ds, np.arange(10))
    Z, _, _ = apply_pipeline(p, ds, [10])
    assert np.all(Z > 1.0)


def test_imputation_uses_training_mean():
    X = np.array([[1.0], [np.nan], [3.0], [100.0]])
    ds = make_ds(X, target=[0.0, 1.0, 2.0, 3.0])
    p = fit_pipeline(ds, [0, 1, 2], PreprocessOptions(policy="clip"))
    assert p.impute[0] == 2.0


def test_all_missing_feature_is_an_error():
    X = np.array([[np.nan, 1.0], [np.nan, 2.0]])
    with pytest.raises(AllMissingFeature):
        fit_pipeline(make_ds(X), [0, 1])


def test_schema_mismatch_on_apply():
    p = fit_pipeline(make_ds(np.arange(6.0).reshape(3, 2)), [0, 1, 2])
    with pytest.raises(SchemaMismatch):
        apply_pipeline(p, make_ds(np.arange(9.0).reshape(3, 3)))


def test_zscore_option(rng):
    X = rng.normal(5, 2, size=(100, 2))
    ds = make_ds(X)
    p = fit_pipeline(ds, np.arange(100), PreprocessOptions(norm="zscore", policy="clip"))
    Z, _, _ = apply_pipeline(p, ds)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)


def test_statistics_come_from_training_rows_only(rng):
    X = rng.uniform(0, 1, size=(40, 2))
    X[30:] += 50.0
    ds = make_ds(X)
    p = fit_pipeline(ds, np.arange(30))
    assert p.norm.b.max() < 1.0 + 1e-12
    assert p.fitted_on == 30


def test_apply_is_row_local(rng):
    """A test row's output depends only on that row and the frozen pipeline."""
    X = rng.uniform(0, 1, size=(60, 3))
    X[rng.random(X.shape) < 0.1] = np.nan
    ds = make_ds(X, target=rng.uniform(0, 1, 60))
    p = fit_pipeline(ds, np.arange(40), PreprocessOptions(policy="clip"))
    test = np.arange(40, 60)
    Z, _, kept = apply_pipeline(p, ds, test)
    X2 = X.copy()
    X2[41:] = rng.uniform(-5, 5, size=X2[41:].shape)
    ds2 = make_ds(X2, target=ds.target)
    perm = rng.permutation(test)
    Z2, _, kept2 = apply_pipeline(p, ds2, perm)
    assert np.array_equal(Z2[list(kept2).index(40)], Z[0])


@given(arrays(np.float64, (30, 3), elements=st.floats(-1e4, 1e4, allow_nan=False)))
@settings(max_examples=50, deadline=None)
def test_minmax_round_trip(X):
    ds = make_ds(X)
    p = fit_pipeline(ds, np.arange(30), PreprocessOptions(policy="clip"))
    Z, _, _ = apply_pipeline(p, ds)
    inv_order = np.argsort(p.select.kept)
    back = denormalize(Z[:, inv_order], p.norm)
    Xc = np.clip(X, p.fences.lower, p.fences.upper)
    span = p.norm.b - p.norm.a
    ok = span > 0
    np.testing.assert_allclose(back[:, ok], Xc[:, ok], rtol=0, atol=1e-9 * max(1.0, np.abs(X).max()))


def test_pipeline_dict_round_trip(small_synth):
    p = fit_pipeline(small_synth, np.arange(small_synth.n))
    q = FittedPipeline.from_dict(p.to_dict())
    a, _, ka = apply_pipeline(p, small_synth)
    b, _, kb = apply_pipeline(q, small_synth)
    assert np.array_equal(a, b) and np.array_equal(ka, kb)
