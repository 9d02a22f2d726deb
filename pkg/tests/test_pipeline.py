import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daema.errors import ConfigError, DatasetTooSmallError, DegenerateError, ParseError
from daema.pipeline import (
    Dataset,
    DropNA,
    DropOutliers,
    clean,
    fit_norm_stats,
    load_csv,
    parse_rules,
    split,
    znormalize,
)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_small_csv(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,class\n1,2,x\n3,4,y\n5,6,x\n"), "class")
    assert ds.n == 3 and ds.d == 2
    assert ds.task == "classification" and ds.classes == ["x", "y"]
    np.testing.assert_array_equal(ds.label, [0, 1, 0])
    assert ds.feature_names == ["a", "b"]


def test_numeric_labels_mean_regression(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n1,2,0.5\n3,4,1.5\n"), "y")
    assert ds.task == "regression"
    np.testing.assert_array_equal(ds.label, [0.5, 1.5])


def test_na_cells_flagged(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,c\n1,NA,x\n3,4,y\nna,2,x\n"), "c")
    assert np.isnan(ds.features[0, 1]) and np.isnan(ds.features[2, 0])
    np.testing.assert_array_equal(ds.na_rows(), [True, False, True])


def test_parse_error_reports_cell(tmp_path):
    with pytest.raises(ParseError) as err:
        load_csv(write(tmp_path, "a,b\n1,2\n3,oops\n"))
    assert err.value.row == 2 and err.value.column == "b"


def test_missing_label_column(tmp_path):
    with pytest.raises(ConfigError):
        load_csv(write(tmp_path, "a,b\n1,2\n"), "class")


def test_single_feature_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_csv(write(tmp_path, "a,class\n1,x\n2,y\n"), "class")


def test_drop_na_breast_like(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.integers(1, 11, size=(699, 9)).astype(str)
    na_rows = rng.choice(699, 16, replace=False)
    X[na_rows, 5] = "NA"  # the bare-nuclei column is the one with gaps in the public file
    y = rng.choice(["2", "4"], 699)
    lines = [",".join([f"f{j}" for j in range(9)] + ["class"])]
    lines += [",".join(list(r) + [c]) for r, c in zip(X, y)]
    ds = load_csv(write(tmp_path, "\n".join(lines) + "\n"), "class")
    cleaned = clean(ds, [DropNA()])
    assert cleaned.n == ds.n - 16 == 683
    assert not np.isnan(cleaned.features).any()


def test_outlier_rule_removes_four_extremes():
    rng = np.random.default_rng(1)
    X = rng.normal(4000, 40, size=(14980, 14))
    X[[10, 500, 9000, 14000], 5] = [715897.0, 309231.0, 642564.0, 1e6]
    ds = Dataset(X, [f"f{j}" for j in range(14)])
    cleaned = clean(ds, parse_rules("outliers(5, z=50)"))
    assert cleaned.n == ds.n - 4
    assert not np.isin([10, 500, 9000, 14000], cleaned.row_ids).any()


def test_outlier_rule_by_row_ids():
    ds = Dataset(np.arange(20.0).reshape(10, 2), ["a", "b"])
    cleaned = clean(ds, parse_rules("outliers(1, rows=3|7)"))
    np.testing.assert_array_equal(cleaned.row_ids, [0, 1, 2, 4, 5, 6, 8, 9])


def test_clean_without_rules_is_identity():
    ds = Dataset(np.arange(20.0).reshape(10, 2), ["a", "b"])
    assert clean(ds, []) is ds


def test_rule_on_missing_feature():
    ds = Dataset(np.zeros((10, 2)), ["a", "b"])
    with pytest.raises(ConfigError):
        clean(ds, [DropOutliers(2, z=3.0)])


def test_parse_rules():
    rules = parse_rules("drop_na; outliers(5, z=10); outliers(2, rows=3|17)")
    assert rules == [DropNA(), DropOutliers(5, z=10.0), DropOutliers(2, rows=(3, 17))]
    with pytest.raises(ConfigError):
        parse_rules("drop_everything")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.5, 4.0))
def test_clean_idempotent(seed, z):
    rng = np.random.default_rng(seed)
    X = rng.standard_t(2, size=(60, 3))
    X[rng.random((60, 3)) < 0.05] = np.nan
    ds = Dataset(X, ["a", "b", "c"])
    rules = [DropNA(), DropOutliers(1, z=z)]
    once = clean(ds, rules)
    twice = clean(once, rules)
    np.testing.assert_array_equal(once.row_ids, twice.row_ids)


def test_split_sizes():
    ds = Dataset(np.zeros((10, 2)), ["a", "b"])
    pair = split(ds, 0.7, np.random.default_rng(0))
    assert (pair.train.n, pair.test.n) == (7, 3)
    glass = Dataset(np.zeros((214, 9)), [str(j) for j in range(9)])
    pair = split(glass, 0.7, np.random.default_rng(0))
    assert (pair.train.n, pair.test.n) == (149, 65)


def test_split_too_small():
    with pytest.raises(DatasetTooSmallError):
        split(Dataset(np.zeros((9, 2)), ["a", "b"]), 0.7, np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(10, 300), st.integers(0, 2**32 - 1))
def test_split_is_deterministic_partition(n, seed):
    ds = Dataset(np.arange(2.0 * n).reshape(n, 2), ["a", "b"])
    a = split(ds, 0.7, np.random.default_rng(seed))
    b = split(ds, 0.7, np.random.default_rng(seed))
    np.testing.assert_array_equal(a.train.row_ids, b.train.row_ids)
    ids = np.concatenate([a.train.row_ids, a.test.row_ids])
    np.testing.assert_array_equal(np.sort(ids), np.arange(n))
    assert a.train.n == int(np.floor(0.7 * n + 1e-9))


def test_norm_stats_hand_values():
    stats = fit_norm_stats(np.array([[1.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_array_equal(stats.mean, [2.0, 5.0])
    np.testing.assert_array_equal(stats.scale, [1.0, 1e-9])
    np.testing.assert_array_equal(stats.transform(np.array([[1.0, 5.0], [3.0, 5.0]])), [[-1, 0], [1, 0]])


def test_norm_ignores_missing_and_variance_mode():
    X = np.array([[1.0, 0.0], [np.nan, 2.0], [5.0, 4.0]])
    stats = fit_norm_stats(X)
    np.testing.assert_allclose(stats.mean, [3.0, 2.0])
    np.testing.assert_allclose(stats.scale, [2.0, np.sqrt(8 / 3)])
    np.testing.assert_allclose(fit_norm_stats(X, "variance").scale, [4.0, 8 / 3])
    with pytest.raises(ConfigError):
        fit_norm_stats(X, "range")


def test_feature_all_missing_is_degenerate():
    with pytest.raises(DegenerateError):
        fit_norm_stats(np.array([[1.0, np.nan], [2.0, np.nan]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_znormalized_train_has_zero_mean(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(5, 3, size=(40, 4))
    X[rng.random(X.shape) < 0.2] = np.nan
    X[0] = 1.0  # keep every feature observed at least once
    pair = znormalize(split(Dataset(X, list("abcd")), 0.7, rng))
    assert np.all(np.abs(np.nanmean(pair.train.features, axis=0)) < 1e-10)
    np.testing.assert_allclose(pair.stats.inverse(pair.test.features), X[pair.test_index])
