import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import synthetic_series
from qganf import dataprep
from qganf.dataprep import DataError, PriceSeries, ScalingState, WindowSpec


def _write(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_rows(tmp_path):
    s = dataprep.load_csv(_write(tmp_path, "date,adj_close\n2020-01-02,100.5\n2020-01-03,101\n"))
    assert len(s) == 2
    assert s.dates[0] == dt.date(2020, 1, 2)
    assert np.allclose(s.prices, [100.5, 101.0])


def test_load_sorts(tmp_path):
    s = dataprep.load_csv(_write(tmp_path, "date,adj_close\n2020-01-03,2\n2020-01-01,1\n2020-01-02,3\n"))
    assert [d.day for d in s.dates] == [1, 2, 3]
    assert np.allclose(s.prices, [1, 3, 2])


@pytest.mark.parametrize("body,line", [
    ("2020-01-02,100\n2020-01-03,-1.0\n", 3),
    ("2020-01-02,abc\n", 2),
    ("2020-13-02,1\n", 2),
    ("2020-01-02,1\n2020-01-02,2\n", 3),
    ("2020-01-02,1,7\n", 2),
    ("2020-01-02,0\n", 2),
])
def test_load_rejects_bad_rows(tmp_path, body, line):
    p = _write(tmp_path, "date,adj_close\n" + body)
    with pytest.raises(DataError, match=f":{line}:"):
        dataprep.load_csv(p)


def test_load_rejects_header_and_empty(tmp_path):
    with pytest.raises(DataError):
        dataprep.load_csv(_write(tmp_path, "day,close\n2020-01-02,1\n"))
    with pytest.raises(DataError):
        dataprep.load_csv(_write(tmp_path, "date,adj_close\n"))


def test_csv_round_trip(tmp_path):
    s = synthetic_series(40, seed=3)
    p = tmp_path / "s.csv"
    dataprep.write_csv(s, p)
    back = dataprep.load_csv(p)
    assert back.dates == s.dates
    assert np.array_equal(back.prices, s.prices)


def test_price_series_invariants():
    d = (dt.date(2020, 1, 1), dt.date(2020, 1, 2))
    with pytest.raises(DataError):
        PriceSeries(d, [1.0])
    with pytest.raises(DataError):
        PriceSeries(d, [1.0, np.nan])
    with pytest.raises(DataError):
        PriceSeries(d[::-1], [1.0, 2.0])


def test_hp_lambda_zero_identity(rng):
    y = rng.normal(size=30)
    assert np.array_equal(dataprep.hp_filter(y, 0), y)


@pytest.mark.parametrize("lamb", [1.0, 1600.0, 1e6])
def test_hp_linear_fixed_point(lamb):
    y = 3.0 + 0.7 * np.arange(60)
    assert np.max(np.abs(dataprep.hp_filter(y, lamb) - y)) < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-10, 10), st.integers(3, 300), st.floats(1e-3, 1e12))
def test_hp_linear_fixed_point_any_lambda(a, slope, n, lamb):
    y = a + slope * np.arange(n)
    assert np.max(np.abs(dataprep.hp_filter(y, lamb) - y)) < 1e-8


def test_hp_matches_dense_oracle(rng):
    for _ in range(100):
        y = rng.normal(size=50).cumsum() + 100
        assert np.max(np.abs(dataprep.hp_filter(y, 1600) - oracles.hp_dense(y, 1600))) < 1e-8


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_hp_short_series_match_oracle(rng, n):
    y = rng.normal(size=n)
    assert np.allclose(dataprep.hp_filter(y, 10.0), oracles.hp_dense(y, 10.0), atol=1e-12)


def test_hp_large_lambda_approaches_ols(rng):
    y = rng.normal(size=30) + 0.3 * np.arange(30)
    x = np.arange(30)
    slope, intercept = np.polyfit(x, y, 1)
    assert np.max(np.abs(dataprep.hp_filter(y, 1e10) - (slope * x + intercept))) < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 80), st.floats(0.1, 1e5), st.integers(0, 2 ** 32 - 1))
def test_hp_preserves_mean(n, lamb, seed):
    y = np.random.default_rng(seed).normal(100, 10, size=n)
    assert abs(dataprep.hp_filter(y, lamb).mean() - y.mean()) < 1e-8


def test_hp_errors():
    with pytest.raises(ValueError):
        dataprep.hp_filter([1.0, 2.0], 5)
    with pytest.raises(ValueError):
        dataprep.hp_filter([1.0, np.inf, 2.0], 5)
    with pytest.raises(ValueError):
        dataprep.hp_filter([1.0, 2.0, 3.0], -1)


@pytest.mark.parametrize("n,n_train,n_test", [(10, 8, 2), (11, 8, 3), (2520, 2016, 504)])
def test_split_counts(n, n_train, n_test):
    tr, te = dataprep.train_test_split(np.arange(n))
    assert (len(tr), len(te)) == (n_train, n_test)
    assert np.array_equal(np.concatenate([tr, te]), np.arange(n))


def test_split_series_and_errors():
    tr, te = dataprep.train_test_split(synthetic_series(20))
    assert isinstance(tr, PriceSeries) and len(tr) == 16 and tr.dates[-1] < te.dates[0]
    with pytest.raises(ValueError):
        dataprep.train_test_split(np.arange(9))


def test_minmax_examples():
    st_ = dataprep.minmax_fit([100, 200])
    assert dataprep.minmax_apply(150, st_) == 0.5
    assert dataprep.minmax_apply(250, st_) == 1.5
    with pytest.raises(ValueError):
        dataprep.minmax_fit([3, 3, 3])
    with pytest.raises(ValueError):
        ScalingState(2.0, 1.0)
    assert ScalingState.from_dict(st_.to_dict()) == st_


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1, 1e5), min_size=2, max_size=40, unique=True))
def test_minmax_round_trip(values):
    p = np.array(values)
    s = dataprep.minmax_fit(p)
    scaled = dataprep.minmax_apply(p, s)
    assert scaled.min() == 0 and scaled.max() == 1
    assert np.allclose(dataprep.minmax_invert(scaled, s), p, rtol=1e-12, atol=1e-12 * p.max())


def test_l2_normalize():
    unit, norm = dataprep.l2_normalize([3, 4])
    assert np.allclose(unit, [0.6, 0.8]) and norm == 5
    unit, norm = dataprep.l2_normalize([0.6, 0.8])
    assert np.allclose(unit, [0.6, 0.8]) and abs(norm - 1) < 1e-15
    with pytest.raises(ValueError):
        dataprep.l2_normalize([0, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2 ** 32 - 1))
def test_l2_round_trip(n, seed):
    w = np.random.default_rng(seed).uniform(0.01, 1, n)
    unit, norm = dataprep.l2_normalize(w)
    assert abs(np.linalg.norm(unit) - 1) < 1e-12
    assert np.max(np.abs(unit * norm - w)) < 1e-12


def test_window_spec_validation():
    with pytest.raises(ValueError):
        WindowSpec(0, 1)
    with pytest.raises(ValueError):
        WindowSpec(2, 1, stride=0)
    with pytest.raises(ValueError):
        WindowSpec(2, 3, overlapped=True)
    assert WindowSpec(16, 8, overlapped=True).target_len == 16


def test_window_examples():
    p = np.arange(6.0)
    assert len(dataprep.make_windows(p, WindowSpec(3, 1))) == 3
    assert len(dataprep.make_windows(p, WindowSpec(3, 1, stride=2))) == 2
    ds = dataprep.make_windows(np.arange(5.0), WindowSpec(2, 1))
    pairs = {(tuple(a), tuple(b)) for a, b in zip(ds.past, ds.target)}
    assert pairs == {((0, 1), (2,)), ((1, 2), (3,)), ((2, 3), (4,))}
    with pytest.raises(ValueError):
        dataprep.make_windows(np.arange(3.0), WindowSpec(3, 1))


def test_window_count_brute_force():
    for n in range(1, 51):
        for b in range(1, 8):
            for f in range(1, 5):
                for stride in range(1, 5):
                    brute = sum(1 for t in range(0, n, stride) if t + b + f <= n)
                    assert dataprep.window_count(n, b, f, stride) == brute
                    if brute:
                        ds = dataprep.make_windows(np.arange(float(n)), WindowSpec(b, f, stride))
                        assert len(ds) == brute
                        t = ds.starts[-1]
                        assert np.array_equal(ds.target[-1], np.arange(t + b, t + b + f))


def test_overlapped_windows():
    p = np.arange(4.0)
    ds = dataprep.make_overlapped_windows(p, 2, 1)
    assert np.array_equal(ds.past[0], [0, 1]) and np.array_equal(ds.target[0], [1, 2])
    rng = np.random.default_rng(1)
    ds = dataprep.make_overlapped_windows(rng.uniform(size=60), 16, 8)
    assert ds.target.shape[1] == 16
    assert np.array_equal(ds.target[:, :8], ds.past[:, 8:])
    with pytest.raises(ValueError):
        dataprep.make_overlapped_windows(p, 1, 2)


def test_normalized_windows(rng):
    ds = dataprep.make_windows(rng.uniform(0.1, 1, 40), WindowSpec(4, 2))
    past, target = ds.normalized()
    assert np.allclose(np.linalg.norm(past, axis=1), 1, atol=1e-10)
    assert np.allclose(np.linalg.norm(target, axis=1), 1, atol=1e-10)
    assert np.allclose(past * ds.past_norms[:, None], ds.past, atol=1e-10)
    assert np.allclose(target * ds.target_norms[:, None], ds.target, atol=1e-10)


def test_dataset_dict_round_trip(rng):
    s = dataprep.minmax_fit([0, 2])
    ds = dataprep.make_windows(rng.uniform(size=20), WindowSpec(3, 2), s, rng.uniform(1, 2, 20))
    back = dataprep.WindowedDataset.from_dict(ds.to_dict())
    assert np.array_equal(back.past, ds.past) and np.array_equal(back.target_prices, ds.target_prices)
    assert back.scaling == s and back.spec == ds.spec


def test_recover_normalization_examples(rng):
    y = rng.uniform(0.1, 1, 8)
    assert dataprep.recover_normalization(y, y).factor == pytest.approx(1.0, abs=1e-15)
    r = dataprep.recover_normalization(5 * y, y)
    assert abs(r.factor - 5) < 1e-12 and r.residual < 1e-24
    with pytest.raises(ValueError):
        dataprep.recover_normalization(y, np.zeros(8))
    with pytest.raises(ValueError):
        dataprep.recover_normalization(y, y[:4])


def test_recover_normalization_matches_grid_search(rng):
    for _ in range(100):
        a = rng.uniform(0, 1, 8)
        y_hat, _ = dataprep.l2_normalize(rng.uniform(0.05, 1, 8))
        best, res = oracles.grid_search_factor(a, y_hat)
        assert abs(dataprep.recover_normalization(a, y_hat).factor - best) <= res


def test_inverse_pipeline(rng):
    s = dataprep.minmax_fit([100, 300])
    prices = rng.uniform(120, 280, 16)
    unit, norm = dataprep.l2_normalize(dataprep.minmax_apply(prices, s))
    assert np.max(np.abs(dataprep.inverse_pipeline(unit, norm, s, 0) - prices)) < 1e-9
    one = dataprep.inverse_pipeline([1.0], 0.5, s, 1600)
    assert np.allclose(one, [200.0])
    smooth = dataprep.inverse_pipeline(unit, norm, s, 1600)
    assert np.allclose(smooth, dataprep.hp_filter(prices, 1600), atol=1e-8)
    with pytest.raises(ValueError):
        dataprep.inverse_pipeline(unit, 0.0, s)


def test_prepare_counts_and_provenance():
    series = synthetic_series(2520)
    out = dataprep.prepare(series, WindowSpec(4, 2))
    assert out.provenance["n_train"] == 2016 and out.provenance["n_test"] == 504
    assert len(out.train) == 2016 - 5 and len(out.test) == 504 - 5
    assert out.train.past.min() >= 0 and out.train.past.max() <= 1
    assert out.test.starts[0] == 2016
    # truth kept as untransformed prices
    assert np.array_equal(out.test.target_prices[0], series.prices[2020:2022])


def test_prepare_lambda_zero_scales_raw_prices():
    series = synthetic_series(100, seed=2)
    out = dataprep.prepare(series, WindowSpec(4, 2), lamb=0)
    s = out.train.scaling
    assert s.min == series.prices[:80].min() and s.max == series.prices[:80].max()
    assert np.allclose(dataprep.minmax_invert(out.train.target, s), out.train.target_prices)
