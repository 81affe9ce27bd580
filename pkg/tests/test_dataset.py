import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from lingamkit.dataset import (DataMatrix, TrialRecord, describe, load_trials, spearman_matrix, standardize,
                               to_matrix, vif, write_trials)
from lingamkit.errors import DataValidationError, NumericError
from lingamkit.synth import fixture_trials

HEADER = "participant,condition,trial,Q1,Q2,Q3,Q4,Q5,Q6,CIT,CT,ACT"


def _rec(**kw):
    base = dict(participant_id="P01", condition="non", trial_index=1, q1=3, q2=3, q3=3, q4=3, q5=3, q6=3,
                cit=2.0, ct=4.0, act=3.0)
    base.update(kw)
    return TrialRecord(**base)


def _write(tmp_path, *rows, header=HEADER, name="t.csv"):
    path = tmp_path / name
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


def test_record_validation():
    with pytest.raises(DataValidationError):
        _rec(q3=6)
    with pytest.raises(DataValidationError):
        _rec(cit=0.0)
    with pytest.raises(DataValidationError):
        _rec(ct=float("nan"))
    with pytest.raises(DataValidationError):
        _rec(trial_index=0)
    assert _rec().get("Q1") == _rec().get("q1") == 3


def test_roundtrip(tmp_path):
    recs = fixture_trials(0, n_participants=3)
    write_trials(recs, tmp_path / "x.csv")
    assert load_trials(tmp_path / "x.csv") == recs


def test_delimiter_sniffed(tmp_path):
    row = "P01;non;1;1;2;3;4;5;1;2.5;4.0;3.1"
    path = _write(tmp_path, row, header=HEADER.replace(",", ";"))
    (rec,) = load_trials(path)
    assert rec.q5 == 5 and rec.cit == 2.5


def test_custom_schema(tmp_path):
    path = _write(tmp_path, "P01,non,1,1,2,3,4,5,1,2.5,4.0,3.1", header=HEADER.replace("participant", "pid"))
    assert load_trials(path, schema={"participant_id": "pid"})[0].participant_id == "P01"


@pytest.mark.parametrize("row,fragment", [
    ("P01,non,1,1,2,3,4,5,1,2.5,4.0,-3", "row 2"),
    ("P01,non,1,1,2,3,4,x,1,2.5,4.0,3.1", "row 2, column 'Q5'"),
    ("P01,non,1,1,2,3,4,7,1,2.5,4.0,3.1", "row 2"),
    ("P01,non,1,1,2,3,4,2.5,1,2.5,4.0,3.1", "row 2"),
])
def test_bad_rows_name_the_row(tmp_path, row, fragment):
    path = _write(tmp_path, "P01,non,2,1,2,3,4,5,1,2.5,4.0,3.1", row)
    with pytest.raises(DataValidationError, match=fragment):
        load_trials(path)


def test_duplicate_key(tmp_path):
    row = "P01,non,1,1,2,3,4,5,1,2.5,4.0,3.1"
    with pytest.raises(DataValidationError, match="duplicate"):
        load_trials(_write(tmp_path, row, row))


def test_missing_column(tmp_path):
    with pytest.raises(DataValidationError, match="ACT"):
        load_trials(_write(tmp_path, header=HEADER.replace(",ACT", "")))


def test_to_matrix_and_aggregate():
    recs = [_rec(trial_index=1, q1=1), _rec(trial_index=2, q1=4), _rec(participant_id="P02", q1=5)]
    m = to_matrix(recs, ["Q1", "CT"])
    assert m.values.tolist() == [[1, 4], [4, 4], [5, 4]]
    agg = to_matrix(recs, ["Q1"], aggregate=True)
    assert agg.values[:, 0].tolist() == [2.5, 5.0]
    with pytest.raises(DataValidationError):
        to_matrix(recs, ["Q1", "Q1"])
    with pytest.raises(DataValidationError):
        to_matrix(recs, ["Q9"])


def test_matrix_is_read_only():
    m = DataMatrix(("a",), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        m.values[0, 0] = 1.0


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40).filter(lambda v: np.ptp(v) > 1e-3))
def test_standardize_moments(v):
    z = standardize(DataMatrix(("a",), np.array(v)[:, None])).values[:, 0]
    assert abs(z.mean()) < 1e-12
    assert z.std(ddof=1) == pytest.approx(1.0, abs=1e-12)


def test_standardize_zero_variance_names_column():
    with pytest.raises(NumericError, match="flat"):
        standardize(DataMatrix(("ok", "flat"), np.array([[1.0, 2.0], [2.0, 2.0], [3.0, 2.0]])))


def test_describe_oracle():
    d = describe(DataMatrix(("a",), np.array([[1.0], [2.0], [3.0], [10.0]])))["a"]
    assert (d.mean, d.median, d.min, d.max) == (4.0, 2.5, 1.0, 10.0)
    assert d.std == pytest.approx(np.std([1, 2, 3, 10], ddof=1))
    assert d.iqr == pytest.approx(4.75 - 1.75)
    single = describe(DataMatrix(("a",), np.array([[7.0]])))["a"]
    assert single.single_observation and single.std == 0.0


def test_spearman_matches_scipy(rng):
    x = rng.integers(1, 6, size=(50, 4)).astype(float)
    res = spearman_matrix(DataMatrix(tuple("abcd"), x))
    ref = sps.spearmanr(x)
    np.testing.assert_allclose(res.rho, ref.statistic, atol=1e-12)
    np.testing.assert_allclose(res.p_value[~np.eye(4, dtype=bool)], ref.pvalue[~np.eye(4, dtype=bool)],
                               rtol=1e-9)


def test_spearman_constant_column():
    x = np.column_stack([np.arange(6.0), np.ones(6), np.arange(6.0) ** 2])
    res = spearman_matrix(DataMatrix(("a", "k", "c"), x))
    assert np.isnan(res.rho[0, 1]) and res.undefined_pairs == (("a", "k"), ("k", "c"))
    assert res.rho[0, 2] == 1.0 and res.p_value[0, 2] == 0.0


def test_vif_oracle(rng):
    x = rng.normal(size=(200, 3))
    out = vif(DataMatrix(("a", "b", "c"), x))
    for j, name in enumerate("abc"):
        others = np.column_stack([np.ones(200), np.delete(x, j, axis=1)])
        beta = np.linalg.lstsq(others, x[:, j], rcond=None)[0]
        r2 = 1 - np.sum((x[:, j] - others @ beta) ** 2) / np.sum((x[:, j] - x[:, j].mean()) ** 2)
        assert out[name] == pytest.approx(1 / (1 - r2), rel=1e-10)


def test_vif_collinear_is_inf(rng):
    a, c = rng.normal(size=(2, 40))
    out = vif(DataMatrix(("a", "b", "c"), np.column_stack([a, 2 * a + 1, c])))
    assert math.isinf(out["a"]) and math.isinf(out["b"]) and math.isfinite(out["c"])


def test_vif_known_r2():
    # column a = projection onto b plus an orthogonal part sized so R^2 = 0.75 exactly
    rng = np.random.default_rng(1)
    b, c = rng.normal(size=(2, 100))
    design = np.column_stack([np.ones(100), b, c])
    noise = rng.normal(size=100)
    noise -= design @ np.linalg.lstsq(design, noise, rcond=None)[0]
    fitted = b - b.mean()
    noise *= np.sqrt((fitted @ fitted) / 3 / (noise @ noise))  # SSE/SST = 1/4
    a = fitted + noise
    assert vif(DataMatrix(("a", "b", "c"), np.column_stack([a, b, c])))["a"] == pytest.approx(4.0, abs=1e-9)


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_correlation_and_vif_invariants(seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(1, 6, size=(30, 4)).astype(float)
    x[:, 3] += rng.normal(size=30)
    m = DataMatrix(tuple("abcd"), x)
    res = spearman_matrix(m)
    finite = np.isfinite(res.rho)
    assert np.allclose(res.rho[finite], res.rho.T[finite], atol=1e-12, rtol=0)
    assert np.all(np.diag(res.rho) == 1.0)
    assert all(v >= 1 - 1e-9 for v in vif(m).values())
    # single-column monotone transform leaves rho unchanged
    y = x.copy()
    y[:, 3] = np.exp(y[:, 3])
    assert np.array_equal(np.nan_to_num(spearman_matrix(DataMatrix(tuple("abcd"), y)).rho),
                          np.nan_to_num(res.rho))
    # row order does not matter to describe
    perm = rng.permutation(30)
    d1, d2 = describe(m), describe(DataMatrix(m.column_names, x[perm]))
    for k in d1:
        for f in ("mean", "std", "median", "iqr", "min", "max"):
            assert getattr(d1[k], f) == pytest.approx(getattr(d2[k], f), abs=1e-12)
        assert d1[k].min <= d1[k].median <= d1[k].max and d1[k].iqr >= 0
