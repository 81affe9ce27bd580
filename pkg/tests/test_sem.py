import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from lingamkit.dataset import DataMatrix
from lingamkit.lingam import CausalModel, estimate_adjacency
from lingamkit.sem import (assess, baseline_chi_square, chi_square, fit_indices, implied_covariance,
                           ml_discrepancy, model_dof, refit_structure, sample_covariance)
from lingamkit.synth import paper_shaped_fixture, paper_shaped_model


def _true_structure(gt):
    return CausalModel(gt.variable_names, list(range(gt.p)), gt.adjacency, np.ones(gt.p), True)


def test_table_rows_replay():
    a = fit_indices(30.688, 22, 2214.372, 22, 504, gfi_form="baseline")
    assert a.p_chi_square == pytest.approx(0.103, abs=1e-3)
    assert a.gfi == pytest.approx(0.986, abs=1e-3) and a.agfi == pytest.approx(0.986, abs=1e-3)
    b = fit_indices(6.362, 22, 2214.372, 22, 504, gfi_form="baseline")
    assert b.p_chi_square == pytest.approx(1.000, abs=1e-3)
    assert b.gfi == pytest.approx(0.997, abs=1e-3)


def test_formula_oracle():
    chi, dof, chi_b, dof_b, n = 50.0, 10, 400.0, 36, 200
    r = fit_indices(chi, dof, chi_b, dof_b, n)
    assert r.cfi == pytest.approx(1 - 40 / (400 - 36))
    assert r.nfi == pytest.approx(350 / 400)
    assert r.tli == pytest.approx((400 / 36 - 5) / (400 / 36 - 1))
    assert r.rmsea == pytest.approx(np.sqrt(40 / (10 * 199)))
    assert fit_indices(10.0, 10, 400.0, 36, 200).rmsea == 0.0


@given(st.floats(0, 500), st.floats(0, 500))
def test_rmsea_monotone(c1, c2):
    lo, hi = sorted((c1, c2))
    assert fit_indices(lo, 20, 1000.0, 36, 300).rmsea <= fit_indices(hi, 20, 1000.0, 36, 300).rmsea


def test_dof_for_paper_structure():
    model = _true_structure(paper_shaped_model())
    assert model_dof(model) == 45 - (14 + 9) == 22


def test_saturated_model_reproduces_s():
    _, m = paper_shaped_fixture(0)
    sat = estimate_adjacency(m, list(range(9)), method="ols", ols_threshold=0.0, standardized=False)
    s = sample_covariance(m)
    np.testing.assert_allclose(implied_covariance(sat), s, atol=1e-9)
    assert chi_square(sat, m).chi_square == pytest.approx(0.0, abs=1e-8)
    assert ml_discrepancy(s, s) == pytest.approx(0.0, abs=1e-12)
    chi_b, dof_b = baseline_chi_square(m)
    r = fit_indices(0.0, 1, chi_b, dof_b, m.n, s, s)
    assert r.cfi == 1.0 and r.rmsea == 0.0 and r.gfi == 1.0


def test_baseline_conventions():
    _, m = paper_shaped_fixture(0)
    chi_b, dof_b = baseline_chi_square(m)
    assert dof_b == 36
    s = sample_covariance(m)
    corr = s / np.sqrt(np.outer(np.diag(s), np.diag(s)))
    assert chi_b == pytest.approx(-(m.n - 1) * np.linalg.slogdet(corr)[1], rel=1e-10)
    assert baseline_chi_square(m, convention="model", model_dof_value=22) == (chi_b, 22)
    with pytest.raises(ValueError):
        baseline_chi_square(m, convention="model")


def test_refit_is_per_equation_ols():
    gt, m = paper_shaped_fixture(2)
    refit = refit_structure(_true_structure(gt), m)
    z = (m.values - m.values.mean(0)) / m.values.std(0, ddof=1)
    q4 = gt.variable_names.index("Q4")
    parents = np.nonzero(gt.adjacency[q4])[0]
    beta = np.linalg.lstsq(z[:, parents], z[:, q4], rcond=None)[0]
    np.testing.assert_allclose(refit.adjacency[q4, parents], beta, atol=1e-10)


def test_chi_square_null_distribution():
    gt = paper_shaped_model()
    model = _true_structure(gt)
    ps = []
    for seed in range(100):
        _, m = paper_shaped_fixture(seed)
        ps.append(assess(model, m).p_chi_square)
    assert sps.kstest(ps, "uniform").pvalue > 0.01
