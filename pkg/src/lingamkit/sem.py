"""SEM fit indices for a recursive linear causal model.

Chi-square uses the maximum-likelihood discrepancy with an (N - 1)
multiplier. The model's free parameters are its nonzero direct effects plus
one residual variance per variable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from .dataset import DataMatrix, standardize
from .errors import DataValidationError, NumericError
from .lingam import CausalModel

# Hooper et al. (2008) cut-offs, shown under the fit table
ACCEPTABLE = {
    "p_chi_square": "> .050",
    "cfi": "> 0.950",
    "gfi": "> 0.950",
    "agfi": "> 0.950",
    "nfi": "> 0.950",
    "tli": "> 0.950",
    "rmsea": "< 0.070",
}


@dataclass(frozen=True)
class ChiSquare:
    chi_square: float
    dof: int
    p_value: float


@dataclass(frozen=True)
class FitIndices:
    chi_square: float
    dof: int
    p_chi_square: float
    baseline_chi_square: float
    baseline_dof: int
    cfi: float
    nfi: float
    tli: float
    rmsea: float
    n: int
    gfi: float | None = None
    agfi: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def implied_covariance(model: CausalModel) -> np.ndarray:
    """(I - A)^-1 Psi (I - A)^-T."""
    p = model.p
    i_minus_a = np.eye(p) - model.adjacency
    try:
        inv = np.linalg.inv(i_minus_a)
    except np.linalg.LinAlgError:
        raise NumericError("I - A is singular") from None
    sigma = inv @ np.diag(model.residual_variances) @ inv.T
    return (sigma + sigma.T) / 2.0


def sample_covariance(m: DataMatrix, standardized: bool = False) -> np.ndarray:
    data = standardize(m) if standardized else m
    return np.cov(data.values, rowvar=False, ddof=1).reshape(m.p, m.p)


def _logdet_pd(a: np.ndarray, what: str) -> float:
    sign, logdet = np.linalg.slogdet(a)
    if sign <= 0 or np.linalg.eigvalsh(a).min() <= 0:
        raise NumericError(f"{what} is not positive definite")
    return float(logdet)


def ml_discrepancy(sigma: np.ndarray, s: np.ndarray) -> float:
    """F_ML = ln|Sigma| - ln|S| + tr(S Sigma^-1) - p."""
    p = s.shape[0]
    ld_s = _logdet_pd(s, "sample covariance")
    ld_sigma = _logdet_pd(sigma, "implied covariance")
    return ld_sigma - ld_s + float(np.trace(np.linalg.solve(sigma, s))) - p


def free_parameters(model: CausalModel) -> int:
    return model.free_edge_count() + model.p


def model_dof(model: CausalModel) -> int:
    p = model.p
    return p * (p + 1) // 2 - free_parameters(model)


def _aligned(model: CausalModel, m: DataMatrix) -> DataMatrix:
    if m.column_names != model.variable_names:
        m = m.select(model.variable_names)
    if m.n <= m.p:
        raise DataValidationError(f"need N > p (N={m.n}, p={m.p})")
    return m


def chi_square(model: CausalModel, m: DataMatrix) -> ChiSquare:
    m = _aligned(model, m)
    s = sample_covariance(m, model.standardized)
    f = ml_discrepancy(implied_covariance(model), s)
    chi = max((m.n - 1) * f, 0.0)
    dof = model_dof(model)
    pv = float(sps.chi2.sf(chi, dof)) if dof > 0 else math.nan
    return ChiSquare(chi, dof, pv)


def baseline_chi_square(m: DataMatrix, standardized: bool = False,
                        convention: str = "independence", model_dof_value: int | None = None):
    """Independence-model chi-square and its dof.

    ``convention="independence"`` uses dof = p(p-1)/2. ``convention="model"``
    reports the fitted model's dof instead (pass ``model_dof_value``), which
    is how some SEM packages label the baseline and what the 22/22 pairing
    in published tables corresponds to.
    """
    if m.n <= m.p:
        raise DataValidationError(f"need N > p (N={m.n}, p={m.p})")
    s = sample_covariance(m, standardized)
    sigma_b = np.diag(np.diag(s))
    chi_b = max((m.n - 1) * ml_discrepancy(sigma_b, s), 0.0)
    p = m.p
    if convention == "independence":
        dof_b = p * (p - 1) // 2
    elif convention == "model":
        if model_dof_value is None:
            raise ValueError("convention='model' needs model_dof_value")
        dof_b = int(model_dof_value)
    else:
        raise ValueError(f"unknown baseline convention {convention!r}")
    return chi_b, dof_b


def fit_indices(chi: float, dof: int, chi_b: float, dof_b: int, n: int,
                sigma: np.ndarray | None = None, s: np.ndarray | None = None,
                gfi_form: str = "ml") -> FitIndices:
    """CFI, NFI, TLI, RMSEA (and GFI/AGFI) from chi-square summaries.

    CFI and TLI are not capped at 1. GFI needs either ``sigma`` and ``s``
    (``gfi_form="ml"``, the ML trace form) or nothing extra
    (``gfi_form="baseline"``: GFI = 1 - chi/chi_b, AGFI = 1 - dof_b/dof * (1 - GFI)).
    """
    if dof <= 0 or dof_b <= 0:
        raise ValueError("dof and baseline dof must be positive")
    if n <= 1:
        raise ValueError("n must exceed 1")
    if chi_b == 0:
        raise NumericError("baseline chi-square is 0; NFI undefined")
    ratio_b = chi_b / dof_b
    if ratio_b == 1:
        raise NumericError("baseline chi-square/dof equals 1; TLI undefined")
    excess = max(chi - dof, 0.0)
    denom = max(chi_b - dof_b, chi - dof, 0.0)
    cfi = 1.0 - excess / denom if denom > 0 else 1.0
    nfi = (chi_b - chi) / chi_b
    tli = (ratio_b - chi / dof) / (ratio_b - 1.0)
    rmsea = math.sqrt(excess / (dof * (n - 1)))
    gfi = agfi = None
    if gfi_form == "ml" and sigma is not None and s is not None:
        p = s.shape[0]
        prod = np.linalg.solve(sigma, s)
        dev = prod - np.eye(p)
        gfi = 1.0 - float(np.trace(dev @ dev)) / float(np.trace(prod @ prod))
        agfi = 1.0 - (p * (p + 1) / (2.0 * dof)) * (1.0 - gfi)
    elif gfi_form == "baseline":
        gfi = 1.0 - chi / chi_b
        agfi = 1.0 - (dof_b / dof) * (1.0 - gfi)
    pv = float(sps.chi2.sf(chi, dof))
    return FitIndices(chi, int(dof), pv, chi_b, int(dof_b), cfi, nfi, tli, rmsea, int(n), gfi, agfi)


def refit_structure(model: CausalModel, m: DataMatrix) -> CausalModel:
    """Maximum-likelihood re-estimate of the model's coefficients on its own support.

    For a recursive model with uncorrelated errors this is per-equation OLS
    of each variable on its parents; residual variances use the N-1 divisor.
    """
    m = _aligned(model, m)
    data = standardize(m) if model.standardized else m
    xc = data.values - data.values.mean(axis=0)
    n, p = xc.shape
    adj = np.zeros((p, p))
    rv = np.zeros(p)
    for i in range(p):
        parents = np.nonzero(model.adjacency[i])[0]
        y = xc[:, i]
        if parents.size:
            beta = np.linalg.lstsq(xc[:, parents], y, rcond=None)[0]
            adj[i, parents] = beta
            r = y - xc[:, parents] @ beta
        else:
            r = y
        rv[i] = float(r @ r) / (n - 1)
    return CausalModel(model.variable_names, model.causal_order, adj, rv, model.standardized, n)


def residual_variances_for(model: CausalModel, m: DataMatrix) -> CausalModel:
    """Same coefficients, residual variances recomputed from the data."""
    m = _aligned(model, m)
    data = standardize(m) if model.standardized else m
    xc = data.values - data.values.mean(axis=0)
    r = xc - xc @ model.adjacency.T
    rv = (r ** 2).sum(axis=0) / (xc.shape[0] - 1)
    return CausalModel(model.variable_names, model.causal_order, model.adjacency, rv,
                       model.standardized, xc.shape[0])


def assess(model: CausalModel, m: DataMatrix, baseline_convention: str = "independence",
           gfi_form: str = "ml", refit: bool = True) -> FitIndices:
    """Fit indices of ``model`` on ``m``; with ``refit`` the coefficients are ML re-estimated first."""
    m = _aligned(model, m)
    fitted = refit_structure(model, m) if refit else model
    chi = chi_square(fitted, m)
    chi_b, dof_b = baseline_chi_square(m, fitted.standardized, baseline_convention, chi.dof)
    s = sample_covariance(m, fitted.standardized)
    return fit_indices(chi.chi_square, chi.dof, chi_b, dof_b, m.n,
                       implied_covariance(fitted), s, gfi_form)
