"""Condition comparisons: Friedman (Kendall's W / F form), Wilcoxon post-hoc, BH-FDR, CLES."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .dataset import TrialRecord
from .errors import DataValidationError, NumericError

EXACT_MAX_N = 25


def stars(p: float) -> str:
    if p is None or not np.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class ConditionMeans:
    factor: str
    rows: tuple[str, ...]
    conditions: tuple[str, ...]
    values: np.ndarray = field(repr=False)


def participant_condition_means(records: Sequence[TrialRecord], factor: str,
                                condition_order: Sequence[str] | None = None,
                                raw: bool = False) -> ConditionMeans:
    """n x k table of one factor, rows = participants (sorted id), columns = conditions.

    Each cell averages that participant's trials in the condition. With
    ``raw=True`` rows are (participant, trial index) pairs instead and no
    averaging happens; every participant then needs the same trial indices
    in every condition.
    """
    if condition_order is None:
        condition_order = list(dict.fromkeys(r.condition for r in records))
    conditions = tuple(condition_order)
    cells: dict[tuple, list[float]] = {}
    for r in records:
        if r.condition not in conditions:
            continue
        key = (r.participant_id, r.trial_index) if raw else (r.participant_id,)
        cells.setdefault(key + (r.condition,), []).append(float(r.get(factor)))
    units = sorted({k[:-1] for k in cells})
    values = np.empty((len(units), len(conditions)))
    for a, unit in enumerate(units):
        for b, cond in enumerate(conditions):
            vals = cells.get(unit + (cond,))
            if not vals:
                who = unit[0] if not raw else f"{unit[0]} trial {unit[1]}"
                raise DataValidationError(f"participant {who} has no {factor} data for condition {cond!r}")
            values[a, b] = sum(vals) / len(vals)
    labels = tuple(u[0] if not raw else f"{u[0]}#{u[1]}" for u in units)
    return ConditionMeans(factor, labels, conditions, values)


# --------------------------------------------------------------------------- Friedman

@dataclass(frozen=True)
class FriedmanResult:
    w: float
    f: float
    ddof1: float
    ddof2: float
    p_value: float
    n: int
    k: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def friedman_f(w: float, n: int, k: int) -> FriedmanResult:
    """F approximation from Kendall's W: F = W(n-1)/(1-W) on ((k-1)-2/n, (n-1)ddof1) dof."""
    ddof1 = (k - 1) - 2.0 / n
    ddof2 = (n - 1) * ddof1
    if w >= 1.0:
        return FriedmanResult(1.0, math.inf, ddof1, ddof2, 0.0, n, k, degenerate=True)
    f = w * (n - 1) / (1.0 - w)
    return FriedmanResult(w, f, ddof1, ddof2, float(sps.f.sf(f, ddof1, ddof2)), n, k)


def friedman(matrix) -> FriedmanResult:
    """Friedman test on an n (blocks) x k (conditions) matrix, tie-corrected."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise DataValidationError("friedman needs a 2-d matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise DataValidationError(f"friedman needs n >= 2 and k >= 2, got {n}x{k}")
    ranks = np.apply_along_axis(sps.rankdata, 1, x)
    ties = 0.0
    for row in x:
        _, counts = np.unique(row, return_counts=True)
        ties += float((counts ** 3 - counts).sum())
    ss = float((ranks.sum(axis=0) ** 2).sum())
    denom = n ** 2 * k * (k ** 2 - 1) - n * ties
    if denom <= 0:
        raise NumericError("every block is fully tied; Kendall's W undefined")
    w = (12.0 * ss - 3.0 * n ** 2 * k * (k + 1) ** 2) / denom
    w = min(max(w, 0.0), 1.0)
    if abs(w - 1.0) < 1e-12:
        w = 1.0
    return friedman_f(w, n, k)


# --------------------------------------------------------------------------- Wilcoxon

@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    p_value: float
    n_effective: int
    exact: bool


def _exact_lower_tail(doubled_ranks: np.ndarray, stat2: int) -> float:
    """P(W+ <= stat) under the sign-flip null, ranks given doubled (integers)."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks.astype(int):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r > 0 else counts
        counts = counts + shifted
    return float(counts[: stat2 + 1].sum() / counts.sum())


def wilcoxon_signed_rank(a, b, method: str = "auto") -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test, zero differences dropped.

    ``method="auto"`` is exact (conditional on tied ranks) for an effective
    n <= 25 and otherwise the normal approximation with tie-corrected
    variance and no continuity correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise DataValidationError("wilcoxon needs two paired 1-d samples of equal length")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise NumericError("all paired differences are zero")
    ranks = sps.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if exact:
        doubled = np.rint(2 * ranks).astype(int)
        p = 2.0 * _exact_lower_tail(doubled, int(round(2 * w)))
    else:
        _, counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float((counts ** 3 - counts).sum()) / 48.0
        if var <= 0:
            raise NumericError("zero variance in Wilcoxon normal approximation")
        z = (w - n * (n + 1) / 4.0) / math.sqrt(var)
        p = 2.0 * float(sps.norm.sf(abs(z)))
    return WilcoxonResult(w, min(1.0, p), n, exact)


def bh_fdr(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1)):
        raise DataValidationError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="mergesort")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    # p * m / j can round one ulp below p; adjusted values never undercut the raw ones
    out[order] = np.minimum(np.maximum(adjusted, p[order]), 1.0)
    return out


def cles(a, b) -> float:
    """P(x > y) + P(x = y)/2 over all cross pairs x from a, y from b."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise DataValidationError("cles needs two nonempty samples")
    diff = a[:, None] - b[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


# --------------------------------------------------------------------------- pipeline

@dataclass(frozen=True)
class PairwiseResult:
    condition_a: str
    condition_b: str
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    w_statistic: float
    p_raw: float
    p_adjusted: float
    cles: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ComparisonResult:
    factor: str
    conditions: tuple[str, ...]
    n: int
    friedman: FriedmanResult
    pairs: tuple[PairwiseResult, ...]
    normality: tuple[tuple[str, float, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "factor": self.factor,
            "conditions": list(self.conditions),
            "n": self.n,
            "friedman": self.friedman.to_dict(),
            "pairs": [p.to_dict() for p in self.pairs],
            "normality": [{"condition": c, "w": w, "p_value": pv} for c, w, pv in self.normality],
        }


def normality_advisory(table: ConditionMeans) -> tuple[tuple[str, float, float], ...]:
    """Shapiro-Wilk per condition column; informational only."""
    out = []
    if table.values.shape[0] < 3:
        return ()
    for j, cond in enumerate(table.conditions):
        col = table.values[:, j]
        if np.ptp(col) == 0:
            out.append((cond, math.nan, math.nan))
            continue
        w, pv = sps.shapiro(col)
        out.append((cond, float(w), float(pv)))
    return tuple(out)


def _pairs(table: ConditionMeans, adjust: bool = True) -> list[PairwiseResult]:
    x = table.values
    raw = []
    for ia, ib in itertools.combinations(range(len(table.conditions)), 2):
        a, b = x[:, ia], x[:, ib]
        try:
            wres = wilcoxon_signed_rank(a, b)
            w_stat, p = wres.w_statistic, wres.p_value
        except NumericError:
            w_stat, p = 0.0, 1.0
        raw.append((ia, ib, w_stat, p))
    adjusted = bh_fdr([r[3] for r in raw]) if adjust else [r[3] for r in raw]
    out = []
    for (ia, ib, w_stat, p), p_adj in zip(raw, adjusted):
        a, b = x[:, ia], x[:, ib]
        out.append(PairwiseResult(
            table.conditions[ia], table.conditions[ib],
            float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0,
            float(b.mean()), float(b.std(ddof=1)) if b.size > 1 else 0.0,
            w_stat, p, float(p_adj), cles(a, b)))
    return out


def compare_conditions(records: Sequence[TrialRecord], factor: str,
                       condition_order: Sequence[str] | None = None,
                       raw: bool = False) -> ComparisonResult:
    """Friedman plus all pairwise Wilcoxon tests, BH-adjusted within this factor."""
    table = participant_condition_means(records, factor, condition_order, raw)
    fr = friedman(table.values)
    return ComparisonResult(factor, table.conditions, table.values.shape[0], fr,
                            tuple(_pairs(table)), normality_advisory(table))


def compare_all(records: Sequence[TrialRecord], factors: Sequence[str],
                condition_order: Sequence[str] | None = None, raw: bool = False,
                family: str = "factor") -> list[ComparisonResult]:
    """:func:`compare_conditions` for every factor.

    ``family="global"`` applies one BH correction across all pairs of all
    factors instead of one per factor.
    """
    if family not in ("factor", "global"):
        raise ValueError(f"unknown correction family {family!r}")
    results = [compare_conditions(records, f, condition_order, raw) for f in factors]
    if family == "factor":
        return results
    flat = [p.p_raw for r in results for p in r.pairs]
    adjusted = iter(bh_fdr(flat))
    out = []
    for r in results:
        pairs = tuple(PairwiseResult(**{**p.to_dict(), "p_adjusted": float(next(adjusted))})
                      for p in r.pairs)
        out.append(ComparisonResult(r.factor, r.conditions, r.n, r.friedman, pairs, r.normality))
    return out
