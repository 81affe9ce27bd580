"""Aligned-text, JSON and delimited renderings of every result table."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Sequence

import numpy as np

from .bootstrap import BootstrapSummary
from .dataset import CorrelationResult, DescriptiveRow
from .lingam import CausalModel, NormalityResult
from .sem import ACCEPTABLE, FitIndices
from .stats import ComparisonResult, FriedmanResult, stars


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def table(headers: Sequence[str], rows: Sequence[Sequence], align: str | None = None) -> str:
    """Plain aligned table; first column left-aligned, the rest right-aligned."""
    cells = [[str(h) for h in headers]] + [["" if c is None else str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    align = align or "l" + "r" * (len(headers) - 1)
    out = []
    for k, r in enumerate(cells):
        parts = [c.ljust(w) if a == "l" else c.rjust(w) for c, w, a in zip(r, widths, align)]
        out.append("  ".join(parts).rstrip())
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def delimited(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow(["" if c is None else c for c in r])
    return buf.getvalue()


def _f(v, nd=3) -> str:
    if v is None:
        return "-"
    v = float(v)
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.{nd}f}"


def _p(v) -> str:
    if v is None or not np.isfinite(v):
        return "-"
    if v < 0.001:
        return "<.001"
    return f"{v:.3f}".lstrip("0") if v < 1 else "1.000"


# --------------------------------------------------------------------------- describe

def describe_payload(desc: dict[str, DescriptiveRow], corr: CorrelationResult,
                     vif: dict[str, float]) -> dict:
    names = list(desc)
    return {
        "descriptive": {k: vars(v) for k, v in desc.items()},
        "spearman": {
            "column_names": names,
            "rho": corr.rho,
            "p_value": corr.p_value,
            "n": corr.n,
            "undefined_pairs": [list(p) for p in corr.undefined_pairs],
        },
        "vif": vif,
    }


def describe_rows(payload: dict) -> tuple[list[str], list[list]]:
    names = payload["spearman"]["column_names"]
    rho = np.asarray(payload["spearman"]["rho"], dtype=float)
    pv = np.asarray(payload["spearman"]["p_value"], dtype=float)
    headers = ["Factor", "N", "Mean", "Std", "Median", "IQR", "Min", "Max", *names, "VIF"]
    rows = []
    for i, name in enumerate(names):
        d = payload["descriptive"][name]
        corr_cells = []
        for j in range(len(names)):
            if j > i:
                corr_cells.append("")
            elif j == i:
                corr_cells.append("1")
            else:
                corr_cells.append(_f(rho[i, j], 2) + stars(pv[i, j]))
        rows.append([name, d["n"], _f(d["mean"], 2), _f(d["std"], 2), _f(d["median"], 2),
                     _f(d["iqr"], 2), _f(d["min"], 2), _f(d["max"], 2), *corr_cells,
                     _f(payload["vif"][name], 2)])
    return headers, rows


def describe_text(payload: dict) -> str:
    headers, rows = describe_rows(payload)
    return ("Descriptive statistics, Spearman correlations (lower triangle) and VIF\n"
            + table(headers, rows)
            + "*: p<.05, **: p<.01, ***: p<.001. VIF threshold commonly 4 (or 10).\n")


def describe_csv(payload: dict) -> str:
    names = payload["spearman"]["column_names"]
    rho = np.asarray(payload["spearman"]["rho"], dtype=float)
    pv = np.asarray(payload["spearman"]["p_value"], dtype=float)
    headers = ["factor", "n", "mean", "std", "median", "iqr", "min", "max",
               *[f"rho_{c}" for c in names], *[f"p_{c}" for c in names], "vif"]
    rows = []
    for i, name in enumerate(names):
        d = payload["descriptive"][name]
        rows.append([name, d["n"], d["mean"], d["std"], d["median"], d["iqr"], d["min"], d["max"],
                     *rho[i].tolist(), *pv[i].tolist(), payload["vif"][name]])
    return delimited(headers, rows)


# --------------------------------------------------------------------------- discover

def model_text(model: CausalModel, audit: Sequence[NormalityResult] = ()) -> str:
    lines = ["Causal order: " + " -> ".join(model.ordered_names), ""]
    rows = [[c, e, _f(w, 3)] for c, e, w in model.edges()]
    lines.append(table(["Cause", "Effect", "Direct effect"], rows))
    if audit:
        rows = [[a.variable, _f(a.w, 4), _p(a.p_value), stars(a.p_value)] for a in audit]
        lines.append("Shapiro-Wilk on structural residuals")
        lines.append(table(["Variable", "W", "p", ""], rows))
    return "\n".join(lines)


def matrix_csv(names: Sequence[str], mat: np.ndarray, corner: str = "effect\\cause") -> str:
    rows = [[names[i], *np.asarray(mat)[i].tolist()] for i in range(len(names))]
    return delimited([corner, *names], rows)


# --------------------------------------------------------------------------- bootstrap / effects

def edge_rows(s: BootstrapSummary) -> list[list]:
    rows = []
    names = s.variable_names
    for j in range(len(names)):
        for i in range(len(names)):
            if s.edge_probability[i, j] > 0:
                rows.append([names[j], names[i], float(s.median_direct_effect[i, j]),
                             float(s.edge_probability[i, j])])
    return rows


def bootstrap_text(s: BootstrapSummary) -> str:
    thr = "none" if s.threshold is None else f"{s.threshold:.2f}"
    head = (f"Bootstrap: B={s.B}, excluded={s.n_excluded}, master seed={s.master_seed}, "
            f"prune threshold={thr}\n")
    rows = [[c, e, _f(w, 3), f"{p * 100:.1f}%"] for c, e, w, p in edge_rows(s)]
    return head + table(["Cause", "Effect", "Median direct effect", "Probability"], rows)


def effects_grid(s: BootstrapSummary) -> dict:
    """Median total effects and probabilities keyed ``cause -> effect``; pruned cells omitted."""
    names = s.variable_names
    grid = {}
    for j, cause in enumerate(names):
        for i, effect in enumerate(names):
            if i == j or s.total_probability[i, j] == 0:
                continue
            grid[f"{cause}->{effect}"] = {
                "cause": cause,
                "effect": effect,
                "median_total_effect": float(s.median_total_effect[i, j]),
                "probability": float(s.total_probability[i, j]),
            }
    return {"variable_names": list(names), "threshold": s.threshold, "B": s.B, "effects": grid}


def effects_text(grid: dict) -> str:
    names = grid["variable_names"]
    cells = grid["effects"]
    rows = []
    for cause in names:
        row = [cause]
        for effect in names:
            c = cells.get(f"{cause}->{effect}")
            row.append("" if c is None else f"{c['median_total_effect']:.2f} ({c['probability'] * 100:.0f}%)")
        rows.append(row)
    return ("Median total effects (probability), rows = cause, columns = effect\n"
            + table(["cause\\effect", *names], rows))


def effects_csv(grid: dict) -> str:
    rows = [[c["cause"], c["effect"], c["median_total_effect"], c["probability"]]
            for c in grid["effects"].values()]
    return delimited(["cause", "effect", "median_total_effect", "probability"], rows)


# --------------------------------------------------------------------------- fit

FIT_COLUMNS = ("chi2 (dof)", "p_chi2", "chi2_baseline (dof)", "CFI", "GFI", "AGFI", "NFI", "TLI", "RMSEA")


def fit_rows(rows: Sequence[tuple[str, FitIndices]]) -> list[list]:
    out = []
    for label, fi in rows:
        out.append([label, f"{fi.chi_square:.3f} ({fi.dof})", _p(fi.p_chi_square),
                    f"{fi.baseline_chi_square:.3f} ({fi.baseline_dof})", _f(fi.cfi), _f(fi.gfi),
                    _f(fi.agfi), _f(fi.nfi), _f(fi.tli), _f(fi.rmsea)])
    return out


def fit_text(rows: Sequence[tuple[str, FitIndices]], audits: Sequence[str] = ()) -> str:
    body = fit_rows(rows)
    body.append(["Acceptable thresholds (Hooper 2008)", "-", ACCEPTABLE["p_chi_square"], "-",
                 ACCEPTABLE["cfi"], ACCEPTABLE["gfi"], ACCEPTABLE["agfi"], ACCEPTABLE["nfi"],
                 ACCEPTABLE["tli"], ACCEPTABLE["rmsea"]])
    text = "Model fit summary\n" + table(["", *FIT_COLUMNS], body)
    if audits:
        text += "\n" + "\n".join(audits) + "\n"
    return text


def fit_csv(rows: Sequence[tuple[str, FitIndices]]) -> str:
    headers = ["model", "chi_square", "dof", "p_chi_square", "baseline_chi_square", "baseline_dof",
               "cfi", "gfi", "agfi", "nfi", "tli", "rmsea", "n"]
    body = [[label, fi.chi_square, fi.dof, fi.p_chi_square, fi.baseline_chi_square, fi.baseline_dof,
             fi.cfi, fi.gfi, fi.agfi, fi.nfi, fi.tli, fi.rmsea, fi.n] for label, fi in rows]
    return delimited(headers, body)


# --------------------------------------------------------------------------- compare

def friedman_row(factor: str, fr: FriedmanResult) -> list:
    return [factor, _f(fr.w), _f(fr.ddof1), _f(fr.ddof2), _f(fr.f), _p(fr.p_value) + " " + stars(fr.p_value)]


def compare_text(results: Sequence[ComparisonResult]) -> str:
    fr_rows = [friedman_row(r.factor, r.friedman) for r in results]
    out = ["Friedman tests", table(["Factor", "W", "ddof1", "ddof2", "F", "p"], fr_rows)]
    rows = []
    for r in results:
        for p in r.pairs:
            rows.append([r.factor, p.condition_a, p.condition_b,
                         f"{p.mean_a:.2f} ({p.std_a:.2f})", f"{p.mean_b:.2f} ({p.std_b:.2f})",
                         _f(p.w_statistic, 1), _p(p.p_raw), _p(p.p_adjusted) + " " + stars(p.p_adjusted),
                         _f(p.cles)])
    out.append("Post-hoc Wilcoxon signed-rank tests, Benjamini/Hochberg adjusted")
    out.append(table(["Factor", "A", "B", "Mean A (SD)", "Mean B (SD)", "W", "p", "p_adj", "CLES"], rows))
    out.append("*: p<.05, **: p<.01, ***: p<.001. CLES: common language effect size.\n")
    return "\n".join(out)


def compare_csv(results: Sequence[ComparisonResult]) -> str:
    headers = ["factor", "condition_a", "condition_b", "mean_a", "std_a", "mean_b", "std_b",
               "w_statistic", "p_raw", "p_adjusted", "cles", "friedman_w", "friedman_f",
               "friedman_ddof1", "friedman_ddof2", "friedman_p"]
    rows = []
    for r in results:
        fr = r.friedman
        for p in r.pairs:
            rows.append([r.factor, p.condition_a, p.condition_b, p.mean_a, p.std_a, p.mean_b, p.std_b,
                         p.w_statistic, p.p_raw, p.p_adjusted, p.cles, fr.w, fr.f, fr.ddof1,
                         fr.ddof2, fr.p_value])
    return delimited(headers, rows)
