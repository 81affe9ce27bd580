"""Trial ingestion, numeric matrices, and the descriptive/correlation/VIF tables.

One CSV row is one trial: six 5-point Likert answers plus three walking
durations (seconds) for a participant under one eHMI condition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DataValidationError, NumericError

LIKERT_FIELDS = ("q1", "q2", "q3", "q4", "q5", "q6")
DURATION_FIELDS = ("cit", "ct", "act")
MEASURE_FIELDS = LIKERT_FIELDS + DURATION_FIELDS

DEFAULT_SCHEMA = {
    "participant_id": "participant",
    "condition": "condition",
    "trial_index": "trial",
    **{f: f.upper() for f in MEASURE_FIELDS},
}


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    condition: str
    trial_index: int
    q1: int
    q2: int
    q3: int
    q4: int
    q5: int
    q6: int
    cit: float
    ct: float
    act: float

    def __post_init__(self):
        if self.trial_index < 1:
            raise DataValidationError(f"trial_index must be positive, got {self.trial_index}")
        for name in LIKERT_FIELDS:
            v = getattr(self, name)
            if v not in (1, 2, 3, 4, 5):
                raise DataValidationError(f"{name}={v} outside Likert range 1..5")
        for name in DURATION_FIELDS:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DataValidationError(f"{name}={v} must be finite and > 0")

    def get(self, label: str):
        """Measure value by label, case-insensitive (``"Q1"`` and ``"q1"`` both work)."""
        key = label.lower()
        if key not in MEASURE_FIELDS:
            raise DataValidationError(f"unknown column {label!r}")
        return getattr(self, key)


@dataclass(frozen=True)
class DataMatrix:
    """Column-labelled N x p matrix of finite floats."""

    column_names: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        names = tuple(self.column_names)
        object.__setattr__(self, "column_names", names)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            vals = vals.reshape(-1, len(names)) if vals.size == 0 else vals
        if vals.ndim != 2 or vals.shape[1] != len(names):
            raise DataValidationError(
                f"values shape {vals.shape} does not match {len(names)} column names")
        if len(set(names)) != len(names):
            raise DataValidationError(f"duplicate column names in {list(names)}")
        if not np.all(np.isfinite(vals)):
            raise DataValidationError("matrix contains missing or non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select(self, names: Sequence[str]) -> "DataMatrix":
        missing = [c for c in names if c not in self.column_names]
        if missing:
            raise DataValidationError(f"unknown columns {missing}")
        idx = [self.column_names.index(c) for c in names]
        return DataMatrix(tuple(names), self.values[:, idx])

    def take_rows(self, rows: np.ndarray) -> "DataMatrix":
        return DataMatrix(self.column_names, self.values[rows])

    def to_dict(self) -> dict:
        return {"column_names": list(self.column_names), "values": self.values.tolist()}


@dataclass(frozen=True)
class DescriptiveRow:
    n: int
    mean: float
    std: float
    median: float
    iqr: float
    min: float
    max: float
    single_observation: bool = False


# --------------------------------------------------------------------------- ingestion

def _parse_cell(raw: str, row: int, column: str, kind):
    text = raw.strip()
    try:
        if kind is int:
            v = float(text)
            if not v.is_integer():
                raise ValueError
            return int(v)
        return float(text)
    except ValueError:
        raise DataValidationError(
            f"row {row}, column {column!r}: cannot parse {raw!r} as {kind.__name__}") from None


def load_trials(path, schema: Mapping[str, str] | None = None,
                delimiter: str | None = None) -> list[TrialRecord]:
    """Read one-row-per-trial delimited text into validated records.

    ``schema`` maps TrialRecord field names to header labels; missing keys
    fall back to :data:`DEFAULT_SCHEMA`. Row numbers in error messages count
    data rows from 1 (the header is not counted). The delimiter is sniffed
    from the header unless given.
    """
    path = Path(path)
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)
    with path.open(newline="", encoding="utf-8") as fh:
        text = fh.read()
    if delimiter is None:
        header_line = text.splitlines()[0] if text else ""
        delimiter = max(",;\t|", key=header_line.count)
    reader = csv.DictReader(text.splitlines(), delimiter=delimiter)
    header = reader.fieldnames or []
    missing = [col for col in mapping.values() if col not in header]
    if missing:
        raise DataValidationError(f"{path}: missing column(s) {missing}")

    records = []
    seen = {}
    for row_no, row in enumerate(reader, start=1):
        kw = {
            "participant_id": row[mapping["participant_id"]].strip(),
            "condition": row[mapping["condition"]].strip(),
            "trial_index": _parse_cell(row[mapping["trial_index"]], row_no, mapping["trial_index"], int),
        }
        for f in LIKERT_FIELDS:
            kw[f] = _parse_cell(row[mapping[f]], row_no, mapping[f], int)
        for f in DURATION_FIELDS:
            kw[f] = _parse_cell(row[mapping[f]], row_no, mapping[f], float)
        try:
            rec = TrialRecord(**kw)
        except DataValidationError as exc:
            raise DataValidationError(f"{path}: row {row_no}: {exc}") from None
        key = (rec.participant_id, rec.condition, rec.trial_index)
        if key in seen:
            raise DataValidationError(
                f"{path}: row {row_no}: duplicate (participant, condition, trial) {key}, "
                f"first seen on row {seen[key]}")
        seen[key] = row_no
        records.append(rec)
    return records


def write_trials(records: Sequence[TrialRecord], path, schema: Mapping[str, str] | None = None):
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)
    fields = ["participant_id", "condition", "trial_index", *MEASURE_FIELDS]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([mapping[f] for f in fields])
        for r in records:
            w.writerow([repr(getattr(r, f)) if isinstance(getattr(r, f), float) else getattr(r, f)
                        for f in fields])


def to_matrix(records: Sequence[TrialRecord], columns: Sequence[str],
              aggregate: bool = False) -> DataMatrix:
    """Project records onto ``columns`` (record order kept).

    With ``aggregate=True`` each (participant, condition) cell is first
    averaged over its trials; groups appear in first-seen order.
    """
    columns = tuple(columns)
    if len(set(columns)) != len(columns):
        raise DataValidationError(f"duplicate column in request {list(columns)}")
    for c in columns:
        if c.lower() not in MEASURE_FIELDS:
            raise DataValidationError(f"unknown column {c!r}")
    rows = [[r.get(c) for c in columns] for r in records]
    values = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    if aggregate and len(records):
        groups: dict[tuple, list[int]] = {}
        for i, r in enumerate(records):
            groups.setdefault((r.participant_id, r.condition), []).append(i)
        values = np.array([values[idx].mean(axis=0) for idx in groups.values()])
    return DataMatrix(columns, values)


# --------------------------------------------------------------------------- statistics

def standardize(m: DataMatrix) -> DataMatrix:
    """z-score every column with the sample (N-1) standard deviation."""
    if m.n < 2:
        raise DataValidationError("standardize needs at least 2 observations")
    x = m.values
    mu = x.mean(axis=0)
    centered = x - mu
    # re-centre to wash out the rounding left by the first mean subtraction
    centered = centered - centered.mean(axis=0)
    sd = centered.std(axis=0, ddof=1)
    zero = [name for name, s in zip(m.column_names, sd) if not s > 0]
    if zero:
        raise NumericError(f"zero-variance column(s) {zero}")
    return DataMatrix(m.column_names, centered / sd)


def describe(m: DataMatrix) -> dict[str, DescriptiveRow]:
    if m.n == 0:
        raise DataValidationError("describe on an empty matrix")
    out = {}
    for j, name in enumerate(m.column_names):
        col = m.values[:, j]
        q1, med, q3 = np.percentile(col, [25, 50, 75], method="linear")
        single = m.n == 1
        out[name] = DescriptiveRow(
            n=m.n,
            mean=float(col.mean()),
            std=0.0 if single else float(col.std(ddof=1)),
            median=float(med),
            iqr=float(q3 - q1),
            min=float(col.min()),
            max=float(col.max()),
            single_observation=single,
        )
    return out


@dataclass(frozen=True)
class CorrelationResult:
    column_names: tuple[str, ...]
    rho: np.ndarray
    p_value: np.ndarray
    n: int
    undefined_pairs: tuple[tuple[str, str], ...] = ()


def spearman_matrix(m: DataMatrix) -> CorrelationResult:
    """Spearman rho (Pearson on average ranks) with t-approximation p-values.

    Pairs involving a constant column get NaN and are listed in
    ``undefined_pairs``.
    """
    n, p = m.n, m.p
    if n < 3:
        raise DataValidationError("spearman_matrix needs N >= 3")
    ranks = np.column_stack([sps.rankdata(m.values[:, j], method="average") for j in range(p)])
    centered = ranks - ranks.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    rho = np.full((p, p), np.nan)
    undefined = []
    for i in range(p):
        for j in range(i, p):
            if norms[i] == 0 or norms[j] == 0:
                if i != j:
                    undefined.append((m.column_names[i], m.column_names[j]))
                continue
            r = float(centered[:, i] @ centered[:, j] / (norms[i] * norms[j]))
            r = min(1.0, max(-1.0, r))
            rho[i, j] = rho[j, i] = r
    np.fill_diagonal(rho, 1.0)
    dof = n - 2
    pv = np.full((p, p), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = rho * np.sqrt(dof / (1.0 - rho ** 2))
    finite = np.isfinite(rho)
    pv[finite] = 2.0 * sps.t.sf(np.abs(t[finite]), dof)
    pv[finite & (np.abs(rho) == 1.0)] = 0.0
    return CorrelationResult(m.column_names, rho, pv, n, tuple(undefined))


def vif(m: DataMatrix) -> dict[str, float]:
    """Variance inflation factor of each column against all others (with intercept).

    Exact collinearity yields ``inf`` rather than an exception.
    """
    n, p = m.n, m.p
    if n <= p:
        raise DataValidationError(f"vif needs N > p (N={n}, p={p})")
    out = {}
    x = m.values
    for j, name in enumerate(m.column_names):
        y = x[:, j]
        design = np.column_stack([np.ones(n), np.delete(x, j, axis=1)])
        tss = float(((y - y.mean()) ** 2).sum())
        if tss == 0:
            out[name] = math.inf
            continue
        beta = np.linalg.lstsq(design, y, rcond=None)[0]
        rss = float(((y - design @ beta) ** 2).sum())
        one_minus_r2 = rss / tss
        if one_minus_r2 < 1e-12:
            out[name] = math.inf
        else:
            out[name] = 1.0 / one_minus_r2
    return out
