"""Bootstrap reliability of direct and total causal effects.

Seed splitting
--------------
Run ``r`` of a bootstrap with master seed ``s`` resamples rows with
``numpy.random.Generator(PCG64(run_seed(s, r)))`` where ``run_seed`` takes the
first 64-bit word of ``SeedSequence(s, spawn_key=(r,)).generate_state``.
SeedSequence hashing is stable across numpy releases and platforms, so a run
depends only on ``(s, r)``; worker count and scheduling cannot change it.
"""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import DataMatrix
from .errors import NumericError
from .lingam import DEFAULT_CONSTANTS, CausalModel, EntropyConstants, PriorKnowledge, fit

MAX_EXCLUDED_FRACTION = 0.01


def _topological_order(adj: np.ndarray) -> list[int] | None:
    p = adj.shape[0]
    nz = adj != 0
    indeg = nz.sum(axis=1).tolist()
    order, ready = [], [i for i in range(p) if indeg[i] == 0]
    while ready:
        j = ready.pop(0)
        order.append(j)
        for i in np.nonzero(nz[:, j])[0]:
            indeg[i] -= 1
            if indeg[i] == 0:
                ready.append(int(i))
    return order if len(order) == p else None


def total_effects(model) -> np.ndarray:
    """Total effects T = A + A^2 + ... + A^(p-1), i.e. (I - A)^-1 - I.

    Accepts a :class:`CausalModel` or a bare adjacency matrix. The finite
    power series keeps structural zeros exact where no directed path exists.
    """
    adj = model.adjacency if isinstance(model, CausalModel) else np.asarray(model, dtype=float)
    if _topological_order(adj) is None:
        raise NumericError("adjacency contains a directed cycle")
    p = adj.shape[0]
    total = np.zeros_like(adj)
    power = np.eye(p)
    for _ in range(1, p):
        power = power @ adj
        if not power.any():
            break
        total += power
    return total


def run_seed(master_seed: int, run_index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resample(m: DataMatrix, seed: int) -> DataMatrix:
    """N rows drawn uniformly with replacement."""
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = rng.integers(0, m.n, size=m.n)
    return m.take_rows(rows)


@dataclass
class BootstrapSummary:
    variable_names: tuple[str, ...]
    B: int
    edge_probability: np.ndarray
    median_direct_effect: np.ndarray
    total_probability: np.ndarray
    median_total_effect: np.ndarray
    n_excluded: int = 0
    master_seed: int | None = None
    threshold: float | None = None
    direct_samples: np.ndarray | None = field(default=None, repr=False)
    total_samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_runs(self) -> int:
        return self.B - self.n_excluded

    def percentile_interval(self, effect: str, cause: str, level: float = 0.95,
                            kind: str = "direct") -> tuple[float, float]:
        """Percentile interval over the nonzero samples of one effect."""
        samples = self.direct_samples if kind == "direct" else self.total_samples
        if samples is None:
            raise ValueError("summary was built without retained samples")
        i, j = self.variable_names.index(effect), self.variable_names.index(cause)
        v = samples[:, i, j]
        v = v[v != 0]
        if v.size == 0:
            return (0.0, 0.0)
        lo, hi = np.percentile(v, [50 * (1 - level), 50 * (1 + level)])
        return float(lo), float(hi)

    def to_dict(self) -> dict:
        return {
            "variable_names": list(self.variable_names),
            "B": self.B,
            "n_excluded": self.n_excluded,
            "master_seed": self.master_seed,
            "threshold": self.threshold,
            "edge_probability": self.edge_probability.tolist(),
            "median_direct_effect": self.median_direct_effect.tolist(),
            "total_probability": self.total_probability.tolist(),
            "median_total_effect": self.median_total_effect.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BootstrapSummary":
        arr = lambda k: np.array(d[k], dtype=float)  # noqa: E731
        return cls(tuple(d["variable_names"]), int(d["B"]), arr("edge_probability"),
                   arr("median_direct_effect"), arr("total_probability"),
                   arr("median_total_effect"), int(d.get("n_excluded", 0)),
                   d.get("master_seed"), d.get("threshold"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "BootstrapSummary":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dot(self, threshold: float | None = None, name: str = "bootstrap_model") -> str:
        """Edges with probability >= threshold, labelled ``effect (prob%)``."""
        thr = self.threshold if threshold is None else threshold
        thr = 0.0 if thr is None else thr
        names = self.variable_names
        lines = [f"digraph {name} {{"]
        for v in names:
            lines.append(f'  "{v}";')
        p = len(names)
        for j in range(p):
            for i in range(p):
                prob = self.edge_probability[i, j]
                if prob > 0 and prob >= thr and self.median_direct_effect[i, j] != 0:
                    label = f"{self.median_direct_effect[i, j]:.2f} ({prob * 100:.0f}%)"
                    lines.append(f'  "{names[j]}" -> "{names[i]}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- runs

_WORK: dict = {}


def _init_worker(m, pk, fit_kwargs):
    _WORK["m"], _WORK["pk"], _WORK["kw"] = m, pk, fit_kwargs


def _run(args):
    master_seed, r = args
    sample = resample(_WORK["m"], run_seed(master_seed, r))
    try:
        model = fit(sample, _WORK["pk"], **_WORK["kw"])
    except (NumericError, np.linalg.LinAlgError):
        return r, None, None
    return r, model.adjacency, total_effects(model)


def _median_of_nonzero(samples: np.ndarray, nonzero: np.ndarray) -> np.ndarray:
    masked = np.where(nonzero, samples, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(masked, axis=0)
    return np.nan_to_num(med, nan=0.0)


def default_workers() -> int:
    env = os.environ.get("THREADS")
    if env:
        return max(1, int(env))
    return 1


def bootstrap_fit(m: DataMatrix, pk: PriorKnowledge | None, B: int = 5000, master_seed: int = 0,
                  workers: int | None = None, keep_samples: bool = False,
                  standardize_data: bool = True, constants: EntropyConstants = DEFAULT_CONSTANTS,
                  method: str = "adaptive_lasso", ols_threshold: float = 0.01) -> BootstrapSummary:
    """Refit DirectLiNGAM on B resamples and aggregate direct and total effects.

    Probabilities are fractions of successful runs with a nonzero entry;
    medians are taken over the nonzero values only. In OLS mode an entry
    counts as nonzero only above ``ols_threshold`` (the fit already zeroes
    the rest). Runs that fail to fit are excluded and counted; more than 1%
    exclusions raises :class:`NumericError`.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    workers = default_workers() if workers is None else max(1, int(workers))
    fit_kwargs = dict(standardize_data=standardize_data, constants=constants, method=method,
                      ols_threshold=ols_threshold)
    jobs = [(master_seed, r) for r in range(B)]
    if workers == 1:
        _init_worker(m, pk, fit_kwargs)
        results = [_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(m, pk, fit_kwargs)) as ex:
            results = list(ex.map(_run, jobs, chunksize=max(1, B // (4 * workers))))
    results.sort(key=lambda t: t[0])
    ok = [(a, t) for _, a, t in results if a is not None]
    n_excluded = B - len(ok)
    if n_excluded > MAX_EXCLUDED_FRACTION * B:
        raise NumericError(f"{n_excluded} of {B} bootstrap fits failed (> 1%)")
    direct = np.stack([a for a, _ in ok])
    total = np.stack([t for _, t in ok])
    nz_d = direct != 0
    nz_t = total != 0
    return BootstrapSummary(
        variable_names=m.column_names,
        B=B,
        edge_probability=nz_d.mean(axis=0),
        median_direct_effect=_median_of_nonzero(direct, nz_d),
        total_probability=nz_t.mean(axis=0),
        median_total_effect=_median_of_nonzero(total, nz_t),
        n_excluded=n_excluded,
        master_seed=master_seed,
        direct_samples=direct if keep_samples else None,
        total_samples=total if keep_samples else None,
    )


def prune(s: BootstrapSummary, threshold: float = 0.30) -> BootstrapSummary:
    """Zero probability and median wherever probability < threshold (direct and total)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    keep_d = s.edge_probability >= threshold
    keep_t = s.total_probability >= threshold
    return replace(
        s,
        edge_probability=np.where(keep_d, s.edge_probability, 0.0),
        median_direct_effect=np.where(keep_d, s.median_direct_effect, 0.0),
        total_probability=np.where(keep_t, s.total_probability, 0.0),
        median_total_effect=np.where(keep_t, s.median_total_effect, 0.0),
        threshold=threshold,
    )


def summary_adjacency_model(s: BootstrapSummary, residual_variances: Sequence[float] | None = None,
                            standardized: bool = True, n: int = 0) -> CausalModel:
    """CausalModel whose adjacency is the summary's median direct effects.

    Raises :class:`NumericError` if the medians form a cycle.
    """
    adj = np.array(s.median_direct_effect, dtype=float)
    order = _topological_order(adj)
    if order is None:
        raise NumericError("median direct effects contain a directed cycle")
    p = adj.shape[0]
    rv = np.ones(p) if residual_variances is None else np.asarray(residual_variances, dtype=float)
    return CausalModel(s.variable_names, order, adj, rv, standardized, n)
