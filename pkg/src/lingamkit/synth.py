"""Synthetic data from a known linear non-Gaussian acyclic model.

RNG contract
------------
Every draw goes through :class:`numpy.random.Generator` on a ``PCG64`` bit
generator seeded from ``numpy.random.SeedSequence(seed, spawn_key=(k,))``,
where ``k`` is the variable's position in causal order. Each variable
therefore owns an independent stream of ``n`` error draws, and the result
does not depend on the order in which variables are generated. Row
``i`` of variable ``k`` is always the ``i``-th draw of stream ``k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import DataMatrix, TrialRecord
from .errors import DataValidationError

ERROR_KINDS = ("uniform", "laplace", "mixture")

# bimodal mixture: 0.5 N(-d, t^2) + 0.5 N(d, t^2) with d^2 + t^2 = 1
_MIX_D = 0.9
_MIX_T = math.sqrt(1 - _MIX_D ** 2)


@dataclass(frozen=True)
class ErrorSpec:
    kind: str = "uniform"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "gaussian" or self.kind == "normal":
            raise DataValidationError("Gaussian errors make the model unidentifiable")
        if self.kind not in ERROR_KINDS:
            raise DataValidationError(f"unknown error distribution {self.kind!r}")
        if not self.scale > 0:
            raise DataValidationError(f"error scale must be > 0, got {self.scale}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws with mean 0 and standard deviation ``scale``."""
        s = self.scale
        if self.kind == "uniform":
            h = math.sqrt(3.0) * s
            return rng.uniform(-h, h, size=n)
        if self.kind == "laplace":
            return rng.laplace(0.0, s / math.sqrt(2.0), size=n)
        signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return s * (signs * _MIX_D + _MIX_T * rng.standard_normal(n))


@dataclass(frozen=True)
class GroundTruthModel:
    """Variables listed in causal order; ``adjacency[i, j]`` is the effect of j on i."""

    variable_names: tuple[str, ...]
    adjacency: np.ndarray
    errors: tuple[ErrorSpec, ...]

    def __post_init__(self):
        names = tuple(self.variable_names)
        a = np.array(self.adjacency, dtype=float)
        p = len(names)
        if a.shape != (p, p):
            raise DataValidationError(f"adjacency shape {a.shape} != ({p}, {p})")
        if np.any(np.triu(a) != 0):
            raise DataValidationError("adjacency must be strictly lower triangular in causal order")
        errs = (self.errors,) if isinstance(self.errors, ErrorSpec) else tuple(self.errors)
        if len(errs) == 1 and p > 1:
            errs = errs * p
        if len(errs) != p:
            raise DataValidationError(f"{len(errs)} error specs for {p} variables")
        a.setflags(write=False)
        object.__setattr__(self, "variable_names", names)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "errors", errs)

    @property
    def p(self) -> int:
        return len(self.variable_names)

    def error_variances(self) -> np.ndarray:
        return np.array([e.scale ** 2 for e in self.errors])

    def covariance(self) -> np.ndarray:
        """Population covariance (I - A)^-1 Psi (I - A)^-T."""
        inv = np.linalg.inv(np.eye(self.p) - self.adjacency)
        return inv @ np.diag(self.error_variances()) @ inv.T

    def standardized_adjacency(self) -> np.ndarray:
        """Direct effects rescaled to unit-variance variables."""
        sd = np.sqrt(np.diag(self.covariance()))
        return self.adjacency * sd[None, :] / sd[:, None]

    def edges(self) -> list[tuple[int, int]]:
        """(cause, effect) index pairs of nonzero direct effects."""
        eff, cause = np.nonzero(self.adjacency)
        return sorted(zip(cause.tolist(), eff.tolist()))

    def to_dict(self) -> dict:
        return {
            "variable_names": list(self.variable_names),
            "adjacency": self.adjacency.tolist(),
            "errors": [{"kind": e.kind, "scale": e.scale} for e in self.errors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthModel":
        return cls(tuple(d["variable_names"]), np.array(d["adjacency"], dtype=float),
                   tuple(ErrorSpec(**e) for e in d["errors"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "GroundTruthModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def error_streams(model: GroundTruthModel, n: int, seed: int) -> np.ndarray:
    """The n x p error draws used by :func:`generate` for this seed."""
    cols = []
    for k, spec in enumerate(model.errors):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
        cols.append(spec.sample(rng, n))
    return np.column_stack(cols) if cols else np.empty((n, 0))


def generate(model: GroundTruthModel, n: int, seed: int) -> DataMatrix:
    if n < 1:
        raise DataValidationError(f"sample count must be >= 1, got {n}")
    e = error_streams(model, n, seed)
    x = np.zeros_like(e)
    a = model.adjacency
    for k in range(model.p):
        x[:, k] = x[:, :k] @ a[k, :k] + e[:, k]
    return DataMatrix(model.variable_names, x)


PAPER_VARIABLES = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "CIT", "CT", "ACT")
PAPER_EXOGENOUS = ("Q1",)
PAPER_SINKS = ("CIT", "CT", "ACT")

# (cause, effect, weight); 14 edges, every |weight| >= 0.3, no edge out of a sink
_PAPER_EDGES = (
    ("Q1", "Q2", 0.7),
    ("Q2", "Q3", -0.5),
    ("Q2", "Q4", 0.6),
    ("Q3", "Q4", -0.4),
    ("Q3", "Q5", -0.3),
    ("Q4", "Q5", 0.5),
    ("Q3", "Q6", 0.4),
    ("Q5", "Q6", -0.5),
    ("Q4", "CIT", -0.3),
    ("Q6", "CIT", 0.5),
    ("Q1", "CT", 0.3),
    ("Q6", "CT", 0.4),
    ("Q4", "ACT", 0.3),
    ("Q5", "ACT", -0.4),
)


def paper_shaped_model(error: str = "uniform") -> GroundTruthModel:
    """Nine-variable model laid out like the pedestrian study (Q1 source, durations sinks)."""
    idx = {v: i for i, v in enumerate(PAPER_VARIABLES)}
    a = np.zeros((9, 9))
    for cause, effect, w in _PAPER_EDGES:
        a[idx[effect], idx[cause]] = w
    return GroundTruthModel(PAPER_VARIABLES, a, (ErrorSpec(error, 1.0),) * 9)


def paper_shaped_fixture(seed: int, n: int = 504, error: str = "uniform"):
    model = paper_shaped_model(error)
    return model, generate(model, n, seed)


def chain_model(weight: float = 0.8, error: str = "uniform",
                names: Sequence[str] = ("x1", "x2")) -> GroundTruthModel:
    """Two-variable chain x1 -> x2."""
    return GroundTruthModel(tuple(names), np.array([[0.0, 0.0], [weight, 0.0]]),
                            (ErrorSpec(error, 1.0),) * 2)


def random_dag_model(p: int, rng: np.random.Generator, density: float = 0.5,
                     low: float = 0.3, high: float = 0.9, error: str = "uniform") -> GroundTruthModel:
    """Random strictly lower-triangular model with |weights| in [low, high]."""
    a = np.zeros((p, p))
    for i in range(p):
        for j in range(i):
            if rng.random() < density:
                a[i, j] = rng.choice([-1.0, 1.0]) * rng.uniform(low, high)
    return GroundTruthModel(tuple(f"x{k + 1}" for k in range(p)), a, (ErrorSpec(error, 1.0),) * p)


# --------------------------------------------------------------------------- trial tables

def fixture_trials(seed: int, n_participants: int = 42,
                   conditions: Sequence[str] = ("non", "early", "sync", "late"),
                   trials_per_condition: int = 3,
                   condition_shift: dict[str, dict[str, float]] | None = None,
                   error: str = "uniform") -> list[TrialRecord]:
    """Trial records whose measures come from :func:`paper_shaped_model`.

    Continuous values are mapped onto the record's units: Likert items via
    ``round(3 + z)`` clipped to 1..5, durations via ``base + 0.5 * z``
    seconds. ``condition_shift[condition][measure]`` adds a shift (in latent
    standard deviations) before the mapping.
    """
    model = paper_shaped_model(error)
    conditions = tuple(conditions)
    n = n_participants * len(conditions) * trials_per_condition
    data = generate(model, n, seed)
    sd = np.sqrt(np.diag(model.covariance()))
    z = data.values / sd
    shift = condition_shift or {}
    base = {"CIT": 3.0, "CT": 4.0, "ACT": 2.5}
    records = []
    row = 0
    for pid in range(1, n_participants + 1):
        for cond in conditions:
            for t in range(1, trials_per_condition + 1):
                kw = {}
                for j, name in enumerate(PAPER_VARIABLES):
                    v = z[row, j] + shift.get(cond, {}).get(name, 0.0)
                    if name in base:
                        kw[name.lower()] = float(max(base[name] + 0.5 * v, 0.05))
                    else:
                        kw[name.lower()] = int(min(5, max(1, round(3 + v))))
                records.append(TrialRecord(f"P{pid:02d}", cond, t, **kw))
                row += 1
    return records
