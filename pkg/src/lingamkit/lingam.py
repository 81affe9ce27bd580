"""DirectLiNGAM with prior knowledge.

Stage 1 finds a causal order by repeatedly picking the variable whose
pairwise likelihood ratios against every remaining variable most favour it
being a cause, then regressing it out. Stage 2 regresses each variable on
its predecessors in that order (adaptive lasso with BIC, or thresholded OLS).

Matrix convention throughout: ``adjacency[i, j]`` is the direct effect of
variable ``j`` on variable ``i``; ``prior[i, j]`` constrains paths j -> i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .dataset import DataMatrix, standardize
from .errors import ConstraintError, DataValidationError, NumericError

GAUSSIAN_ENTROPY = (1.0 + math.log(2.0 * math.pi)) / 2.0
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EntropyConstants:
    k1: float = 79.047
    k2: float = 7.4129
    gamma: float = 0.37457


DEFAULT_CONSTANTS = EntropyConstants()


# --------------------------------------------------------------------------- prior knowledge

class PriorKnowledge:
    """p x p matrix with entries 0 (no path j -> i), 1 (path j -> i), -1 (unknown).

    Diagonal entries are ignored.
    """

    def __init__(self, matrix, names: Sequence[str] | None = None):
        k = np.array(matrix, dtype=int)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise DataValidationError(f"prior knowledge must be square, got shape {k.shape}")
        if not np.isin(k, (-1, 0, 1)).all():
            raise DataValidationError("prior knowledge entries must be -1, 0 or 1")
        np.fill_diagonal(k, -1)
        self.matrix = k
        self.names = tuple(names) if names is not None else None
        if self.names is not None and len(self.names) != k.shape[0]:
            raise DataValidationError("prior knowledge names do not match its size")
        self.precedence = self._precedence()

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def empty(cls, p: int, names=None) -> "PriorKnowledge":
        return cls(-np.ones((p, p), dtype=int), names)

    @classmethod
    def from_labels(cls, names: Sequence[str], exogenous: Sequence[str] = (),
                    sinks: Sequence[str] = (), sink_to_sink: bool = False) -> "PriorKnowledge":
        """Encode source and sink designations.

        Exogenous variables receive no paths from anything. Sinks send no
        paths to non-sinks, and with ``sink_to_sink=False`` not to other
        sinks either.
        """
        names = list(names)
        unknown = [v for v in (*exogenous, *sinks) if v not in names]
        if unknown:
            raise DataValidationError(f"unknown variable(s) in prior knowledge: {unknown}")
        overlap = set(exogenous) & set(sinks)
        if overlap:
            raise ConstraintError(f"variables both exogenous and sink: {sorted(overlap)}")
        p = len(names)
        k = -np.ones((p, p), dtype=int)
        for v in exogenous:
            k[names.index(v), :] = 0
        for s in sinks:
            j = names.index(s)
            for i, other in enumerate(names):
                if other not in sinks or not sink_to_sink:
                    k[i, j] = 0
        return cls(k, names)

    def _precedence(self) -> np.ndarray:
        """before[a, b] is True when a must come before b in any admissible order."""
        k = self.matrix
        p = self.p
        before = np.zeros((p, p), dtype=bool)
        for i in range(p):
            for j in range(p):
                if i == j:
                    continue
                if k[i, j] == 1:
                    before[j, i] = True
                # a lone "no path j -> i" is honoured by putting i first;
                # mutual exclusions leave the pair unordered
                if k[i, j] == 0 and k[j, i] != 0:
                    before[i, j] = True
        # transitive closure, then reject cycles
        closure = before.copy()
        for m in range(p):
            closure |= closure[:, [m]] & closure[[m], :]
        if np.any(np.diag(closure)):
            bad = np.nonzero(np.diag(closure))[0].tolist()
            raise ConstraintError(f"prior knowledge is contradictory around variables {bad}")
        for i in range(p):
            for j in range(p):
                if k[i, j] == 1 and closure[i, j]:
                    raise ConstraintError(
                        f"variable {j} is both a required and a forbidden ancestor of {i}")
        return before

    def permuted(self, perm: Sequence[int]) -> "PriorKnowledge":
        perm = list(perm)
        names = [self.names[i] for i in perm] if self.names else None
        return PriorKnowledge(self.matrix[np.ix_(perm, perm)], names)

    def forbidden(self, i: int, j: int) -> bool:
        """True when no path j -> i is allowed."""
        return i != j and self.matrix[i, j] == 0

    def to_dict(self) -> dict:
        return {"names": list(self.names) if self.names else None, "matrix": self.matrix.tolist()}


# --------------------------------------------------------------------------- model

@dataclass
class CausalModel:
    variable_names: tuple[str, ...]
    causal_order: list[int]
    adjacency: np.ndarray
    residual_variances: np.ndarray
    standardized: bool = True
    n: int = 0
    residuals: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.variable_names = tuple(self.variable_names)
        self.causal_order = [int(i) for i in self.causal_order]
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        self.residual_variances = np.asarray(self.residual_variances, dtype=float)
        p = len(self.variable_names)
        if sorted(self.causal_order) != list(range(p)):
            raise DataValidationError(f"causal order {self.causal_order} is not a permutation of 0..{p - 1}")
        if self.adjacency.shape != (p, p):
            raise DataValidationError(f"adjacency shape {self.adjacency.shape} != ({p}, {p})")
        if not is_lower_triangular_under(self.adjacency, self.causal_order):
            raise NumericError("adjacency is not strictly lower triangular under the causal order")
        if np.any(self.residual_variances < 0):
            raise NumericError("negative residual variance")

    @property
    def p(self) -> int:
        return len(self.variable_names)

    @property
    def ordered_names(self) -> list[str]:
        return [self.variable_names[i] for i in self.causal_order]

    def edges(self) -> list[tuple[str, str, float]]:
        """(cause, effect, weight) for every nonzero entry, in causal order."""
        out = []
        for i in self.causal_order:
            for j in self.causal_order:
                if self.adjacency[i, j] != 0:
                    out.append((self.variable_names[j], self.variable_names[i], float(self.adjacency[i, j])))
        return out

    def free_edge_count(self) -> int:
        return int(np.count_nonzero(self.adjacency))

    def to_dict(self) -> dict:
        return {
            "variable_names": list(self.variable_names),
            "causal_order": list(self.causal_order),
            "causal_order_names": self.ordered_names,
            "adjacency": self.adjacency.tolist(),
            "residual_variances": self.residual_variances.tolist(),
            "standardized": self.standardized,
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CausalModel":
        return cls(tuple(d["variable_names"]), d["causal_order"], np.array(d["adjacency"], dtype=float),
                   np.array(d["residual_variances"], dtype=float), d.get("standardized", True), d.get("n", 0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CausalModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dot(self, name: str = "causal_model") -> str:
        lines = [f"digraph {name} {{"]
        for v in self.ordered_names:
            lines.append(f'  "{v}";')
        for cause, effect, w in self.edges():
            lines.append(f'  "{cause}" -> "{effect}" [label="{w:.2f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def is_lower_triangular_under(adjacency: np.ndarray, order: Sequence[int]) -> bool:
    a = np.asarray(adjacency)[np.ix_(order, order)]
    return bool(np.all(np.triu(a) == 0))


# --------------------------------------------------------------------------- stage 1

def residual(xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """xi minus its least-squares projection on xj: xi - cov(xi, xj)/var(xj) * xj."""
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != xj.shape or xi.ndim != 1 or xi.size < 2:
        raise DataValidationError("residual needs two 1-d vectors of equal length >= 2")
    dj = xj - xj.mean()
    var = float(dj @ dj)
    if not var > 0:
        raise NumericError("residual: regressor has zero variance")
    slope = float((xi - xi.mean()) @ dj) / var
    return xi - slope * xj


def _unit(u: np.ndarray) -> np.ndarray:
    u = u - u.mean()
    sd = u.std()
    if not sd > 1e-12 * max(1.0, float(np.abs(u).max(initial=0.0))):
        raise NumericError("cannot standardize a (near-)constant vector")
    return u / sd


def entropy_approx(u: np.ndarray, constants: EntropyConstants = DEFAULT_CONSTANTS) -> float:
    """Maximum-entropy approximation of differential entropy for a standardized sample."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DataValidationError("entropy_approx: non-finite input")
    log_cosh = np.logaddexp(u, -u) - math.log(2.0)
    t1 = float(np.mean(log_cosh)) - constants.gamma
    t2 = float(np.mean(u * np.exp(-(u ** 2) / 2.0)))
    return GAUSSIAN_ENTROPY - constants.k1 * t1 ** 2 - constants.k2 * t2 ** 2


def likelihood_ratio(xj: np.ndarray, xi: np.ndarray,
                     constants: EntropyConstants = DEFAULT_CONSTANTS) -> float:
    """Log-likelihood ratio of j -> i against i -> j; positive favours j as the cause.

    Both inputs must be standardized.
    """
    r_i_on_j = _unit(residual(xi, xj))
    r_j_on_i = _unit(residual(xj, xi))
    return (entropy_approx(xi, constants) + entropy_approx(r_j_on_i, constants)
            - entropy_approx(xj, constants) - entropy_approx(r_i_on_j, constants))


def independence_score(xj: np.ndarray, others: Sequence[np.ndarray],
                       constants: EntropyConstants = DEFAULT_CONSTANTS) -> float:
    """Sum over the other variables of min(0, LR(j -> i))^2; lower means more exogenous."""
    if len(others) < 1:
        raise DataValidationError("independence_score needs at least two variables")
    xj = _unit(np.asarray(xj, dtype=float))
    total = 0.0
    for xi in others:
        d = likelihood_ratio(xj, _unit(np.asarray(xi, dtype=float)), constants)
        total += min(0.0, d) ** 2
    return total


def _scores(x: np.ndarray, remaining: list[int], candidates: list[int],
            constants: EntropyConstants) -> dict[int, float]:
    """Independence scores for ``candidates`` among the ``remaining`` columns of x."""
    z = {i: _unit(x[:, i]) for i in remaining}
    h = {i: entropy_approx(z[i], constants) for i in remaining}
    h_res: dict[tuple[int, int], float] = {}

    def h_r(a, b):  # entropy of standardized residual of a regressed on b
        key = (a, b)
        if key not in h_res:
            h_res[key] = entropy_approx(_unit(residual(z[a], z[b])), constants)
        return h_res[key]

    out = {}
    for j in candidates:
        total = 0.0
        for i in remaining:
            if i == j:
                continue
            d = h[i] + h_r(j, i) - h[j] - h_r(i, j)
            total += min(0.0, d) ** 2
        out[j] = total
    return out


def _admissible(remaining: list[int], pk: PriorKnowledge) -> list[int]:
    before = pk.precedence
    return [j for j in remaining if not any(before[i, j] for i in remaining if i != j)]


def _canonical(names: Sequence[str]) -> list[int]:
    return sorted(range(len(names)), key=lambda i: names[i])


def search_causal_order(m: DataMatrix, pk: PriorKnowledge | None = None,
                        constants: EntropyConstants = DEFAULT_CONSTANTS) -> list[int]:
    """Stage 1: causal order as column indices of ``m``.

    Ties within 1e-12 go to the candidate whose label sorts first, and all
    internal sums run in sorted-label order, so relabelling or reordering
    columns permutes the result exactly.
    """
    n, p = m.n, m.p
    if p < 2:
        raise DataValidationError("search_causal_order needs at least 2 variables")
    if n <= p:
        raise DataValidationError(f"search_causal_order needs N > p (N={n}, p={p})")
    pk = pk if pk is not None else PriorKnowledge.empty(p)
    if pk.p != p:
        raise DataValidationError(f"prior knowledge size {pk.p} != {p} variables")

    x = np.array(m.values, dtype=float)
    remaining = _canonical(m.column_names)
    order: list[int] = []
    while remaining:
        candidates = _admissible(remaining, pk)
        if not candidates:
            raise ConstraintError("no admissible variable left; constraints unsatisfiable")
        if len(candidates) == 1:
            chosen = candidates[0]
        else:
            scores = _scores(x, remaining, candidates, constants)
            best = min(scores.values())
            chosen = next(j for j in candidates if scores[j] <= best + TIE_TOLERANCE)
        for i in remaining:
            if i != chosen:
                x[:, i] = residual(x[:, i], x[:, chosen])
        order.append(chosen)
        remaining.remove(chosen)
    return order


# --------------------------------------------------------------------------- stage 2

def _lasso_cd(gram: np.ndarray, xty: np.ndarray, alpha: float, beta: np.ndarray,
              tol: float = 1e-12, max_sweeps: int = 100000) -> np.ndarray:
    """Coordinate descent for (1/2n)||y - Xb||^2 + alpha ||b||_1 given X'X/n and X'y/n."""
    # plain floats: numpy call overhead dominates at these sizes
    b = [float(v) for v in beta]
    g = gram.tolist()
    c_ = xty.tolist()
    k = len(b)
    idx = range(k)
    for _ in range(max_sweeps):
        max_step = 0.0
        for c in idx:
            row = g[c]
            rho = c_[c] - sum(row[l] * b[l] for l in idx) + row[c] * b[c]
            if rho > alpha:
                new = (rho - alpha) / row[c]
            elif rho < -alpha:
                new = (rho + alpha) / row[c]
            else:
                new = 0.0
            step = abs(new - b[c])
            if step > max_step:
                max_step = step
            b[c] = new
        if max_step <= tol * max(1.0, max(abs(v) for v in b)):
            break
    return np.array(b)


def adaptive_lasso_bic(x: np.ndarray, y: np.ndarray, n_alphas: int = 50,
                       alpha_ratio: float = 1e-4) -> np.ndarray:
    """Adaptive lasso on centered data; penalty weights 1/|OLS|, alpha by BIC.

    The alpha grid is ``n_alphas`` log-spaced values from the smallest alpha
    that zeroes every coefficient down to ``alpha_ratio`` times it. Ties in
    BIC go to the larger alpha.
    """
    n, k = x.shape
    ols = np.linalg.lstsq(x, y, rcond=None)[0]
    w = np.abs(ols)
    active = w > 0
    beta = np.zeros(k)
    if not active.any():
        return beta
    xw = x[:, active] * w[active]
    gram = xw.T @ xw / n
    xty = xw.T @ y / n
    alpha_max = float(np.abs(xty).max())
    if alpha_max == 0:
        return beta
    grid = np.geomspace(alpha_max, alpha_max * alpha_ratio, n_alphas)
    log_n = math.log(n)
    coef = np.zeros(xw.shape[1])
    best_bic, best = math.inf, coef.copy()
    for alpha in grid:
        coef = _lasso_cd(gram, xty, float(alpha), coef)
        rss = float(((y - xw @ coef) ** 2).sum())
        df = int(np.count_nonzero(coef))
        bic = n * math.log(max(rss, 1e-300) / n) + df * log_n
        if bic < best_bic - 1e-12:
            best_bic, best = bic, coef.copy()
    beta[active] = best * w[active]
    return beta


def _allowed_parents(target: int, preds: list[int], pk: PriorKnowledge,
                     ancestors: dict[int, set[int]]) -> list[int]:
    """Predecessors that can feed ``target`` without creating a forbidden path."""
    banned = {a for a in range(pk.p) if pk.forbidden(target, a)}
    return [m for m in preds if not (({m} | ancestors[m]) & banned)]


def estimate_adjacency(m: DataMatrix, order: Sequence[int], pk: PriorKnowledge | None = None,
                       method: str = "adaptive_lasso", ols_threshold: float = 0.01,
                       standardized: bool = True) -> CausalModel:
    """Stage 2: regress each variable on its admissible predecessors.

    ``method`` is ``"adaptive_lasso"`` (default) or ``"ols"``; in OLS mode
    coefficients with magnitude <= ``ols_threshold`` are set to zero.
    Residual variances use the N-1 divisor so a saturated model reproduces
    the sample covariance.
    """
    n, p = m.n, m.p
    order = [int(i) for i in order]
    if sorted(order) != list(range(p)):
        raise DataValidationError(f"{order} is not a permutation of 0..{p - 1}")
    if n <= p:
        raise DataValidationError(f"estimate_adjacency needs N > p (N={n}, p={p})")
    if method not in ("adaptive_lasso", "ols"):
        raise DataValidationError(f"unknown regression method {method!r}")
    pk = pk if pk is not None else PriorKnowledge.empty(p)

    xc = m.values - m.values.mean(axis=0)
    adj = np.zeros((p, p))
    resid = np.zeros((n, p))
    res_var = np.zeros(p)
    ancestors: dict[int, set[int]] = {}
    for pos, i in enumerate(order):
        parents = _allowed_parents(i, order[:pos], pk, ancestors)
        y = xc[:, i]
        if parents:
            xp = xc[:, parents]
            if np.linalg.matrix_rank(xp) < len(parents):
                raise NumericError(
                    f"singular predecessor design for {m.column_names[i]!r}")
            if method == "ols":
                beta = np.linalg.lstsq(xp, y, rcond=None)[0]
                beta[np.abs(beta) <= ols_threshold] = 0.0
            else:
                beta = adaptive_lasso_bic(xp, y)
            adj[i, parents] = beta
            r = y - xp @ beta
        else:
            r = y.copy()
        resid[:, i] = r
        res_var[i] = float(r @ r) / (n - 1)
        anc = set()
        for j in parents:
            if adj[i, j] != 0:
                anc |= {j} | ancestors[j]
        ancestors[i] = anc
    model = CausalModel(m.column_names, order, adj, res_var, standardized, n)
    model.residuals = resid
    return model


def fit(m: DataMatrix, pk: PriorKnowledge | None = None, standardize_data: bool = True,
        constants: EntropyConstants = DEFAULT_CONSTANTS, method: str = "adaptive_lasso",
        ols_threshold: float = 0.01) -> CausalModel:
    """Full DirectLiNGAM: z-score (optional), causal order, then adjacency.

    Columns are processed in sorted-label order internally and mapped back,
    which makes the result equivariant under column permutation.
    """
    p = m.p
    pk = pk if pk is not None else PriorKnowledge.empty(p, m.column_names)
    if pk.p != p:
        raise DataValidationError(f"prior knowledge size {pk.p} != {p} variables")
    if pk.names is not None and pk.names != m.column_names:
        missing = set(m.column_names) - set(pk.names)
        if missing:
            raise DataValidationError(f"prior knowledge lacks variables {sorted(missing)}")
        pk = pk.permuted([pk.names.index(c) for c in m.column_names])
    data = standardize(m) if standardize_data else m
    perm = _canonical(m.column_names)
    sorted_data = data.select([m.column_names[i] for i in perm])
    sorted_pk = pk.permuted(perm)
    order_s = search_causal_order(sorted_data, sorted_pk, constants)
    model_s = estimate_adjacency(sorted_data, order_s, sorted_pk, method, ols_threshold,
                                 standardized=standardize_data)

    inv = np.empty(p, dtype=int)
    inv[perm] = np.arange(p)
    adj = model_s.adjacency[np.ix_(inv, inv)]
    model = CausalModel(m.column_names, [perm[i] for i in order_s], adj,
                        model_s.residual_variances[inv], standardize_data, m.n)
    model.residuals = model_s.residuals[:, inv]
    return model


# --------------------------------------------------------------------------- audit

@dataclass(frozen=True)
class NormalityResult:
    variable: str
    w: float
    p_value: float


def structural_residuals(model: CausalModel, m: DataMatrix) -> np.ndarray:
    """e = x - A x on centered data, standardized first if the model was."""
    if m.column_names != model.variable_names:
        m = m.select(model.variable_names)
    data = standardize(m) if model.standardized else m
    xc = data.values - data.values.mean(axis=0)
    return xc - xc @ model.adjacency.T


def residual_normality_audit(model: CausalModel, m: DataMatrix) -> list[NormalityResult]:
    """Shapiro-Wilk on each variable's structural residual."""
    if not 3 <= m.n <= 5000:
        raise DataValidationError(f"Shapiro-Wilk needs 3 <= N <= 5000, got N={m.n}")
    e = structural_residuals(model, m)
    out = []
    for j, name in enumerate(model.variable_names):
        w, pv = sps.shapiro(e[:, j])
        out.append(NormalityResult(name, float(w), float(pv)))
    return out
