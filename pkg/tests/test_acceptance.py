"""Acceptance suite: one test per criterion, run at the stated tolerances.

A one-line PASS/FAIL per criterion is printed in the terminal summary
(see conftest.py). Runtime bounds are asserted alongside the numbers.
"""

import itertools
import time
from pathlib import Path

import numpy as np
import pytest

from lingamkit import bootstrap as boot
from lingamkit import cli
from lingamkit.config import PipelineConfig
from lingamkit.dataset import DataMatrix, spearman_matrix, write_trials
from lingamkit.lingam import PriorKnowledge, fit, residual_normality_audit
from lingamkit.sem import fit_indices
from lingamkit.stats import bh_fdr, cles, friedman_f, wilcoxon_signed_rank
from lingamkit.synth import (PAPER_EXOGENOUS, PAPER_SINKS, ErrorSpec, GroundTruthModel, fixture_trials,
                             generate, paper_shaped_fixture, random_dag_model)


def _paper_prior(names):
    return PriorKnowledge.from_labels(names, PAPER_EXOGENOUS, PAPER_SINKS)


def test_criterion_1_fit_index_replay():
    t0 = time.perf_counter()
    a = fit_indices(30.688, 22, 2214.372, 22, 504)
    assert a.cfi == pytest.approx(0.996, abs=1e-3)
    assert a.nfi == pytest.approx(0.986, abs=1e-3)
    assert a.tli == pytest.approx(0.996, abs=1e-3)
    assert a.rmsea == pytest.approx(0.028, abs=1e-3)
    b = fit_indices(6.362, 22, 2214.372, 22, 504)
    assert b.cfi == pytest.approx(1.000, abs=1e-3)
    assert b.nfi == pytest.approx(0.997, abs=1e-3)
    assert b.tli == pytest.approx(1.007, abs=1e-3)
    assert b.rmsea == pytest.approx(0.000, abs=1e-3)
    assert time.perf_counter() - t0 < 1.0


FRIEDMAN_ROWS = [(0.407, 28.098), (0.357, 22.778), (0.195, 9.948), (0.248, 13.542), (0.118, 5.511),
                 (0.232, 12.359), (0.423, 30.075), (0.257, 14.212), (0.188, 9.468)]


def test_criterion_2_friedman_replay():
    t0 = time.perf_counter()
    misses = []
    for w, f in FRIEDMAN_ROWS:
        r = friedman_f(w, 42, 4)
        assert r.ddof1 == pytest.approx(2.952, abs=5e-3)
        assert r.ddof2 == pytest.approx(121.048, abs=5e-3)
        if abs(r.f - f) > 5e-3:
            misses.append((w, f, round(r.f, 4)))
    assert time.perf_counter() - t0 < 1.0
    # published F values were computed from unrounded W; see test_stats for the rounding bracket
    assert not misses, f"F off by more than 0.005 (W, published F, computed F): {misses}"


def _ancestor_pairs(adjacency):
    p = len(adjacency)
    reach = (np.asarray(adjacency) != 0).astype(int)
    for _ in range(p):
        reach = ((reach + reach @ reach) > 0).astype(int)
    return [(j, i) for i in range(p) for j in range(p) if reach[i, j]]


def test_criterion_3_ordering_recovery():
    t0 = time.perf_counter()
    gt, _ = paper_shaped_fixture(0)
    pairs = _ancestor_pairs(gt.adjacency)
    ok = 0
    for seed in range(100):
        _, m = paper_shaped_fixture(seed)
        model = fit(m, _paper_prior(m.column_names))
        pos = {v: k for k, v in enumerate(model.causal_order)}
        ok += all(pos[j] < pos[i] for j, i in pairs)
    assert time.perf_counter() - t0 < 120
    assert ok >= 90, f"{ok}/100 orders consistent"


def test_criterion_4_edge_effect_consistency():
    t0 = time.perf_counter()
    gt, m = paper_shaped_fixture(0, n=10000)
    model = fit(m, _paper_prior(m.column_names))
    truth = gt.standardized_adjacency()
    nz = model.adjacency != 0
    assert nz.any()
    worst = np.max(np.abs(model.adjacency[nz] - truth[nz]))
    assert time.perf_counter() - t0 < 60
    assert worst <= 0.05, f"max deviation {worst:.4f}"


def _path_sum(a, cause, effect):
    p = len(a)
    total = 0.0
    stack = [(cause, 1.0)]
    while stack:
        node, prod = stack.pop()
        for nxt in range(p):
            w = a[nxt, node]
            if w != 0:
                if nxt == effect:
                    total += prod * w
                else:
                    stack.append((nxt, prod * w))
    return total


def test_criterion_5_total_effect_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = int(rng.integers(2, 7))
        a = random_dag_model(p, rng).adjacency
        perm = rng.permutation(p)
        a = a[np.ix_(perm, perm)]  # hide the triangular layout
        brute = np.array([[_path_sum(a, j, i) if i != j else 0.0 for j in range(p)] for i in range(p)])
        inv = np.linalg.inv(np.eye(p) - a) - np.eye(p)
        np.testing.assert_allclose(inv, brute, rtol=0, atol=1e-12)
        np.testing.assert_allclose(boot.total_effects(a), brute, rtol=0, atol=1e-12)
    assert time.perf_counter() - t0 < 10


def test_criterion_6_bootstrap_semantics():
    t0 = time.perf_counter()
    a = np.zeros((3, 3))
    a[1, 0] = 0.8
    gt = GroundTruthModel(("x1", "x2", "x3"), a, ErrorSpec("uniform", 1.0))
    m = generate(gt, 504, seed=6)
    s = boot.bootstrap_fit(m, None, B=500, master_seed=6, workers=1)
    assert s.edge_probability[1, 0] >= 0.95
    for i, j in [(0, 1), (2, 0), (2, 1), (0, 2), (1, 2)]:
        assert s.edge_probability[i, j] <= 0.30, (i, j, s.edge_probability[i, j])
    pruned = boot.prune(s, 0.30)
    for i, j in [(0, 1), (2, 0), (2, 1), (0, 2), (1, 2)]:
        assert pruned.median_direct_effect[i, j] == 0.0
    assert pruned.median_direct_effect[1, 0] == s.median_direct_effect[1, 0] != 0.0
    assert time.perf_counter() - t0 < 120


def _run_bootstrap(tmp: Path, csv: Path, threads: str, monkeypatch):
    monkeypatch.setenv("THREADS", threads)
    cfg = PipelineConfig(input=str(csv), bootstrap_count=40, seed=11, output_dir=str(tmp)).validate()
    cli.cmd_bootstrap(cfg)
    return cfg.run_dir()


def test_criterion_7_determinism(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    csv = tmp_path / "trials.csv"
    write_trials(fixture_trials(7), csv)
    d1 = _run_bootstrap(tmp_path / "one", csv, "1", monkeypatch)
    d4 = _run_bootstrap(tmp_path / "four", csv, "4", monkeypatch)
    assert d1.name == d4.name
    names = sorted(p.name for p in d1.iterdir())
    assert names == sorted(p.name for p in d4.iterdir())
    assert "bootstrap.artifact.json" in names and "bootstrap.png" in names
    for name in names:
        assert (d1 / name).read_bytes() == (d4 / name).read_bytes(), name
    assert time.perf_counter() - t0 < 120


def test_criterion_8_statistics_oracles():
    t0 = time.perf_counter()
    r = wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert r.exact and r.p_value == 0.25
    assert np.array_equal(bh_fdr([0.01, 0.02, 0.03]), [0.03, 0.03, 0.03])
    rng = np.random.default_rng(8)
    for _ in range(1000):
        a = rng.integers(0, 6, rng.integers(1, 30)).astype(float)
        b = rng.integers(0, 6, rng.integers(1, 30)).astype(float)
        assert abs(cles(a, b) + cles(b, a) - 1.0) <= 1e-12
    x = rng.normal(size=(60, 3))
    base = spearman_matrix(DataMatrix(("a", "b", "c"), x)).rho
    transforms = [np.exp, np.arctan, lambda v: v ** 3, lambda v: 5 * v - 2, lambda v: np.tanh(v / 2)]
    for t in range(100):
        f = transforms[t % len(transforms)]
        shift = rng.normal()
        y = np.column_stack([f(x[:, k] + shift) for k in range(3)])
        rho = spearman_matrix(DataMatrix(("a", "b", "c"), y)).rho
        assert np.max(np.abs(rho - base)) <= 1e-12
    assert time.perf_counter() - t0 < 10


def test_criterion_9_constraint_enforcement():
    _, m = paper_shaped_fixture(9)
    names = list(m.column_names)
    s = boot.bootstrap_fit(m, _paper_prior(names), B=500, master_seed=9, workers=1, keep_samples=True)
    d = s.direct_samples
    assert d.shape == (500 - s.n_excluded, 9, 9)
    q1 = names.index("Q1")
    assert not np.any(d[:, q1, :]), "edge into the exogenous variable"
    for sink in PAPER_SINKS:
        assert not np.any(d[:, :, names.index(sink)]), f"edge out of {sink}"


def test_criterion_10_residual_audit_parity():
    t0 = time.perf_counter()
    _, m = paper_shaped_fixture(10)
    model = fit(m, _paper_prior(m.column_names))
    audit = residual_normality_audit(model, m)
    assert len(audit) == 9
    assert all(r.p_value < 1e-3 for r in audit), [(r.variable, r.p_value) for r in audit]
    assert time.perf_counter() - t0 < 5
