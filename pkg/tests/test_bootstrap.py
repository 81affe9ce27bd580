import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lingamkit import bootstrap as boot
from lingamkit.dataset import DataMatrix
from lingamkit.errors import NumericError
from lingamkit.lingam import PriorKnowledge
from lingamkit.synth import chain_model, generate, paper_shaped_fixture


def test_run_seed_rule():
    expected = np.random.SeedSequence(42, spawn_key=(7,)).generate_state(1, np.uint64)[0]
    assert boot.run_seed(42, 7) == int(expected)
    assert len({boot.run_seed(0, r) for r in range(1000)}) == 1000


def test_resample_basics():
    one = DataMatrix(("a",), np.array([[3.0]]))
    assert boot.resample(one, 1).values.tolist() == [[3.0]] * 1
    m = DataMatrix(("a", "b"), np.arange(20.0).reshape(10, 2))
    assert np.array_equal(boot.resample(m, 5).values, boot.resample(m, 5).values)
    assert set(map(tuple, boot.resample(m, 5).values)) <= set(map(tuple, m.values))


def test_resample_inclusion_frequency():
    n = 504
    m = DataMatrix(("id",), np.arange(n, dtype=float)[:, None])
    hits = np.zeros(n)
    for r in range(10_000):
        hits[np.unique(boot.resample(m, boot.run_seed(3, r)).values[:, 0]).astype(int)] += 1
    assert np.all(np.abs(hits / 10_000 - (1 - (1 - 1 / n) ** n)) <= 0.02)


def test_total_effects_power_series_exact_zeros():
    a = np.zeros((4, 4))
    a[1, 0], a[2, 1], a[3, 0] = 0.5, -2.0, 0.25
    t = boot.total_effects(a)
    assert t[2, 0] == -1.0 and t[3, 1] == 0.0 and t[3, 2] == 0.0
    np.testing.assert_allclose(t, np.linalg.inv(np.eye(4) - a) - np.eye(4), atol=1e-15)
    with pytest.raises(NumericError):
        boot.total_effects(np.array([[0.0, 1.0], [1.0, 0.0]]))


@given(st.floats(-5, 5).filter(lambda c: c != 0))
def test_total_effect_linear_in_single_edge(c):
    a = np.zeros((3, 3))
    a[1, 0], a[2, 1] = 0.7, -0.3
    b = a.copy()
    b[1, 0] *= c
    # exact up to the rounding of a reordered two-factor product
    assert boot.total_effects(b)[2, 0] == pytest.approx(boot.total_effects(a)[2, 0] * c, rel=3e-16, abs=0)


@pytest.fixture(scope="module")
def chain_summary():
    m = generate(chain_model(0.5), 300, 1)
    return boot.bootstrap_fit(m, None, B=60, master_seed=2, workers=1, keep_samples=True)


def test_bootstrap_pure_function(chain_summary):
    m = generate(chain_model(0.5), 300, 1)
    again = boot.bootstrap_fit(m, None, B=60, master_seed=2, workers=2, keep_samples=True)
    assert np.array_equal(again.direct_samples, chain_summary.direct_samples)
    assert np.array_equal(again.median_total_effect, chain_summary.median_total_effect)


def test_medians_over_nonzero(chain_summary):
    d = chain_summary.direct_samples
    for i, j in [(1, 0), (0, 1)]:
        nz = d[:, i, j][d[:, i, j] != 0]
        assert chain_summary.edge_probability[i, j] == nz.size / d.shape[0]
        expected = np.median(nz) if nz.size else 0.0
        assert chain_summary.median_direct_effect[i, j] == expected


def test_single_path_sign_agreement(chain_summary):
    s = chain_summary
    assert np.sign(s.median_total_effect[1, 0]) == np.sign(s.median_direct_effect[1, 0]) == 1


def test_prune(chain_summary):
    p = boot.prune(chain_summary, 0.3)
    assert boot.prune(p, 0.3).to_dict() == p.to_dict()
    ident = boot.prune(chain_summary, 0.0)
    assert np.array_equal(ident.median_direct_effect, chain_summary.median_direct_effect)
    # strictly-below rule: an entry exactly at the threshold survives
    q = float(chain_summary.edge_probability[1, 0])
    assert boot.prune(chain_summary, q).median_direct_effect[1, 0] != 0
    with pytest.raises(ValueError):
        boot.prune(chain_summary, 1.5)


def test_summary_roundtrip(tmp_path, chain_summary):
    s = boot.prune(chain_summary, 0.3)
    s.save(tmp_path / "s.json")
    back = boot.BootstrapSummary.load(tmp_path / "s.json")
    assert np.array_equal(back.edge_probability, s.edge_probability)
    assert back.B == 60 and back.master_seed == 2 and back.threshold == 0.3
    dot = s.to_dot()
    assert '"x1" -> "x2"' in dot and "%" in dot


def test_exclusion_budget():
    # a constant column makes every resample unfittable
    m = DataMatrix(("a", "b"), np.column_stack([np.arange(20.0), np.ones(20)]))
    with pytest.raises(NumericError, match="bootstrap"):
        boot.bootstrap_fit(m, None, B=5, workers=1)


def test_prior_respected_in_every_sample():
    _, m = paper_shaped_fixture(1, n=300)
    pk = PriorKnowledge.from_labels(m.column_names, ["Q1"], ["CIT", "CT", "ACT"])
    s = boot.bootstrap_fit(m, pk, B=20, workers=1, keep_samples=True)
    assert not s.direct_samples[:, 0, :].any()
    assert not s.direct_samples[:, :, 6:].any()
