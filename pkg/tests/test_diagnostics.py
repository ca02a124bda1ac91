import numpy as np
import pytest
from scipy import stats

from maxsum.cadlag_core import NONDECREASING, step_path
from maxsum.diagnostics import (CompactnessTable, SweepResult, charfn_se, convergence_sweep, decomposition_probe,
                                empirical_charfn, identical_pareto_single_term, independence_probe, j_compactness_probe,
                                ks_distance, ks_se, prelimit_stopped, stopped_from_triples, stopped_functional,
                                stopping_inclusion)
from maxsum.presets import get_preset
from oracles import renewal_count


def test_ks_distance_and_errors():
    x = np.random.default_rng(0).standard_normal(5000)
    assert ks_distance(x, stats.norm.cdf) <= 0.03
    assert ks_distance(x, x) == 0.0
    assert ks_distance(np.zeros(10), np.ones(10)) == 1.0
    with pytest.raises(ValueError):
        ks_distance([], x)
    with pytest.raises(ValueError):
        ks_distance(x, [])
    assert ks_se(100) == pytest.approx(0.026)
    assert ks_se(100, 100) == pytest.approx(0.026 * np.sqrt(2))


def test_empirical_charfn():
    s = np.array([[0.0, 0.0], [np.pi, 0.0]])
    assert empirical_charfn(s, 1.0, 0.0) == pytest.approx(0.0)
    assert empirical_charfn(s, 0.0, 5.0) == pytest.approx(1.0)
    assert charfn_se(10000) == 0.01
    with pytest.raises(ValueError):
        empirical_charfn(np.zeros((0, 2)), 1.0, 1.0)


def test_sweep_result_verdicts():
    r = SweepResult([1e-2, 1e-3], [100, 1000], [0.1, 0.02], [0.01, 0.01], 0.03, "x")
    assert r.trend_ok and r.final_ok and r.passed
    assert r.verdict() == "consistent with convergence"
    assert [row["n"] for row in r.rows()] == [100, 1000]
    bad = SweepResult([1e-2, 1e-3], [100, 1000], [0.02, 0.1], [0.01, 0.01], 0.03)
    assert not bad.trend_ok and not bad.passed


def test_stopped_from_triples_against_renewal_oracle():
    rng = np.random.default_rng(1)
    kap = rng.exponential(1.0, (50, 40))
    xi = rng.random((50, 40))
    gam = rng.standard_normal((50, 40))
    vals, steps = stopped_from_triples(xi, gam, kap, 5.0)
    for r in range(50):
        k = renewal_count(kap[r], 5.0)
        if k >= 40:
            assert np.isnan(vals[r]).all()
            continue
        assert steps[r] == k + 1
        assert vals[r, 0] == xi[r, :k + 1].max()
        assert vals[r, 1] == pytest.approx(gam[r, :k + 1].sum(), abs=1e-12)
        assert vals[r, 2] > 5.0


def test_prelimit_stopped_deterministic():
    model, _ = get_preset("deterministic").make()
    out = prelimit_stopped(model, 0.01, 1.005, 20, np.random.default_rng(0))
    # kappa steps of 1/100: tau(1.005) covers 101 steps
    assert np.allclose(out[:, 1], 1.01) and np.allclose(out[:, 2], 1.01) and np.all(out[:, 0] == 0.0)


def test_prelimit_stopped_falls_back_to_path_when_block_is_short():
    model, _ = get_preset("example2").make()
    out = prelimit_stopped(model, 0.01, 40.0, 30, np.random.default_rng(2), block=8)
    assert np.all(out[:, 2] > 40.0) and not np.isnan(out).any()


def test_convergence_sweep_against_cdf():
    model, _ = get_preset("pareto_scale").make()
    limit_cdf = lambda u: np.exp(-1.0 / np.maximum(u, 1e-300))
    res = convergence_sweep(model, [1e-2, 1e-3], stopped_functional(0, 1.0), limit_cdf, 4000,
                            np.random.default_rng(3), final_threshold=0.05)
    assert res.passed, res.distances


def test_decomposition_probe_values():
    _, chars = get_preset("identical").make()
    res = decomposition_probe(chars, [100, 1000, 10000], 1.5, 1.0, 0.3, 0.2)
    assert res.passed
    assert res.distances[-1] <= 0.05
    e = identical_pareto_single_term(100, 1.5, 1e6, 0.0, 0.0)
    assert e == pytest.approx(1.0, abs=1e-9)


def test_compactness_table_rows_and_monotone():
    t = CompactnessTable([1e-2, 1e-3], [0.01, 0.1], np.array([[0.2, 0.4], [0.01, 0.3]]), 100)
    assert t.monotone_in_c and t.passed
    assert len(t.rows()) == 4


def test_j_probe_on_deterministic_steps():
    model, _ = get_preset("deterministic").make()
    tab = j_compactness_probe(model, [1e-2], [0.004, 0.03], 0.5, 2.0, 0.005, 5, np.random.default_rng(0))
    # window 2 * 0.004 < step spacing 0.01: no two-sided oscillation; 0.03 sees neighbouring steps
    assert tab.prob[0, 0] == 0.0 and tab.prob[0, 1] == 1.0
    assert tab.monotone_in_c


def test_j_probe_stopped_paths_example2():
    model, _ = get_preset("example2").make()
    tab = j_compactness_probe(model, [1e-3], [0.01], 0.5, 2.0, 0.1, 40, np.random.default_rng(4), stopped=True)
    assert tab.prob[0, 0] <= 0.1


def test_stopping_inclusion():
    tau = step_path([1.0, 1.5], np.array([[1.0], [1.0]]), 3.0, initial=[0.0], flags=(NONDECREASING,))
    assert stopping_inclusion(tau, 0.3, 0.1, 3.0).positive
    chk = stopping_inclusion(tau, 0.24, 0.1, 3.0)
    assert not chk.positive and chk.gap == 0.5 and not chk.within_2c
    chk = stopping_inclusion(tau, 0.26, 0.1, 3.0)
    assert chk.positive and chk.within_2c and not chk.within_c


def test_independence_probe():
    rng = np.random.default_rng(5)
    xi = rng.random(20000)
    sums = rng.standard_normal((20000, 2))
    out = independence_probe(xi, sums, 0.5)
    assert max(abs(c) for c in out["corr"]) <= 0.03
    dep = independence_probe(xi, np.column_stack([xi, sums[:, 0]]), 0.5)
    assert dep["corr"][0] > 0.5
    with pytest.warns(RuntimeWarning):
        independence_probe(np.zeros(10), np.ones(10), 1.0)
