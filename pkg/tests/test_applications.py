import numpy as np
import pytest

from maxsum.applications import (RiskModel, alternative_stopping, build_example, build_risk_process, record_increment,
                                 transformed_path)
from maxsum.cadlag_core import (RUNNING_MAX, PathContractError, PathDomainError, evaluate, step_path)
from maxsum.triangular_array import CapacityError, Marginal, build_stopping
from oracles import renewal_count

CONST = lambda v: {"law": "const", "params": {"value": v}}
EXP1 = {"law": "exponential", "params": {"rate": 1.0}}


def test_example1_deterministic_counts():
    run = build_example(1, {"X": CONST(1.0)}, 1.0, 2.5, np.random.default_rng(0))
    st = run.stopped_at(2.5)
    assert (st["raw_count"], st["tau_count"]) == (2, 3)
    assert st["max_raw"] == 1.0 and st["sum_raw"] == 2.0
    assert st["max_tau"] == 1.0 and st["sum_tau"] == 3.0


def test_example2_deterministic_pair():
    run = build_example("insurance_pair", {"X": CONST(1.0), "Y": CONST(3.0)}, 1.0, 10.0, np.random.default_rng(0))
    for t in (0.5, 1.0, 3.7, 9.2):
        st = run.stopped_at(t)
        assert st["raw_count"] == int(np.floor(t))
        assert st["sum_raw"] == 3.0 * st["raw_count"]
        assert st["max_tau"] == 3.0
        if st["raw_count"]:
            assert st["max_raw"] == 3.0


def test_example1_exponential_against_loop_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        run = build_example(1, {"X": EXP1}, 1.0, 5.0, rng)
        x = run.raw["interarrival"]
        for t in (1.0, 3.3, 5.0):
            st = run.stopped_at(t)
            k = renewal_count(x, t)
            assert st["raw_count"] == k
            assert st["sum_raw"] == pytest.approx(sum(x[:k]), abs=1e-12)


def test_example3_wiring():
    params = {"X": EXP1, "Y": {"law": "pareto", "params": {"alpha": 2.0}}, "Z": {"law": "normal",
                                                                              "params": {"mu": 0.0, "sigma": 1.0}}}
    run = build_example(3, params, 0.01, 2.0, np.random.default_rng(2))
    p = run.prelimit
    assert np.array_equal(p.levels[1:, 0], np.maximum.accumulate(run.raw["max"])[: p.n_jumps])
    assert np.allclose(p.levels[1:, 1], np.cumsum(run.raw["sum"])[: p.n_jumps])


def test_example_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(PathDomainError):
        build_example(4, {"X": EXP1}, 1.0, 1.0, rng)
    with pytest.raises(PathDomainError):
        build_example(2, {"X": EXP1}, 1.0, 1.0, rng)
    with pytest.raises(PathDomainError):
        build_example(1, {"X": EXP1}, 0.0, 1.0, rng)
    with pytest.raises(CapacityError):
        build_example(1, {"X": CONST(0.0)}, 1.0, 1.0, rng, budget=100)


def _det_risk(premium):
    return RiskModel(Marginal("const", {"value": 1.0}), Marginal("const", {"value": 0.5}), premium)


def test_risk_hand_example():
    run = build_risk_process(_det_risk(1.0), 1.0, 4.0, np.random.default_rng(0), t_grid=[2.0])
    assert run.tau[0] == 3.0
    assert run.mu[0] == 0.5
    assert run.overshoot[0] == -1.0 and run.stopped_sum[0] == 1.5
    assert run.bound_lhs[0] == 1.0 and run.bound_rhs[0] == 1.0 and run.bound_holds


def test_risk_zero_premium():
    risk = RiskModel(Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0),
                     Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0), 0.0)
    run = build_risk_process(risk, 0.01, 2.0, np.random.default_rng(1))
    # gamma = c * kappa - claim, so with c = 0 the stopped sum is minus the stopped claims
    assert np.array_equal(run.mu, run.stopped_sum) and np.all(run.mu < 0)
    with pytest.raises(PathDomainError):
        RiskModel(risk.kappa, risk.claim, -1.0).premium_at(0.1)


def test_risk_identities_random_portfolios():
    risk = RiskModel(Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0),
                     Marginal("pareto", {"alpha": 2.5}, scale_exponent=1.0), lambda eps: 1.2 + eps)
    rng = np.random.default_rng(2)
    for _ in range(100):
        run = build_risk_process(risk, 0.01, 3.0, rng)
        assert run.representation_error <= 1e-12
        assert run.bound_holds
        assert len(run.rows()) == 200 and set(run.rows()[0]) == {"t", "mu", "overshoot_term", "stopped_sum",
                                                                  "bound_lhs", "bound_rhs"}


def test_risk_overshoot_vanishes_along_sweep():
    risk = RiskModel(Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0),
                     Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0), 1.0)
    rng = np.random.default_rng(3)
    probs = []
    for eps in (0.1, 0.01, 0.001):
        over = np.concatenate([build_risk_process(risk, eps, 2.0, rng).overshoot for _ in range(50)])
        probs.append(np.mean(np.abs(over) > 0.05))
    assert probs[0] > probs[1] > probs[2] and probs[2] < 0.01


def _const_triple(x, g, k=0.0, horizon=1.0):
    return step_path([], np.zeros((0, 3)), horizon, initial=[x, g, k])


def test_transforms_on_constant_paths():
    assert transformed_path(_const_triple(2.0, 3.0), "ratio_const", a=1.0)(0.5) == 0.5
    assert transformed_path(_const_triple(2.0, 5.0), "difference")(0.5) == 3.0
    rt = transformed_path(_const_triple(2.0, 3.0), "ratio_time", a=1.0)
    assert rt(1.0) == 0.5
    with pytest.raises(PathDomainError):
        rt(0.0)
    for bad in (0.0, -1.0, None):
        with pytest.raises(PathDomainError):
            transformed_path(_const_triple(2.0, 3.0), "ratio_const", a=bad)
    with pytest.raises(PathDomainError):
        transformed_path(_const_triple(2.0, 3.0), "square")
    with pytest.raises(PathDomainError):
        transformed_path(_const_triple(2.0, 3.0), "custom")


def test_transform_sup_against_grid_scan():
    run = build_example(3, {"X": EXP1, "Y": EXP1, "Z": {"law": "normal", "params": {"mu": 0.0, "sigma": 1.0}}},
                        0.05, 3.0, np.random.default_rng(4))
    p = run.prelimit
    grid = np.linspace(0.2, 2.5, 200001)
    for name, a in (("difference", None), ("ratio_const", 0.5)):
        tp = transformed_path(p, name, a=a)
        assert tp.sup_over(0.2, 2.5) == pytest.approx(np.max(tp(grid)), abs=1e-12)
        step = tp.as_step_path()
        assert np.allclose(evaluate(step, grid)[:, 0], tp(grid))
    rt = transformed_path(p, "ratio_time", a=0.5)
    assert rt.sup_over(0.2, 2.5) >= np.max(rt(grid)) - 1e-12
    with pytest.raises(PathContractError):
        rt.as_step_path()


def test_first_passage_reductions():
    run = build_example(2, {"X": EXP1, "Y": EXP1}, 0.1, 6.0, np.random.default_rng(5))
    p = run.prelimit
    t_grid = np.linspace(0.1, 4.0, 40)
    ident = alternative_stopping(p, "first_passage", t_grid, f=lambda s, x: s)
    assert np.allclose(ident.tau, t_grid, atol=1e-9) and not ident.truncated.any()
    kap = alternative_stopping(p, "first_passage", t_grid, f=lambda s, x: x[2])
    assert np.array_equal(kap.tau, evaluate(build_stopping(p, 4.0), t_grid)[:, 0])
    high = alternative_stopping(p, "first_passage", [1e9], f=lambda s, x: x[2])
    assert high.truncated[0] and high.tau[0] == p.horizon
    with pytest.raises(PathDomainError):
        alternative_stopping(p, "first_passage", t_grid)
    with pytest.raises(PathDomainError):
        alternative_stopping(p, "latest", t_grid)


def test_extremal_jump_both_readings():
    # raw marks 1 at 0.5, 4 at 0.8, 6 at 1.5: record increments 1, 3, 2
    xi = step_path([0.5, 0.8, 1.5], np.array([[1.0, 0, 0], [3.0, 0, 0], [2.0, 0, 0]]), 2.0, initial=[0.0, 0.0, 0.0],
                   flags=(RUNNING_MAX, "", ""))
    res = alternative_stopping(xi, "extremal_jump", [2.5, 1.5, 0.5, 5.0])
    assert list(res.tau) == [0.8, 0.8, 0.5, 2.0]
    assert list(res.truncated) == [False, False, False, True]
    assert np.all(res.alternative == 2.0)
    assert [record_increment(xi, s) for s in (0.5, 0.8, 1.5, 1.0)] == [1.0, 3.0, 2.0, 0.0]
