import json

import numpy as np
import pytest
from scipy import integrate

from maxsum.condition_checker import (ConditionReport, TestFunctionFamily, check_condition_A, check_condition_B,
                                      check_condition_C, classify_condition_D, in_V, tolerance, trend_ok, verify_all)
from maxsum.limit_law import CharacteristicsError, LimitCharacteristics, TailFunction, loose_quadrature
from maxsum.presets import get_preset

U_GRID = [0.5, 1.5, 3.0]
VW_GRID = [0.7, 1.3]


def test_tolerance_and_trend():
    assert tolerance(10.0, 0.0) == 0.2
    assert tolerance(0.0, 0.01) == pytest.approx(0.035)
    assert trend_ok([0.3, 0.2, 0.1], [0.0, 0.0, 0.0])
    assert not trend_ok([0.1, 0.2], [0.01, 0.01])
    assert trend_ok([0.1, 0.13], [0.01, 0.01])
    # exact estimates jitter at rounding level only
    assert trend_ok([1e-16, 3e-16], [0.0, 0.0])


@pytest.mark.parametrize("name", ["deterministic", "pareto_scale", "independent", "example1", "example2", "example3",
                                  "gumbel_scale", "gaussian_domain"])
def test_presets_satisfy_conditions(name):
    model, chars = get_preset(name).make()
    rep = verify_all(model, chars, model.eps_grid, U_GRID, VW_GRID, VW_GRID, 20000, np.random.default_rng(0))
    assert rep.passed, rep.summary()


def test_wrong_tail_is_flagged():
    model, _ = get_preset("pareto_scale").make()
    wrong = LimitCharacteristics(TailFunction.frechet(2.0), c=1.0)
    rep = check_condition_A(model, wrong, model.eps_grid, U_GRID, 100, np.random.default_rng(0))
    assert not rep.verdicts["A"]
    mc = check_condition_A(model, wrong, model.eps_grid, U_GRID, 20000, np.random.default_rng(0), analytic=False)
    assert not mc.verdicts["A"]


def test_monte_carlo_tail_estimate_agrees():
    model, chars = get_preset("pareto_scale").make()
    rep = check_condition_A(model, chars, model.eps_grid, U_GRID, 20000, np.random.default_rng(1), analytic=False)
    assert rep.verdicts["A"]
    assert all(r["se"] > 0 for r in rep.sections["A"])


def test_wrong_shift_is_flagged():
    model, chars = get_preset("independent").make()
    shifted = LimitCharacteristics(chars.tail, chars.jumps, a=chars.a + 0.5, c=chars.c)
    rep = check_condition_B(model, shifted, model.eps_grid, VW_GRID, VW_GRID, 20000, np.random.default_rng(2))
    assert not rep.verdicts["B_b"]


def test_grid_points_on_discontinuities_rejected():
    model, chars = get_preset("independent").make()
    stepped = LimitCharacteristics.from_atoms([(1.0, 1.0, 0.0, 1.0)], c=1.0, floor=0.0)
    with pytest.raises(CharacteristicsError):
        check_condition_A(model, stepped, model.eps_grid, [1.0], 100, np.random.default_rng(0))
    with pytest.raises(CharacteristicsError):
        check_condition_B(model, chars, model.eps_grid, [1.0], VW_GRID, 100, np.random.default_rng(0))
    with pytest.raises(CharacteristicsError):
        check_condition_C(model, chars, model.eps_grid, [0.0], 100, np.random.default_rng(0))


def test_identical_exceedance_through_sharp_probe():
    model, chars = get_preset("identical").make()
    u, v, width = 1.0, 2.0, 1e-3
    probe = ("sharp", lambda s, t: np.clip((s - v) / width, 0.0, 1.0))
    rep = check_condition_C(model, chars, [1e-4], [u], 200000, np.random.default_rng(3), probes=[probe])
    row = rep.sections["C"][0]
    assert row["target"] == pytest.approx(max(u, v) ** -1.5, abs=2e-3)
    assert abs(row["empirical"] - max(u, v) ** -1.5) <= 0.05


def test_fourier_tail_matches_plain_quadrature():
    fam = TestFunctionFamily()
    _, chars = get_preset("identical").make()
    with loose_quadrature(1e-6):
        for name, fn, shape in fam.shaped_members():
            plain = float(np.real(chars.jumps.integrate(fn, r=fam.inner_radius)))
            assert fam.integrate(chars.jumps, fn, shape) == pytest.approx(plain, abs=2e-6), name


def test_fourier_tail_heavy_power_against_direct_formula():
    fam = TestFunctionFamily()
    _, chars = get_preset("example1").make()
    got = {name: fam.integrate(chars.jumps, fn, shape) for name, fn, shape in fam.shaped_members()}
    # diagonal ray, alpha = 1/2, ramp from radius 0.1 to 1 along s * sqrt(2)
    rho = lambda s: 0.5 * s ** -1.5
    ramp = lambda s: np.clip((np.sqrt(2) * s - 0.1) / 0.9, 0.0, 1.0)
    s_out = 1 / np.sqrt(2)
    head = integrate.quad(lambda s: ramp(s) * np.cos(2 * s) * rho(s), 0.1 / np.sqrt(2), s_out, epsabs=1e-12)[0]
    tail = integrate.quad(rho, s_out, np.inf, weight="cos", wvar=2.0)[0]
    assert got["ramp*cos(1v+1w)"] == pytest.approx(head + tail, abs=1e-8)


def test_condition_D_classification():
    _, det = get_preset("deterministic").make()
    d = classify_condition_D(det)
    assert d.D and d.D1 and not d.D2 and in_V(d, 1.0)
    lattice = LimitCharacteristics.from_atoms([(None, 0.0, 0.5, 1.0), (None, 0.0, 0.75, 1.0)])
    d = classify_condition_D(lattice)
    assert d.D and d.D2 and not d.D1
    assert not in_V(d, 1.25) and not in_V(d, 1.5) and in_V(d, 1.1) and not in_V(d, 0.0)
    none = LimitCharacteristics(TailFunction.frechet(1.0))
    assert not classify_condition_D(none).D


def test_report_tables_and_json():
    model, chars = get_preset("deterministic").make()
    rep = verify_all(model, chars, model.eps_grid, U_GRID, VW_GRID, VW_GRID, 2000, np.random.default_rng(4))
    csv_a = rep.table_csv("A")
    assert csv_a.splitlines()[0] == "eps,n,u,empirical,target,abs_error,se"
    assert len(csv_a.splitlines()) == 1 + len(model.eps_grid) * len(U_GRID)
    doc = json.loads(rep.to_json())
    assert doc["verdicts"] == rep.verdicts
    assert "D" in doc["meta"]
    merged = ConditionReport().merge(rep)
    assert merged.passed == rep.passed
    assert rep.summary().count("\n") == len(rep.verdicts)
