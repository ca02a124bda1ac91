"""The thirteen acceptance criteria, one test each, at their stated tolerances and time budgets.

Each test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary.  Run alone with ``pytest tests/test_acceptance.py -s``.
"""
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from maxsum import cli
from maxsum.applications import RiskModel, build_risk_process
from maxsum.cadlag_core import NONDECREASING, compose, evaluate, generalized_inverse, max_jump, min_jump_gap, \
    modulus_J, step_path
from maxsum.diagnostics import (decomposition_probe, empirical_charfn, independence_probe, ks_distance, ks_se,
                                prelimit_stopped, SweepResult)
from maxsum.limit_law import (LimitCharacteristics, TailFunction, a_u_chain, a_u_direct, hybrid_kernel, levy_charfn,
                              measure_bound_violation)
from maxsum.limit_sampler import (HybridSampleConfig, hybrid_at, levy_at, sample_extremal_batch, sample_hybrid,
                                  stopped_limit_batch)
from maxsum.presets import get_preset
from maxsum.triangular_array import Marginal, build_prelimit, build_stopping, build_until, child_rng
from oracles import step_values_on_grid

YZ_GRID = [(y, z) for y in (-1.0, 0.0, 1.0) for z in (-1.0, 0.0, 1.0)]
CONFIGS = Path(__file__).resolve().parent.parent / "demos" / "configs"
SEED = 20240601


def report(number: int, title: str, ok: bool, detail: str, elapsed: float, budget: float | None):
    within = budget is None or elapsed <= budget
    verdict = "PASS" if ok and within else "FAIL"
    limit = f" (budget {budget:g} s)" if budget is not None else ""
    line = f"criterion {number}: {verdict}  {title}: {detail}; {elapsed:.1f} s{limit}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert within, line


def test_01_extremal_fdd():
    t0 = time.perf_counter()
    chars = LimitCharacteristics(TailFunction.frechet(1.0), c=1.0)
    n = 20000
    paths = sample_extremal_batch(chars, 0.5, 2.0, n, child_rng(SEED, 1))
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        vals = np.array([p(t)[0] for p in paths])
        for u in (0.5, 1.0, 2.0, 4.0):
            worst = max(worst, abs(np.mean(vals <= u) - np.exp(-t / u)))
    report(1, "extremal fdd", worst <= 0.02, f"max |ecdf - exp(-t/u)| = {worst:.4f} <= 0.02",
           time.perf_counter() - t0, 10)


def test_02_levy_charfn():
    t0 = time.perf_counter()
    _, chars = get_preset("compound").make()
    n = 50000
    g, k = levy_at(chars, 1.0, n, child_rng(SEED, 2))
    s = np.column_stack([g, k])
    tol = 3 / np.sqrt(n) + 0.01
    worst = max(abs(empirical_charfn(s, y, z) - levy_charfn(chars, 1.0, y, z)) for y, z in YZ_GRID)
    report(2, "Levy characteristic function", worst <= tol, f"max error {worst:.4f} <= {tol:.4f}",
           time.perf_counter() - t0, 30)


def test_03_conditional_decomposition():
    t0 = time.perf_counter()
    _, chars = get_preset("identical").make()
    res = decomposition_probe(chars, [100, 1000, 10000], 1.5, 1.0, 0.3, 0.2)
    d = ", ".join(f"{x:.4f}" for x in res.distances)
    report(3, "conditional decomposition", res.trend_ok and res.distances[-1] <= 0.05,
           f"errors over n = 1e2, 1e3, 1e4: {d}; final <= 0.05", time.perf_counter() - t0, 60)


def test_04_constant_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for name in ("identical", "example1", "comonotone"):
        chars = get_preset(name).make()[1]
        lo = max(chars.u_pi, 0.0)
        for u in (lo + 0.25, lo + 0.5, lo + 1.0, lo + 2.0, lo + 3.0):
            for v in (0.6, 1.7):
                worst = max(worst, abs(a_u_direct(chars, u) - a_u_chain(chars, u, v)))
    report(4, "constant identity", worst <= 1e-8, f"max |direct - chain| = {worst:.2e} <= 1e-8",
           time.perf_counter() - t0, 5)


def test_05_measure_bounds():
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    us = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0]
    for name in ("hybrid", "discrete_identical", "split"):
        chars = get_preset(name).make()[1]
        at = chars.jumps.atoms
        locs = sorted(set(zip(at.v.tolist(), at.w.tolist())))
        for i in range(1 << len(locs)):
            subset = [locs[k] for k in range(len(locs)) if i >> k & 1]
            for a, u1 in enumerate(us):
                for u2 in us[a:]:
                    worst = max(worst, measure_bound_violation(chars, u1, u2, subset))
                    checked += 1
    report(5, "measure bounds", worst <= 1e-10, f"{checked} (set, u1, u2) cases, max violation {worst:.1e}",
           time.perf_counter() - t0, 1)


def test_06_hybrid_kernel():
    t0 = time.perf_counter()
    _, chars = get_preset("hybrid").make()
    cfg = HybridSampleConfig(chars, 1.0, initial_max=0.0)
    n = 50000
    xi, g, k = hybrid_at(cfg, 1.0, n, child_rng(SEED, 6))
    tol = 3 / np.sqrt(n) + 0.01
    worst = 0.0
    for u in (0.75, 1.5, 3.0):
        ind = xi <= u
        for y, z in YZ_GRID:
            emp = np.mean(np.exp(1j * (y * g + z * k)) * ind)
            worst = max(worst, abs(emp - hybrid_kernel(chars, 0.0, u, 1.0, y, z)))
    report(6, "hybrid kernel", worst <= tol, f"max error over 27 points {worst:.4f} <= {tol:.4f}",
           time.perf_counter() - t0, 60)


def test_07_renewal_stopping_contract():
    t0 = time.perf_counter()
    rng = child_rng(SEED, 7)
    horizon, step = 4.0, 1.0 / 256
    grid = np.arange(0, int(horizon / step) + 1) * step
    failures, cases = 0, 0
    for _ in range(1000):
        # dyadic jump times keep the grid oracle exact
        k = rng.integers(0, 15)
        times = np.unique(rng.integers(1, 256, k)) / 64
        sizes = rng.integers(0, 4, times.shape[0]).astype(float)
        init = float(rng.integers(0, 2))
        path = step_path(times, sizes.reshape(-1, 1), horizon, initial=[init], flags=(NONDECREASING,))
        vals = step_values_on_grid(init, times, sizes, grid)
        levels = rng.integers(-1, 2 * int(init + sizes.sum()) + 2, 5) / 2
        inv = generalized_inverse(path, levels)
        for lv, tau, empty, trunc in zip(levels, inv.time, inv.empty, inv.truncated):
            cases += 1
            ok_set = grid[vals <= lv]
            if ok_set.size == 0:
                ok = bool(empty) and tau == 0.0
            else:
                ref = ok_set.max()
                ok = (not empty and ref <= tau <= ref + step and bool(np.all(vals[grid < tau] <= lv))
                      and bool(trunc) == bool(vals[-1] <= lv))
                if not trunc:
                    ok = ok and step_values_on_grid(init, times, sizes, [tau])[0] > lv
            failures += not ok
    report(7, "renewal stopping contract", failures == 0, f"{cases - failures}/{cases} (path, level) cases pass",
           time.perf_counter() - t0, 10)


def test_08_risk_identities():
    t0 = time.perf_counter()
    risk = RiskModel(Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0),
                     Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0), 1.2)
    rng = child_rng(SEED, 8)
    worst, bound_ok = 0.0, True
    for _ in range(1000):
        run = build_risk_process(risk, 0.01, 2.0, rng)
        worst = max(worst, run.representation_error)
        bound_ok &= run.bound_holds
    report(8, "risk identities", worst <= 1e-12 and bound_ok,
           f"1000 portfolios, representation error {worst:.1e} <= 1e-12, bound holds everywhere: {bound_ok}",
           time.perf_counter() - t0, 20)


def test_09_identical_components():
    t0 = time.perf_counter()
    model, _ = get_preset("identical").make()
    eps = 1e-2
    n = model.n(eps)
    grid = np.arange(1, n + 1) / n
    rng = child_rng(SEED, 9, 0)
    bad_pre = 0
    for _ in range(1000):
        p = build_prelimit(model, eps, 1.0, rng)
        g = p.coordinate(1)
        xi = evaluate(p, grid)[:, 0]
        bad_pre += any(xi[i] != max_jump(g, t) for i, t in enumerate(grid))
    _, ident = get_preset("discrete_identical").make()
    cfg = HybridSampleConfig(ident, 2.0, initial_max=0.0)
    rng = child_rng(SEED, 9, 1)
    lgrid = np.linspace(0.02, 2.0, 100)
    bad_lim = 0
    for _ in range(1000):
        p = sample_hybrid(cfg, rng)
        g = p.coordinate(1)
        xi = evaluate(p, lgrid)[:, 0]
        bad_lim += any(xi[i] != max(0.0, max_jump(g, t)) for i, t in enumerate(lgrid))
    report(9, "identical-components identity", bad_pre == 0 and bad_lim == 0,
           f"prelimit mismatching paths {bad_pre}/1000, limit mismatching paths {bad_lim}/1000",
           time.perf_counter() - t0, 10)


def test_10_stopped_convergence():
    t0 = time.perf_counter()
    model, chars = get_preset("example2").make()
    count = 10000
    limit = stopped_limit_batch(HybridSampleConfig(chars, 2.0), [1.0], count, child_rng(SEED, 10, 0))[:, 0, 0]
    eps_list = [1e-2, 1e-3, 1e-4]
    dists = [ks_distance(prelimit_stopped(model, e, 1.0, count, child_rng(SEED, 10, j + 1))[:, 0], limit)
             for j, e in enumerate(eps_list)]
    res = SweepResult(eps_list, [model.n(e) for e in eps_list], dists, [ks_se(count, count)] * 3, 0.03)
    d = ", ".join(f"{x:.4f}" for x in dists)
    report(10, "stopped-process convergence", res.passed, f"KS over n = 1e2, 1e3, 1e4: {d}; final <= 0.03",
           time.perf_counter() - t0, 120)


def test_11_j_compactness():
    t0 = time.perf_counter()
    model, _ = get_preset("example2").make()
    eps, c, T, T2, delta = 1e-4, 0.01, 0.5, 2.0, 0.1
    horizon = T2 + c
    rng = child_rng(SEED, 11)
    included, positives, big = 0, 0, 0
    for _ in range(1000):
        pre = build_until(model, eps, horizon, rng, horizon=horizon)
        tau = build_stopping(pre, horizon)
        pos = modulus_J(tau, c, T, T2) > 0
        positives += pos
        included += (not pos) or min_jump_gap(tau, T, T2) <= c
        big += modulus_J(compose(pre, tau), c, T, T2, stop_at=delta) >= delta
    prob = big / 1000
    report(11, "J-compactness", included == 1000 and prob <= 0.05,
           f"inclusion {included}/1000 ({positives} with positive modulus), "
           f"P(modulus >= {delta}) = {prob:.3f} <= 0.05", time.perf_counter() - t0, 60)


def test_12_independence():
    t0 = time.perf_counter()
    _, chars = get_preset("split").make()
    cfg = HybridSampleConfig(chars, 1.0, initial_max=0.0)
    xi, g, _ = hybrid_at(cfg, 1.0, 50000, child_rng(SEED, 12))
    res = independence_probe(xi, g, 1.0)
    corr = abs(res["corr"][0])
    report(12, "independence", corr <= 0.02,
           f"|corr(1{{xi > 1}}, gamma)| = {corr:.4f} <= 0.02 (exceedance rate {res['exceed_rate']:.3f})",
           time.perf_counter() - t0, 30)


def test_13_determinism(tmp_path):
    t0 = time.perf_counter()
    same = True
    files = 0
    for cfg in ("trivial.toml", "risk.json"):
        runs = []
        for rep in range(2):
            out = tmp_path / f"{cfg}-{rep}"
            cli.main(["run" if cfg.endswith("toml") else "risk", "--config", str(CONFIGS / cfg), "--out", str(out)])
            runs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        same &= runs[0] == runs[1] and bool(runs[0])
        files += len(runs[0])
    report(13, "determinism", same, f"{files} CSV files byte-identical across two runs", time.perf_counter() - t0,
           None)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
