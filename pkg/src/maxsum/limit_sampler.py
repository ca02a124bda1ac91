"""Samplers for the limit processes: extremal, Levy, joint hybrid, and renewal-stopped.

Jump parts are exact (marked Poisson streams over discrete atoms).  The
Gaussian part of the sum coordinate is an Euler skeleton whose increments
are recorded as jumps at the grid points, so every sample is a CadlagPath
and the skeleton values at grid times are exact in law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .cadlag_core import NONDECREASING, RUNNING_MAX, CadlagPath, evaluate, generalized_inverse
from .limit_law import (CharacteristicsError, LimitCharacteristics, SamplerParameters, sampler_parameters)
from .triangular_array import CapacityError

RETRY_CAP = 40
_CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class HybridSampleConfig:
    chars: LimitCharacteristics
    horizon: float
    euler_step: float | None = None
    initial_max: float | None = None

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.euler_step is None:
            object.__setattr__(self, "euler_step", self.horizon / 2 ** 10)
        if not 0 < self.euler_step <= self.horizon / 100 * (1 + 1e-12):
            raise ValueError("euler_step must be positive and at most horizon/100")
        if self.initial_max is None:
            object.__setattr__(self, "initial_max", float(self.chars.u_pi))

    @property
    def start_level(self) -> float:
        return float(self.initial_max)


# extremal process ------------------------------------------------------------

def _record_chain(chars: LimitCharacteristics, start: NDArray[np.float64], t_start: float, horizon: float,
                  rng: np.random.Generator):
    """Vectorized record construction from level ``start`` at time t_start.

    Returns (path index, jump time, new level) triples in path-then-time order.
    """
    tail = chars.tail
    level = start.copy()
    clock = np.full(start.shape, float(t_start))
    alive = np.ones(start.shape, dtype=bool)
    ids, times, levels = [], [], []
    while alive.any():
        idx = np.flatnonzero(alive)
        rate = np.asarray(tail(level[idx]), dtype=float)
        if np.any(np.isinf(rate)):
            raise CharacteristicsError("record chain reached a level with infinite tail")
        with np.errstate(divide="ignore"):
            hold = rng.exponential(1.0, idx.shape[0]) / rate
        clock[idx] += hold
        jumped = clock[idx] <= horizon
        alive[idx[~jumped]] = False
        j = idx[jumped]
        if j.size == 0:
            break
        target = rng.random(j.shape[0]) * rate[jumped]
        new = np.asarray(tail.inverse(target), dtype=float)
        new = np.maximum(new, level[j])
        level[j] = new
        ids.append(j)
        times.append(clock[j].copy())
        levels.append(new)
    if not ids:
        return np.zeros(0, dtype=int), np.zeros(0), np.zeros(0)
    ids_a, t_a, l_a = np.concatenate(ids), np.concatenate(times), np.concatenate(levels)
    order = np.lexsort((t_a, ids_a))
    return ids_a[order], t_a[order], l_a[order]


def extremal_entry(chars: LimitCharacteristics, t_start: float, count: int, rng: np.random.Generator):
    """Draws from the one-time law exp(-t_start * pi_1(u))."""
    if t_start <= 0:
        raise ValueError("t_start must be positive")
    e = rng.exponential(1.0, count)
    return np.asarray(chars.tail.inverse(e / t_start), dtype=float).reshape(count)


def sample_extremal_batch(chars: LimitCharacteristics, t_start: float, horizon: float, count: int,
                          rng: np.random.Generator) -> list[CadlagPath]:
    """``count`` extremal paths on [0, horizon].

    The initial value of each path is its state at ``t_start``; the
    process before t_start is not simulated.
    """
    if not 0 < t_start < horizon:
        raise ValueError("need 0 < t_start < horizon")
    start = extremal_entry(chars, t_start, count, rng)
    ids, times, levels = _record_chain(chars, start, t_start, horizon, rng)
    bounds = np.searchsorted(ids, np.arange(count + 1))
    paths = []
    for p in range(count):
        sl = slice(bounds[p], bounds[p + 1])
        lv = np.concatenate([[start[p]], levels[sl]])
        paths.append(CadlagPath([start[p]], times[sl], np.diff(lv).reshape(-1, 1), None, horizon, (RUNNING_MAX,),
                                lv.reshape(-1, 1), {"t_start": t_start}))
    return paths


def sample_extremal(chars: LimitCharacteristics, t_start: float, horizon: float, rng: np.random.Generator) -> CadlagPath:
    return sample_extremal_batch(chars, t_start, horizon, 1, rng)[0]


def extremal_at(chars: LimitCharacteristics, times, count: int, rng: np.random.Generator,
                start_level: float | None = None) -> NDArray[np.float64]:
    """Values of the extremal process at increasing times through the exact fdd chain.

    Each step draws an independent maximum over the elapsed time and takes the
    running maximum; with ``start_level`` the chain starts from that level at
    time 0 instead of from the entry law.  Shape ``(count, len(times))``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) < 0) or t[0] <= 0:
        raise ValueError("times must be positive and nondecreasing")
    dt = np.diff(np.concatenate([[0.0], t]))
    out = np.empty((count, t.shape[0]))
    cur = np.full(count, -np.inf if start_level is None else float(start_level))
    for k, d in enumerate(dt):
        if d > 0:
            cur = np.maximum(cur, extremal_entry(chars, d, count, rng))
        out[:, k] = cur
    return out


# Levy and hybrid ------------------------------------------------------------

def _check_consistency(chars: LimitCharacteristics, floor: float) -> None:
    at = chars.jumps.atoms
    marks = at.mark[~np.isnan(at.mark)]
    probe = np.unique(np.concatenate([[floor], marks[marks >= floor], marks[marks >= floor] + 1e-9]))
    for u in probe:
        got = float(np.asarray(chars.tail(u)))
        want = float(at.mass[~np.isnan(at.mark) & (at.mark > u)].sum())
        if not np.isclose(got, want, rtol=_CONSISTENCY_TOL, atol=_CONSISTENCY_TOL):
            raise CharacteristicsError(
                f"tail function {got} disagrees with the mark mass {want} at level {u}")


def _poisson_marks(params: SamplerParameters, t0: float, t1: float, rng: np.random.Generator):
    at = params.jumps.atoms
    total = float(at.mass.sum())
    if total == 0 or t1 <= t0:
        return np.zeros(0), np.zeros(0, dtype=int)
    k = rng.poisson(total * (t1 - t0))
    times = np.sort(rng.uniform(t0, t1, k))
    which = rng.choice(len(at), size=k, p=at.mass / total)
    return times, which


def _segment(params: SamplerParameters, t0: float, t1: float, step: float, start: NDArray[np.float64],
             rng: np.random.Generator):
    """Events of the joint process on (t0, t1] starting from state (max, gamma-jumps, kappa-jumps)."""
    at = params.jumps.atoms
    times, which = _poisson_marks(params, t0, t1, rng)
    mark = at.mark[which]
    dv = at.v[which]
    dw = at.w[which]
    if params.b > 0:
        n_steps = int(round((t1 - t0) / step))
        grid = t0 + step * np.arange(1, n_steps + 1)
        grid[-1] = t1
        gz = params.b * np.sqrt(np.diff(np.concatenate([[t0], grid]))) * rng.standard_normal(n_steps)
        times = np.concatenate([times, grid])
        mark = np.concatenate([mark, np.full(n_steps, np.nan)])
        dv = np.concatenate([dv, gz])
        dw = np.concatenate([dw, np.zeros(n_steps)])
        order = np.argsort(times, kind="stable")
        times, mark, dv, dw = times[order], mark[order], dv[order], dw[order]
    return times, mark, dv, dw


def _assemble(times, mark, dv, dw, start_max: float, params: SamplerParameters, horizon: float,
              with_max: bool) -> CadlagPath:
    if times.size:
        uniq, inv = np.unique(times, return_inverse=True)
        if uniq.shape[0] != times.shape[0]:
            m = np.full(uniq.shape[0], -np.inf)
            np.maximum.at(m, inv, np.where(np.isnan(mark), -np.inf, mark))
            v = np.zeros(uniq.shape[0])
            w = np.zeros(uniq.shape[0])
            np.add.at(v, inv, dv)
            np.add.at(w, inv, dw)
            times, mark, dv, dw = uniq, np.where(np.isinf(m), np.nan, m), v, w
    g_lv = np.concatenate([[0.0], np.cumsum(dv)])
    k_lv = np.concatenate([[0.0], np.cumsum(dw)])
    drift = [params.gamma_drift, params.kappa_drift]
    if not with_max:
        levels = np.column_stack([g_lv, k_lv])
        return CadlagPath(levels[0], times, np.column_stack([dv, dw]), drift, horizon, ("", NONDECREASING), levels)
    marks = np.where(np.isnan(mark), -np.inf, mark)
    x_lv = np.maximum.accumulate(np.concatenate([[start_max], marks]))
    levels = np.column_stack([x_lv, g_lv, k_lv])
    sizes = np.column_stack([np.diff(x_lv), dv, dw])
    return CadlagPath(levels[0], times, sizes, [0.0] + drift, horizon, (RUNNING_MAX, "", NONDECREASING), levels)


def sample_levy(chars: LimitCharacteristics, horizon: float, euler_step: float | None, rng: np.random.Generator) -> CadlagPath:
    """(gamma_0, kappa_0) on [0, horizon]."""
    params = sampler_parameters(chars)
    step = horizon / 2 ** 10 if euler_step is None else euler_step
    times, mark, dv, dw = _segment(params, 0.0, horizon, step, np.zeros(3), rng)
    return _assemble(times, mark, dv, dw, 0.0, params, horizon, with_max=False)


def sample_hybrid(config: HybridSampleConfig, rng: np.random.Generator) -> CadlagPath:
    """(xi_0, gamma_0, kappa_0) on [0, horizon] from one marked Poisson stream."""
    chars = config.chars
    params = sampler_parameters(chars)
    start = config.start_level
    if np.isinf(chars.tail(start)):
        raise CharacteristicsError("initial_max must have a finite tail value")
    _check_consistency(chars, start)
    times, mark, dv, dw = _segment(params, 0.0, config.horizon, config.euler_step, np.zeros(3), rng)
    return _assemble(times, mark, dv, dw, start, params, config.horizon, with_max=True)


def _sums_at(params: SamplerParameters, t: float, count: int, rng: np.random.Generator):
    at = params.jumps.atoms
    total = float(at.mass.sum())
    k = rng.poisson(total * t, count) if total > 0 else np.zeros(count, dtype=int)
    which = rng.choice(len(at), size=int(k.sum()), p=at.mass / total) if total > 0 else np.zeros(0, dtype=int)
    owner = np.repeat(np.arange(count), k)
    gamma = params.gamma_drift * t + np.bincount(owner, at.v[which], count)
    kappa = params.kappa_drift * t + np.bincount(owner, at.w[which], count)
    if params.b > 0:
        gamma = gamma + params.b * np.sqrt(t) * rng.standard_normal(count)
    return gamma, kappa, owner, which


def levy_at(chars: LimitCharacteristics, t: float, count: int, rng: np.random.Generator):
    """(gamma_0(t), kappa_0(t)) for ``count`` independent replicates, drawn directly."""
    gamma, kappa, _, _ = _sums_at(sampler_parameters(chars), t, count, rng)
    return gamma, kappa


def hybrid_at(config: HybridSampleConfig, t: float, count: int, rng: np.random.Generator):
    """(xi_0(t), gamma_0(t), kappa_0(t)) for ``count`` independent replicates, drawn directly.

    Same construction as sample_hybrid with the Gaussian part drawn exactly at t.
    """
    chars = config.chars
    params = sampler_parameters(chars)
    _check_consistency(chars, config.start_level)
    gamma, kappa, owner, which = _sums_at(params, t, count, rng)
    mk = params.jumps.atoms.mark[which]
    marks = np.where(np.isnan(mk), -np.inf, mk)
    xi = np.full(count, config.start_level)
    np.maximum.at(xi, owner, marks)
    return xi, gamma, kappa


# renewal-stopped limit ---------------------------------------------------------

def _independent_mode(chars: LimitCharacteristics) -> bool:
    at = chars.jumps.atoms
    return bool(np.all(np.isnan(at.mark))) and chars.tail.kind != "step"


def sample_stopped_limit(config: HybridSampleConfig, t_grid, rng: np.random.Generator,
                         check_conditions: bool = True) -> NDArray[np.float64]:
    """Rows (xi_0(tau_0(t)), gamma_0(tau_0(t)), kappa_0(tau_0(t))) for each t in t_grid.

    The sample is extended in independent segments until kappa_0 exceeds
    max(t_grid).  When no atom carries a max-mark and the tail is analytic,
    xi_0 is independent of the sum pair and is drawn from the exact fdd chain
    at the stopping times; otherwise the hybrid stream is used.
    """
    from .condition_checker import classify_condition_D, in_V

    chars = config.chars
    t_grid = np.asarray(t_grid, dtype=float)
    if check_conditions:
        cls = classify_condition_D(chars)
        if not cls.D:
            raise CharacteristicsError("Condition D fails: kappa_0 does not grow")
        bad = [t for t in t_grid if not in_V(cls, t)]
        if bad:
            raise CharacteristicsError(f"levels {bad} are outside the stochastic-continuity set V")
    params = sampler_parameters(chars)
    independent = _independent_mode(chars)
    if not independent:
        if np.isinf(chars.tail(config.start_level)):
            raise CharacteristicsError("initial_max must have a finite tail value")
        _check_consistency(chars, config.start_level)
    target = float(t_grid.max())
    parts = []
    t_end = 0.0
    k_total = 0.0
    seg = config.horizon
    for _ in range(RETRY_CAP):
        ev = _segment(params, t_end, t_end + seg, config.euler_step, np.zeros(3), rng)
        parts.append(ev)
        t_end += seg
        k_total = params.kappa_drift * t_end + sum(float(p[3].sum()) for p in parts)
        if k_total > target:
            break
    else:
        raise CapacityError(f"kappa_0 did not exceed {target} within {RETRY_CAP} extensions")
    times, mark, dv, dw = (np.concatenate([p[i] for p in parts]) for i in range(4))
    path = _assemble(times, mark, dv, dw, config.start_level, params, t_end, with_max=True)
    tau = generalized_inverse(path, t_grid, coord=2).time
    vals = evaluate(path, tau).reshape(-1, 3).copy()
    if independent:
        order = np.argsort(tau, kind="stable")
        st = tau[order]
        if st[0] > 0:
            xi = extremal_at(chars, st, 1, rng)[0]
        else:
            xi = np.full(st.shape[0], np.nan)
            pos = st > 0
            if pos.any():
                xi[pos] = extremal_at(chars, st[pos], 1, rng)[0]
        vals[order, 0] = xi
    return vals


def stopped_limit_batch(config: HybridSampleConfig, t_grid, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """``count`` independent replicates of sample_stopped_limit, shape (count, len(t_grid), 3)."""
    out = np.empty((count, len(np.atleast_1d(t_grid)), 3))
    for i in range(count):
        out[i] = sample_stopped_limit(config, t_grid, rng, check_conditions=(i == 0))
    return out
