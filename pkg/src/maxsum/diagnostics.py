"""Distances, sweeps and probes that turn the limit statements into finite checks.

Verdicts only say whether the finite sweep is consistent with a limit; a
finite grid of scales cannot establish one.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, stats

from .cadlag_core import compose, min_jump_gap, modulus_J
from .limit_law import LimitCharacteristics, conditional_charfn
from .triangular_array import ArrayModel, build_stopping, build_until, prelimit_from_triples

KS_SE_FACTOR = 0.26


def ks_distance(sample_a: ArrayLike, sample_b_or_cdf) -> float:
    a = np.asarray(sample_a, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("empty sample")
    if callable(sample_b_or_cdf):
        return float(stats.kstest(a, sample_b_or_cdf).statistic)
    b = np.asarray(sample_b_or_cdf, dtype=float).ravel()
    if b.size == 0:
        raise ValueError("empty sample")
    return float(stats.ks_2samp(a, b).statistic)


def ks_se(na: int, nb: int | None = None) -> float:
    """Rough standard deviation of the KS statistic under the null."""
    inv = 1.0 / na + (1.0 / nb if nb else 0.0)
    return KS_SE_FACTOR * np.sqrt(inv)


def empirical_charfn(samples, y: float, z: float) -> complex:
    """Mean of exp(i(y*gamma + z*kappa)) over rows (gamma, kappa)."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("empty sample")
    s = s.reshape(-1, 2)
    return complex(np.mean(np.exp(1j * (y * s[:, 0] + z * s[:, 1]))))


def charfn_se(n: int) -> float:
    return 1.0 / np.sqrt(n)


# sweeps -----------------------------------------------------------------------

@dataclass
class SweepResult:
    eps_list: list[float]
    n_list: list[int]
    distances: list[float]
    ses: list[float]
    final_threshold: float
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def trend_ok(self) -> bool:
        d, s = self.distances, self.ses
        return all(d[i + 1] <= d[i] + 2.0 * (s[i] + s[i + 1]) + 1e-12 for i in range(len(d) - 1))

    @property
    def final_ok(self) -> bool:
        return self.distances[-1] <= self.final_threshold

    @property
    def passed(self) -> bool:
        return self.trend_ok and self.final_ok

    def rows(self) -> list[dict]:
        return [{"label": self.label, "eps": e, "n": n, "distance": d, "se": s}
                for e, n, d, s in zip(self.eps_list, self.n_list, self.distances, self.ses)]

    def verdict(self) -> str:
        return "consistent with convergence" if self.passed else "not consistent with convergence"


def stopped_from_triples(xi: NDArray, gamma: NDArray, kappa: NDArray, t: float):
    """Values of (xi, gamma, kappa) at the renewal stopping time for rows of triples.

    Row r uses steps 1..K_r+1 where K_r is the last index with partial
    kappa sum <= t.  Rows whose sums never exceed t come back as NaN.
    """
    s = np.cumsum(kappa, axis=1)
    idx = (s <= t).sum(axis=1)
    ok = idx < kappa.shape[1]
    j = np.minimum(idx, kappa.shape[1] - 1)
    rows = np.arange(kappa.shape[0])
    xi_v = np.maximum.accumulate(xi, axis=1)[rows, j]
    g_v = np.cumsum(gamma, axis=1)[rows, j]
    k_v = s[rows, j]
    out = np.column_stack([xi_v, g_v, k_v])
    out[~ok] = np.nan
    return out, (idx + 1)


def prelimit_stopped(model: ArrayModel, eps: float, t: float, count: int, rng: np.random.Generator,
                     block: int = 256) -> NDArray[np.float64]:
    """``count`` draws of the prelimit triple at tau(t), shape (count, 3)."""
    n = model.n(eps)
    fam = model.family
    out = np.empty((count, 3))
    mean_k = None
    done = 0
    while done < count:
        b = min(block, count - done)
        if mean_k is None:
            probe = fam.transform(rng.random((4096, fam.latent_dim)), n).kappa
            mean_k = max(float(probe.mean()), 1e-300)
            sd_k = float(probe.std())
            m = int(np.ceil(t / mean_k + 6 * sd_k * np.sqrt(max(t / mean_k, 1.0)) / mean_k)) + 16
            m = min(m, max(16, 10_000_000 // block))
        tr = fam.transform(rng.random((b * m, fam.latent_dim)), n)
        vals, _ = stopped_from_triples(tr.xi.reshape(b, m), tr.gamma.reshape(b, m), tr.kappa.reshape(b, m), t)
        bad = np.isnan(vals[:, 0])
        for r in np.flatnonzero(bad):
            path = build_until(model, eps, t, rng, horizon=m / n)
            vals[r] = _stopped_on_path(path, t)
        out[done:done + b] = vals
        done += b
    return out


def _stopped_on_path(path, t: float) -> NDArray[np.float64]:
    from .cadlag_core import evaluate, generalized_inverse
    tau = generalized_inverse(path, t, coord=2).time
    return evaluate(path, tau).reshape(3)


def convergence_sweep(model: ArrayModel, eps_list: Sequence[float], prelimit_draw: Callable, limit_sample,
                      count: int, rng: np.random.Generator, final_threshold: float = 0.03,
                      label: str = "") -> SweepResult:
    """KS distance between a prelimit functional and a limit population (or CDF) along the sweep.

    ``prelimit_draw(model, eps, count, rng)`` returns a 1-d sample.
    """
    ns, dists, ses = [], [], []
    for eps in eps_list:
        x = prelimit_draw(model, eps, count, rng)
        dists.append(ks_distance(x, limit_sample))
        ses.append(ks_se(len(x), None if callable(limit_sample) else len(limit_sample)))
        ns.append(model.n(eps))
    return SweepResult(list(eps_list), ns, dists, ses, final_threshold, label)


def stopped_functional(component: int, t: float) -> Callable:
    def draw(model, eps, count, rng):
        return prelimit_stopped(model, eps, t, count, rng)[:, component]
    return draw


# conditional decomposition ---------------------------------------------------

def identical_pareto_single_term(n: int, alpha: float, u: float, y: float, z: float) -> complex:
    """E[exp(i(y*gamma + z*kappa)) 1{xi <= u}] for xi = gamma = (Y - EY)/n^(1/alpha), kappa = 1/n.

    Y is Pareto(alpha) on [1, inf).  Returned in the form 1 - delta with
    n*delta computed by quadrature in the normalized variable.
    """
    return 1.0 - identical_pareto_scaled_defect(n, alpha, u, y, z) / n


def identical_pareto_scaled_defect(n: int, alpha: float, u: float, y: float, z: float) -> complex:
    """n * (1 - E[exp(i y gamma) 1{xi <= u}]), excluding the deterministic kappa factor."""
    b = float(n) ** (1.0 / alpha)
    mean = alpha / (alpha - 1.0)
    lo = (1.0 - mean) / b
    shift = mean / b
    # n * density of s = (Y - mean)/b is alpha * (s + shift)^-(alpha+1)
    dens = lambda s: alpha * (s + shift) ** (-alpha - 1.0)
    tail = (u + shift) ** (-alpha) if u > lo else n
    if u <= lo:
        return complex(n)
    cuts = sorted({lo, min(0.0, u), u} | {lo + (u - lo) * q for q in (1e-6, 1e-4, 1e-2, 0.1)})
    re = im = 0.0
    for a, c in zip(cuts[:-1], cuts[1:]):
        if c <= a:
            continue
        re += integrate.quad(lambda s: 2.0 * np.sin(0.5 * y * s) ** 2 * dens(s), a, c, epsabs=1e-14, epsrel=1e-12,
                             limit=2 ** 12)[0]
        im += integrate.quad(lambda s: -np.sin(y * s) * dens(s), a, c, epsabs=1e-14, epsrel=1e-12, limit=2 ** 12)[0]
    return complex(tail + re + 1j * im)


def decomposition_probe(chars: LimitCharacteristics, n_list: Sequence[int], alpha: float, u: float, y: float,
                        z: float) -> SweepResult:
    """|E^n - exp(-pi_1(u)) * phi^(u)(1, y, z)| along n for the identical-components Pareto family."""
    target = np.exp(-chars.tail(u)) * conditional_charfn(chars, u, 1.0, y, z)
    dists = []
    for n in n_list:
        nd = identical_pareto_scaled_defect(n, alpha, u, y, z)
        power = np.exp(1j * z + n * np.log1p(-nd / n))
        dists.append(abs(power - target))
    return SweepResult([1.0 / n for n in n_list], list(n_list), dists, [0.0] * len(n_list), 0.05,
                       "conditional decomposition", {"target": target})


# compactness ------------------------------------------------------------------

@dataclass
class CompactnessTable:
    eps_list: list[float]
    c_list: list[float]
    prob: NDArray[np.float64]   # shape (len(eps_list), len(c_list))
    count: int
    threshold: float = 0.05

    @property
    def monotone_in_c(self) -> bool:
        return bool(np.all(np.diff(self.prob, axis=1) >= 0))

    @property
    def passed(self) -> bool:
        return bool(self.prob[-1, 0] <= self.threshold)

    def rows(self) -> list[dict]:
        return [{"eps": e, "c": c, "prob": float(self.prob[i, j]), "count": self.count}
                for i, e in enumerate(self.eps_list) for j, c in enumerate(self.c_list)]


def j_compactness_probe(model: ArrayModel, eps_list: Sequence[float], c_list: Sequence[float], T: float, T2: float,
                        delta: float, count: int, rng: np.random.Generator, stopped: bool = False,
                        threshold: float = 0.05) -> CompactnessTable:
    """Empirical P{Delta_J(path, c, T, T2) >= delta} per (eps, c) cell.

    The path is the triple process, or with ``stopped`` the triple at the
    renewal stopping time (kappa must exceed T2 + max(c)).
    """
    c_sorted = sorted(c_list)
    prob = np.zeros((len(eps_list), len(c_sorted)))
    horizon = T2 + max(c_sorted)
    for i, eps in enumerate(eps_list):
        n = model.n(eps)
        m = int(np.ceil(horizon * n)) + 1
        hits = np.zeros(len(c_sorted))
        for _ in range(count):
            if stopped:
                pre = build_until(model, eps, horizon, rng, horizon=horizon)
                path = compose(pre, build_stopping(pre, horizon))
            else:
                tr = model.family.transform(rng.random((m, model.family.latent_dim)), n)
                path = prelimit_from_triples(tr, n)
            for j, c in enumerate(c_sorted):
                if modulus_J(path, c, T, T2, stop_at=delta) >= delta:
                    hits[j:] += 1
                    break
        prob[i] = hits / count
    return CompactnessTable(list(eps_list), c_sorted, prob, count, threshold)


@dataclass(frozen=True)
class InclusionCheck:
    positive: bool
    gap: float
    within_c: bool
    within_2c: bool


def stopping_inclusion(tau_path, c: float, T: float, T2: float) -> InclusionCheck:
    """Delta_J of a step stopping path against the minimal jump gap in [T, T2]."""
    pos = modulus_J(tau_path, c, T, T2) > 0
    gap = min_jump_gap(tau_path, T, T2)
    return InclusionCheck(bool(pos), gap, gap <= c, gap < 2 * c)


# independence ---------------------------------------------------------------

def independence_probe(xi: ArrayLike, sums: ArrayLike, level_m: float) -> dict:
    """Correlation of 1{xi > m} with each sum component, with 1/sqrt(N) standard errors."""
    x = np.asarray(xi, dtype=float).ravel()
    s = np.asarray(sums, dtype=float).reshape(x.shape[0], -1)
    if x.size == 0:
        raise ValueError("empty sample")
    ind = (x > level_m).astype(float)
    out = {"n": int(x.size), "level": float(level_m), "exceed_rate": float(ind.mean()), "corr": [], "se": []}
    for j in range(s.shape[1]):
        col = s[:, j]
        if ind.std() == 0 or col.std() == 0:
            if ind.std() == 0:
                warnings.warn("indicator is degenerate; correlation not defined", RuntimeWarning, stacklevel=2)
                out["corr"].append(float("nan"))
            else:
                out["corr"].append(0.0)
        else:
            out["corr"].append(float(np.corrcoef(ind, col)[0, 1]))
        out["se"].append(1.0 / np.sqrt(x.size))
    return out
