"""Worked constructions: the three motivating examples, risk reserves,
transformed functionals of the stopped triple, and alternative stopping rules."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .cadlag_core import (NONDECREASING, RUNNING_MAX, CadlagPath, PathContractError, PathDomainError, evaluate,
                          evaluate_left, generalized_inverse, jump_at)
from .triangular_array import (CapacityError, Marginal, RiskFamily, TripleSample, prelimit_from_triples)

EXAMPLE_KINDS = {1: "renewal_self", 2: "insurance_pair", 3: "earthquake_triple"}
_WIRING = {"renewal_self": ("X", "X", "X"), "insurance_pair": ("Y", "Y", "X"), "earthquake_triple": ("Y", "Z", "X")}


@dataclass
class ExampleRun:
    kind: str
    n: int
    prelimit: CadlagPath
    raw: dict[str, NDArray[np.float64]]

    def stopped_at(self, t: float) -> dict:
        """Stopped pair at level t in both conventions.

        ``raw_count`` is the renewal count max{k : X_1 + ... + X_k <= t} on
        the raw scale; ``tau_count`` = n * tau(t) = raw_count + 1 includes the
        step that crosses t.
        """
        kap = self.prelimit.coordinate(2)
        tau = generalized_inverse(kap, t).time.item()
        tau_count = int(round(tau * self.n))
        raw_count = tau_count - 1
        mx = self.raw["max"]
        sm = self.raw["sum"]
        return {
            "t": t, "tau": tau, "raw_count": raw_count, "tau_count": tau_count,
            "max_raw": float(mx[:raw_count].max()) if raw_count > 0 else 0.0,
            "sum_raw": float(sm[:raw_count].sum()),
            "max_tau": float(evaluate(self.prelimit, tau)[0]),
            "sum_tau": float(evaluate(self.prelimit, tau)[1]),
        }


def _example_marginals(kind: str, params: dict) -> dict[str, Marginal]:
    needed = set(_WIRING[kind])
    out = {}
    for name in needed:
        if name not in params:
            raise PathDomainError(f"example {kind!r} needs a marginal for {name}")
        spec = params[name]
        out[name] = spec if isinstance(spec, Marginal) else Marginal.from_dict(spec)
    return out


def build_example(kind, params: dict, epsilon: float, horizon: float, rng: np.random.Generator,
                  budget: int = 10_000_000) -> ExampleRun:
    """Prelimit triple for one of the examples, extended until kappa passes ``horizon``.

    ``params`` maps the raw variables X (interarrival), Y, Z to marginal
    specs; ``epsilon`` sets n = round(1/epsilon), with epsilon = 1 for the
    raw scale.
    """
    kind = EXAMPLE_KINDS.get(kind, kind)
    if kind not in _WIRING:
        raise PathDomainError(f"unknown example kind {kind!r}")
    if epsilon <= 0 or horizon <= 0:
        raise PathDomainError("epsilon and horizon must be positive")
    n = int(round(1.0 / epsilon))
    margs = _example_marginals(kind, params)
    names = sorted(margs)
    wx, wg, wk = _WIRING[kind]
    chunk = max(16, int(np.ceil(horizon * n)))
    cols: dict[str, list] = {k: [] for k in names}
    total = 0.0
    drawn = 0
    while total <= horizon:
        if drawn + chunk > budget:
            raise CapacityError(f"kappa did not exceed {horizon} within {budget} draws")
        u = rng.random((chunk, len(names)))
        for i, k in enumerate(names):
            cols[k].append(margs[k].transform(u[:, i], n))
        drawn += chunk
        total = float(np.concatenate(cols[wk]).sum())
    vals = {k: np.concatenate(v) for k, v in cols.items()}
    tr = TripleSample(vals[wx], vals[wg], vals[wk])
    return ExampleRun(kind, n, prelimit_from_triples(tr, n), {"max": vals[wx], "sum": vals[wg], "interarrival": vals[wk]})


# risk reserves ----------------------------------------------------------------

@dataclass(frozen=True)
class RiskModel:
    kappa: Marginal
    claim: Marginal
    premium: float | Callable[[float], float]
    n_of_epsilon: Callable[[float], int] = lambda eps: int(round(1.0 / eps))

    def premium_at(self, eps: float) -> float:
        c = self.premium(eps) if callable(self.premium) else float(self.premium)
        if c < 0:
            raise PathDomainError("premium rate must be nonnegative")
        return c

    def family(self, eps: float) -> RiskFamily:
        return RiskFamily(self.kappa, self.claim, self.premium_at(eps))


@dataclass
class RiskRun:
    t: NDArray[np.float64]
    mu: NDArray[np.float64]
    overshoot: NDArray[np.float64]
    stopped_sum: NDArray[np.float64]
    decomposed: NDArray[np.float64]
    bound_lhs: NDArray[np.float64]
    bound_rhs: NDArray[np.float64]
    path: CadlagPath
    tau: NDArray[np.float64]
    meta: dict = field(default_factory=dict)

    @property
    def representation_error(self) -> float:
        return float(np.max(np.abs(self.mu - self.decomposed))) if self.t.size else 0.0

    @property
    def bound_holds(self) -> bool:
        return bool(np.all(self.bound_lhs <= self.bound_rhs))

    def rows(self) -> list[dict]:
        return [{"t": a, "mu": b, "overshoot_term": c, "stopped_sum": d, "bound_lhs": e, "bound_rhs": f}
                for a, b, c, d, e, f in zip(self.t, self.mu, self.overshoot, self.stopped_sum, self.bound_lhs,
                                            self.bound_rhs)]


def build_risk_process(risk: RiskModel, epsilon: float, horizon: float, rng: np.random.Generator,
                       t_grid: Sequence[float] | None = None, budget: int = 10_000_000) -> RiskRun:
    """Reserve process c*t - (claims up to the renewal stopping time) on a t-grid.

    The triple path uses xi_k = c * (realized kappa increments), taken from
    the same partial sums that define the kappa coordinate, so the overshoot
    bound is checked without rounding slack.
    """
    n = risk.n_of_epsilon(epsilon)
    c = risk.premium_at(epsilon)
    chunk = max(16, int(np.ceil(horizon * n)))
    kap_parts, claim_parts = [], []
    total, drawn = 0.0, 0
    while total <= horizon:
        if drawn + chunk > budget:
            raise CapacityError(f"kappa did not exceed {horizon} within {budget} draws")
        u = rng.random((chunk, 2))
        kap_parts.append(risk.kappa.transform(u[:, 0], n))
        claim_parts.append(risk.claim.transform(u[:, 1], n))
        drawn += chunk
        total = float(np.concatenate(kap_parts).sum())
    kappa = np.concatenate(kap_parts)
    claims = np.concatenate(claim_parts)
    m = kappa.shape[0]
    ksum = np.concatenate([[0.0], np.cumsum(kappa)])
    k_inc = np.diff(ksum)
    xi = c * k_inc
    gamma = c * k_inc - claims
    times = np.arange(1, m + 1) / n
    xi_lv = np.concatenate([[xi[0]], np.maximum.accumulate(xi)])
    g_lv = np.concatenate([[0.0], np.cumsum(gamma)])
    levels = np.column_stack([xi_lv, g_lv, ksum])
    sizes = np.column_stack([np.diff(xi_lv), gamma, k_inc])
    path = CadlagPath(levels[0], times, sizes, None, m / n, (RUNNING_MAX, "", NONDECREASING), levels)

    t = np.linspace(0.0, horizon, 201)[1:] if t_grid is None else np.asarray(t_grid, dtype=float)
    inv = generalized_inverse(path, t, coord=2)
    if inv.truncated.any():
        raise CapacityError("kappa did not exceed the t-grid")
    tau = inv.time
    at_tau = evaluate(path, tau).reshape(-1, 3)
    idx = np.rint(tau * n).astype(int)
    claims_cum = np.concatenate([[0.0], np.cumsum(claims)])
    mu = c * t - claims_cum[idx]
    overshoot = c * (t - at_tau[:, 2])
    stopped_sum = at_tau[:, 1]
    return RiskRun(t, mu, overshoot, stopped_sum, overshoot + stopped_sum, np.abs(overshoot), at_tau[:, 0], path, tau,
                   {"n": n, "premium": c})


# transformed functionals ---------------------------------------------------------

TRANSFORMS = ("difference", "ratio_const", "ratio_time", "custom")


@dataclass(frozen=True)
class TransformedPath:
    """t -> f(t, zeta(t)) for a step triple zeta; continuous in t between jumps."""

    triple: CadlagPath
    fn: Callable[[NDArray, NDArray], NDArray]
    time_free: bool
    monotone_in_t: bool

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        x = evaluate(self.triple, ts)
        return self.fn(ts, x)

    def left(self, t):
        ts = np.asarray(t, dtype=float)
        return self.fn(ts, evaluate_left(self.triple, ts))

    def as_step_path(self) -> CadlagPath:
        if not self.time_free or self.triple.has_drift():
            raise PathContractError("transform depends on time; no step representation")
        tr = self.triple
        lv = self.fn(np.zeros(tr.n_jumps + 1), tr.levels)
        sizes = np.diff(lv)
        keep = sizes != 0
        levels = np.concatenate([[lv[0]], lv[1:][keep]])
        return CadlagPath([lv[0]], tr.jump_times[keep], sizes[keep].reshape(-1, 1), None, tr.horizon, ("",),
                          levels.reshape(-1, 1))

    def sup_over(self, T1: float, T2: float, refine: int = 0) -> float:
        """sup over [T1, T2]: values at T1, jump times, left limits at jumps and T2.

        Exact when the transform is monotone in t between jumps; ``refine``
        adds a uniform grid for general custom transforms.
        """
        if not 0 <= T1 < T2 <= self.triple.horizon:
            raise PathDomainError("need 0 <= T1 < T2 <= horizon")
        jt = self.triple.jump_times
        inner = jt[(jt > T1) & (jt <= T2)]
        pts = np.concatenate([[T1], inner, [T2]])
        vals = [np.max(self(pts)), np.max(self.left(np.concatenate([inner, [T2]])))]
        if refine or not (self.monotone_in_t or self.time_free):
            grid = np.linspace(T1, T2, max(refine, 1025))
            vals.append(np.max(self(grid)))
        return float(max(vals))


def transformed_path(triple: CadlagPath, f: str, a: float | None = None,
                     custom: Callable[[NDArray, NDArray], NDArray] | None = None) -> TransformedPath:
    """Pointwise transform of a (xi, gamma, kappa) path.

    difference: gamma - xi;  ratio_const: xi / (a + |gamma|);
    ratio_time: xi / (a*t + |gamma|) for t > 0;  custom: f(t, x) with x the
    three coordinates (last axis).
    """
    if triple.dim < 2:
        raise PathDomainError("transform needs at least the xi and gamma coordinates")
    if f in ("ratio_const", "ratio_time") and (a is None or a <= 0):
        raise PathDomainError("ratio transforms need a > 0")
    if f == "difference":
        return TransformedPath(triple, lambda t, x: x[..., 1] - x[..., 0], True, True)
    if f == "ratio_const":
        return TransformedPath(triple, lambda t, x: x[..., 0] / (a + np.abs(x[..., 1])), True, True)
    if f == "ratio_time":
        def ratio_time(t, x):
            if np.any(np.asarray(t) <= 0):
                raise PathDomainError("ratio_time is defined for t > 0")
            return x[..., 0] / (a * t + np.abs(x[..., 1]))
        return TransformedPath(triple, ratio_time, False, not triple.has_drift())
    if f == "custom":
        if custom is None:
            raise PathDomainError("custom transform needs a callable")
        return TransformedPath(triple, custom, False, False)
    raise PathDomainError(f"unknown transform {f!r}; choose from {TRANSFORMS}")


# alternative stopping ------------------------------------------------------------

@dataclass
class StoppingResult:
    scheme: str
    t: NDArray[np.float64]
    tau: NDArray[np.float64]
    truncated: NDArray[np.bool_]
    alternative: NDArray[np.float64] | None = None


def _first_passage(triple: CadlagPath, f: Callable, h0: float | None, t_grid: NDArray) -> StoppingResult:
    """sup{s : f(s, zeta_h0(s)) <= t}, for f nondecreasing in s on each constancy interval."""
    if triple.has_drift():
        raise PathContractError("first-passage stopping expects a pure step triple")
    lv = triple.levels.copy()
    if h0 is not None:
        lv[:, 0] = np.maximum(lv[:, 0], h0)
    starts = np.concatenate([[0.0], triple.jump_times])
    ends = np.concatenate([triple.jump_times, [triple.horizon]])
    g_start = np.array([f(s, x) for s, x in zip(starts, lv)], dtype=float)
    g_end = np.array([f(e, x) for e, x in zip(ends, lv)], dtype=float)
    tau = np.zeros(t_grid.shape[0])
    trunc = np.zeros(t_grid.shape[0], dtype=bool)
    for i, t in enumerate(t_grid):
        ok = np.flatnonzero(g_start <= t)
        if ok.size == 0:
            continue
        k = ok[-1]
        if k == len(starts) - 1 and g_end[k] <= t:
            tau[i], trunc[i] = triple.horizon, True
            continue
        if g_end[k] <= t:
            tau[i] = ends[k]
            continue
        lo, hi = starts[k], ends[k]
        while hi - lo > 1e-12 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if f(mid, lv[k]) <= t:
                lo = mid
            else:
                hi = mid
        tau[i] = lo
    return StoppingResult("first_passage", t_grid, tau, trunc)


def _extremal_jump(triple: CadlagPath, t_grid: NDArray, coord: int = 0) -> StoppingResult:
    """First s whose max-coordinate increment exceeds t; also the literal sup reading."""
    inc = triple.jump_sizes[:, coord]
    jt = triple.jump_times
    tau = np.full(t_grid.shape[0], triple.horizon)
    trunc = np.ones(t_grid.shape[0], dtype=bool)
    for i, t in enumerate(t_grid):
        hit = np.flatnonzero((inc > t) & (jt > 0))
        if hit.size:
            tau[i], trunc[i] = jt[hit[0]], False
    # sup{s : increment at s <= t}: every non-jump time qualifies, so it is the horizon
    literal = np.full(t_grid.shape[0], triple.horizon)
    return StoppingResult("extremal_jump", t_grid, tau, trunc, literal)


def alternative_stopping(triple: CadlagPath, scheme: str, t_grid, f: Callable | None = None,
                         h0: float | None = None) -> StoppingResult:
    t_grid = np.asarray(t_grid, dtype=float)
    if scheme == "first_passage":
        if f is None:
            raise PathDomainError("first_passage needs f(s, x)")
        return _first_passage(triple, f, h0, t_grid)
    if scheme == "extremal_jump":
        return _extremal_jump(triple, t_grid)
    raise PathDomainError(f"unknown scheme {scheme!r}")


def record_increment(path: CadlagPath, s: float, coord: int = 0) -> float:
    return float(jump_at(path, s)[coord])
