"""I.i.d. triple laws at scale epsilon and the prelimit max/sum/renewal paths.

Every family draws a latent uniform vector and pushes it through explicit
component maps, so dependence between xi, gamma and kappa is always
constructive: two components wired to the same latent coordinate are
comonotone, components on different coordinates are independent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .cadlag_core import (NONDECREASING, RUNNING_MAX, CadlagPath, PathContractError, generalized_inverse)

MEMORY_BUDGET = 10_000_000
REJECTION_FLOOR = 1e-3


class CapacityError(RuntimeError):
    """A build would exceed the memory budget or a retry cap."""


class RejectionBudgetError(RuntimeError):
    """Conditional sampling acceptance fell below the configured floor."""


def child_rng(root: int, *keys: int) -> np.random.Generator:
    """Generator for replicate ``keys`` under ``root``.

    The splitting rule is ``SeedSequence(entropy=root, spawn_key=keys)``;
    any implementation with numpy's SeedSequence and PCG64 reproduces it.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(root, spawn_key=tuple(int(k) for k in keys))))


# marginal laws ---------------------------------------------------------------

_LAWS = {
    "pareto": ("alpha", "xm"),
    "exponential": ("rate",),
    "uniform": ("lo", "hi"),
    "normal": ("mu", "sigma"),
    "const": ("value",),
    "rare": ("rate", "value"),
}


@dataclass(frozen=True)
class Marginal:
    """Raw law followed by the normalization ``(raw - shift) / n**scale_exponent - log_shift*log(n)``.

    ``center`` sets the shift to the raw mean.  The ``rare`` law puts mass
    rate/n on ``value`` and the rest on 0, so its normalization is built in.
    """

    law: str
    params: dict = field(default_factory=dict)
    scale_exponent: float = 0.0
    center: bool = False
    multiplier: float = 1.0
    log_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.law not in _LAWS:
            raise ValueError(f"unknown law {self.law!r}; choose from {sorted(_LAWS)}")
        missing = [p for p in _LAWS[self.law] if p not in self.params and not (self.law == "pareto" and p == "xm")]
        if missing:
            raise ValueError(f"law {self.law!r} needs parameters {missing}")
        if self.law == "pareto" and self.params["alpha"] <= 0:
            raise ValueError("pareto alpha must be positive")
        if self.center and not np.isfinite(self.raw_mean()):
            raise ValueError("cannot center a law without a finite mean")

    def _p(self, key: str, default: float | None = None) -> float:
        return float(self.params.get(key, default))

    def raw_mean(self) -> float:
        law = self.law
        if law == "pareto":
            a, xm = self._p("alpha"), self._p("xm", 1.0)
            return a * xm / (a - 1) if a > 1 else np.inf
        if law == "exponential":
            return 1.0 / self._p("rate")
        if law == "uniform":
            return 0.5 * (self._p("lo") + self._p("hi"))
        if law == "normal":
            return self._p("mu")
        if law == "const":
            return self._p("value")
        return 0.0

    def raw_ppf(self, u: NDArray[np.float64], n: int) -> NDArray[np.float64]:
        law = self.law
        if law == "pareto":
            return self._p("xm", 1.0) * (1.0 - u) ** (-1.0 / self._p("alpha"))
        if law == "exponential":
            return -np.log1p(-u) / self._p("rate")
        if law == "uniform":
            lo, hi = self._p("lo"), self._p("hi")
            return lo + (hi - lo) * u
        if law == "normal":
            return stats.norm.ppf(u, loc=self._p("mu"), scale=self._p("sigma"))
        if law == "const":
            return np.full_like(u, self._p("value"), dtype=float)
        p = min(1.0, self._p("rate") / n)
        return np.where(u > 1.0 - p, self._p("value"), 0.0)

    def raw_sf(self, x: NDArray[np.float64], n: int) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        law = self.law
        if law == "pareto":
            a, xm = self._p("alpha"), self._p("xm", 1.0)
            return np.where(x < xm, 1.0, (np.maximum(x, xm) / xm) ** (-a))
        if law == "exponential":
            return np.where(x < 0, 1.0, np.exp(-self._p("rate") * np.maximum(x, 0)))
        if law == "uniform":
            lo, hi = self._p("lo"), self._p("hi")
            return np.clip((hi - x) / (hi - lo), 0.0, 1.0)
        if law == "normal":
            return stats.norm.sf(x, loc=self._p("mu"), scale=self._p("sigma"))
        if law == "const":
            return (x < self._p("value")).astype(float)
        p = min(1.0, self._p("rate") / n)
        v = self._p("value")
        return np.where(x < min(0.0, v), 1.0, np.where(x < max(0.0, v), p if v > 0 else 1 - p, 0.0))

    def _scale(self, n: int) -> tuple[float, float, float]:
        shift = self.raw_mean() if self.center else 0.0
        div = float(n) ** self.scale_exponent
        return shift, div, self.log_shift * np.log(n)

    def transform(self, u: NDArray[np.float64], n: int) -> NDArray[np.float64]:
        shift, div, off = self._scale(n)
        return self.multiplier * (self.raw_ppf(u, n) - shift) / div - off

    def sf(self, x: NDArray[np.float64], n: int) -> NDArray[np.float64]:
        """P{normalized value > x} (requires a positive multiplier)."""
        if self.multiplier <= 0:
            raise ValueError("survival function needs a positive multiplier")
        shift, div, off = self._scale(n)
        raw = (np.asarray(x, dtype=float) + off) * div / self.multiplier + shift
        return self.raw_sf(raw, n)

    def to_dict(self) -> dict:
        return {"law": self.law, "params": dict(self.params), "scale_exponent": self.scale_exponent,
                "center": self.center, "multiplier": self.multiplier, "log_shift": self.log_shift}

    @classmethod
    def from_dict(cls, d: dict) -> "Marginal":
        return cls(d["law"], dict(d.get("params", {})), float(d.get("scale_exponent", 0.0)),
                   bool(d.get("center", False)), float(d.get("multiplier", 1.0)), float(d.get("log_shift", 0.0)))


# families --------------------------------------------------------------------

@dataclass(frozen=True)
class TripleSample:
    """A batch of i.i.d. draws of (xi, gamma, kappa) stored as parallel arrays."""

    xi: NDArray[np.float64]
    gamma: NDArray[np.float64]
    kappa: NDArray[np.float64]

    def __post_init__(self) -> None:
        if np.any(self.kappa < 0):
            raise PathContractError("kappa draws must be nonnegative")

    def __len__(self) -> int:
        return self.xi.shape[0]

    def __getitem__(self, idx) -> "TripleSample":
        return TripleSample(self.xi[idx], self.gamma[idx], self.kappa[idx])


@dataclass(frozen=True)
class LatentFamily:
    """Components pushed forward from latent uniforms; ``wiring[i]`` names the latent coordinate."""

    xi: Marginal
    gamma: Marginal
    kappa: Marginal
    wiring: tuple[int, int, int] = (0, 1, 2)
    kind: str = "latent"

    @property
    def latent_dim(self) -> int:
        return max(self.wiring) + 1

    def transform(self, u: NDArray[np.float64], n: int) -> TripleSample:
        a, b, c = self.wiring
        return TripleSample(self.xi.transform(u[:, a], n), self.gamma.transform(u[:, b], n),
                            self.kappa.transform(u[:, c], n))

    def xi_tail(self, n: int, u) -> NDArray[np.float64]:
        return self.xi.sf(u, n)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "xi": self.xi.to_dict(), "gamma": self.gamma.to_dict(),
                "kappa": self.kappa.to_dict(), "wiring": list(self.wiring)}


@dataclass(frozen=True)
class RiskFamily:
    """(xi, gamma, kappa) = (c*kappa, c*kappa - beta, kappa) with independent claims beta."""

    kappa: Marginal
    claim: Marginal
    premium: float
    kind: str = "risk"

    def __post_init__(self) -> None:
        if self.premium < 0:
            raise ValueError("premium rate must be nonnegative")

    latent_dim = 2

    def transform(self, u: NDArray[np.float64], n: int) -> TripleSample:
        k = self.kappa.transform(u[:, 0], n)
        beta = self.claim.transform(u[:, 1], n)
        return TripleSample(self.premium * k, self.premium * k - beta, k)

    def xi_tail(self, n: int, u) -> NDArray[np.float64]:
        if self.premium == 0:
            return (np.asarray(u, dtype=float) < 0).astype(float)
        return self.kappa.sf(np.asarray(u, dtype=float) / self.premium, n)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "kappa": self.kappa.to_dict(), "claim": self.claim.to_dict(),
                "premium": self.premium}


def independent_family(xi: Marginal, gamma: Marginal, kappa: Marginal) -> LatentFamily:
    return LatentFamily(xi, gamma, kappa, (0, 1, 2), "independent")


def identical_family(gamma: Marginal, kappa: Marginal) -> LatentFamily:
    return LatentFamily(gamma, gamma, kappa, (0, 0, 1), "identical")


def comonotone_family(xi: Marginal, gamma: Marginal, kappa: Marginal) -> LatentFamily:
    return LatentFamily(xi, gamma, kappa, (0, 0, 1), "comonotone")


def family_from_dict(d: dict):
    kind = d.get("kind", "latent")
    if kind == "risk":
        return RiskFamily(Marginal.from_dict(d["kappa"]), Marginal.from_dict(d["claim"]), float(d["premium"]))
    wiring = {"independent": (0, 1, 2), "identical": (0, 0, 1), "comonotone": (0, 0, 1)}.get(kind)
    wiring = tuple(d.get("wiring", wiring or (0, 1, 2)))
    xi = Marginal.from_dict(d["xi"] if "xi" in d else d["gamma"])
    return LatentFamily(xi, Marginal.from_dict(d["gamma"]), Marginal.from_dict(d["kappa"]), wiring, kind)


def _n_of_eps(eps: float) -> int:
    return int(round(1.0 / eps))


@dataclass(frozen=True)
class ArrayModel:
    family: LatentFamily | RiskFamily
    eps_grid: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    n_of_epsilon: Callable[[float], int] = _n_of_eps
    name: str = ""

    def __post_init__(self) -> None:
        ns = [self.n_of_epsilon(e) for e in sorted(self.eps_grid)]
        if any(n <= 0 for n in ns) or any(a < b for a, b in zip(ns, ns[1:])):
            raise ValueError("n_of_epsilon must be positive and nonincreasing in epsilon")

    def n(self, eps: float) -> int:
        if not any(np.isclose(eps, e, rtol=1e-12, atol=0) for e in self.eps_grid):
            raise ValueError(f"epsilon {eps} is not on the supported grid {self.eps_grid}")
        return self.n_of_epsilon(eps)

    def xi_tail(self, eps: float, u) -> NDArray[np.float64]:
        return self.family.xi_tail(self.n(eps), u)


def sample_triples(model: ArrayModel, epsilon: float, count: int, rng: np.random.Generator) -> TripleSample:
    if count < 1:
        raise ValueError("count must be at least 1")
    n = model.n(epsilon)
    u = rng.random((count, model.family.latent_dim))
    return model.family.transform(u, n)


def triples_to_csv(tr: TripleSample) -> str:
    """Sample dump with columns k, xi, gamma, kappa (k starts at 1)."""
    lines = ["k,xi,gamma,kappa"]
    for k, row in enumerate(zip(tr.xi, tr.gamma, tr.kappa), start=1):
        lines.append(",".join([str(k)] + [format(float(v), ".17g") for v in row]))
    return "\n".join(lines) + "\n"


def triples_from_csv(text: str) -> TripleSample:
    rows = [ln.split(",") for ln in text.strip().splitlines()[1:]]
    arr = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(rows), 3)
    return TripleSample(arr[:, 0], arr[:, 1], arr[:, 2])


# prelimit paths --------------------------------------------------------------

def prelimit_from_triples(tr: TripleSample, n: int, horizon: float | None = None) -> CadlagPath:
    """Path of (running max, sum, positive sum) with jumps at k/n.

    The max coordinate equals xi_1 on [0, 1/n) (the ``1 v tn`` convention);
    its levels are stored as the exact running maximum.
    """
    m = len(tr)
    times = np.arange(1, m + 1) / n
    horizon = m / n if horizon is None else horizon
    runmax = np.maximum.accumulate(tr.xi)
    xi_levels = np.concatenate([[tr.xi[0]], runmax])
    levels = np.column_stack([xi_levels, np.concatenate([[0.0], np.cumsum(tr.gamma)]),
                              np.concatenate([[0.0], np.cumsum(tr.kappa)])])
    sizes = np.column_stack([np.diff(xi_levels), tr.gamma, tr.kappa])
    return CadlagPath(levels[0], times, sizes, None, horizon, (RUNNING_MAX, "", NONDECREASING), levels)


def build_prelimit(model: ArrayModel, epsilon: float, horizon: float, rng: np.random.Generator,
                   budget: int = MEMORY_BUDGET) -> CadlagPath:
    n = model.n(epsilon)
    count = int(np.floor(horizon * n + 1e-9))
    if count > budget:
        raise CapacityError(f"{count} jumps exceed the budget of {budget}")
    if count < 1:
        raise ValueError("horizon shorter than one step 1/n")
    return prelimit_from_triples(sample_triples(model, epsilon, count, rng), n, horizon)


def build_until(model: ArrayModel, epsilon: float, level: float, rng: np.random.Generator,
                horizon: float = 1.0, budget: int = MEMORY_BUDGET) -> CadlagPath:
    """Prelimit path extended in chunks until the kappa coordinate exceeds ``level``."""
    n = model.n(epsilon)
    chunk = max(1, int(np.floor(horizon * n + 1e-9)))
    parts: list[TripleSample] = []
    total_k, drawn = 0.0, 0
    while total_k <= level:
        if drawn + chunk > budget:
            raise CapacityError(f"kappa did not exceed {level} within {budget} draws")
        tr = sample_triples(model, epsilon, chunk, rng)
        parts.append(tr)
        drawn += chunk
        total_k = float(np.concatenate([p.kappa for p in parts]).sum())
    tr = TripleSample(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("xi", "gamma", "kappa")))
    return prelimit_from_triples(tr, n)


def build_stopping(prelimit: CadlagPath, t_max: float, coord: int = 2) -> CadlagPath:
    """The renewal stopping path t -> sup{s : kappa(s) <= t} on [0, t_max].

    If kappa never exceeds some level up to t_max the path is flat at the
    prelimit horizon from there on and ``meta['truncated_from']`` records
    the first such level.  An initial kappa value above 0 records
    ``meta['empty_below']``.
    """
    k = prelimit.coordinate(coord)
    if k.flags[0] not in (NONDECREASING, RUNNING_MAX):
        raise PathContractError("stopping needs a nondecreasing coordinate")
    slope = float(k.drift[0])
    meta: dict = {}
    if slope > 0:
        if k.n_jumps:
            raise PathContractError("inverse of a drift-plus-jump path is not a step-plus-drift path; "
                                    "use generalized_inverse pointwise")
        start = float(k.initial_value[0])
        if start > 0:
            meta["empty_below"] = start
        if start + slope * k.horizon <= t_max:
            meta["truncated_from"] = start + slope * k.horizon
        init = max(0.0, -start / slope)
        return CadlagPath([init], [], np.zeros((0, 1)), [1.0 / slope], t_max, (NONDECREASING,), meta=meta)
    lv = k.levels[1:, 0]
    bps = np.unique(lv[(lv > 0) & (lv <= t_max)])
    grid = np.concatenate([[0.0], bps])
    res = generalized_inverse(k, grid)
    if res.empty.any():
        meta["empty_below"] = float(k.initial_value[0])
    if res.truncated.any():
        meta["truncated_from"] = float(grid[np.argmax(res.truncated)])
    vals = res.time
    sizes = np.diff(vals)
    keep = sizes != 0
    levels = np.concatenate([[vals[0]], vals[1:][keep]])
    return CadlagPath([vals[0]], bps[keep], sizes[keep].reshape(-1, 1), None, t_max, (NONDECREASING,),
                      levels.reshape(-1, 1), meta)


def truncate_max(prelimit: CadlagPath, h: float, coord: int = 0) -> CadlagPath:
    if prelimit.flags[coord] != RUNNING_MAX:
        raise PathContractError(f"coordinate {coord} is not a running-max coordinate")
    levels = prelimit.levels.copy()
    levels[:, coord] = np.maximum(levels[:, coord], h)
    sizes = prelimit.jump_sizes.copy()
    sizes[:, coord] = np.diff(levels[:, coord])
    return CadlagPath(levels[0], prelimit.jump_times, sizes, prelimit.drift, prelimit.horizon,
                      prelimit.flags, levels, dict(prelimit.meta))


@dataclass(frozen=True)
class ConditionalDraw:
    sample: TripleSample
    acceptance_rate: float


def sample_conditional_triples(model: ArrayModel, epsilon: float, u: float, count: int,
                               rng: np.random.Generator, floor: float = REJECTION_FLOOR) -> ConditionalDraw:
    """Draws from the law of (xi, gamma, kappa) given xi <= u, by rejection."""
    got: list[TripleSample] = []
    have, tried, accepted = 0, 0, 0
    batch = max(count, 1024)
    while have < count:
        tr = sample_triples(model, epsilon, batch, rng)
        ok = tr.xi <= u
        tried += batch
        accepted += int(ok.sum())
        if accepted / tried < floor:
            raise RejectionBudgetError(
                f"acceptance rate {accepted / tried:.2e} below floor {floor:g}; try a larger level u")
        got.append(tr[ok])
        have += int(ok.sum())
    tr = TripleSample(*(np.concatenate([getattr(p, f) for p in got])[:count] for f in ("xi", "gamma", "kappa")))
    return ConditionalDraw(tr, accepted / tried)
