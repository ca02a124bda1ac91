"""Limiting characteristics of the max-sum triple and the laws built from them.

Jump measures live on R x [0, inf) and carry an optional max-mark per jump:
an atom (u, v, w, mass) means that a sum jump (v, w) arrives together with
a max-candidate u.  Marks decide the exceedance split: the part of the
measure whose marks exceed a level u, and its complement.

Compensation is coordinate-wise, ``y*v/(1+v^2) + z*w/(1+w^2)``.  This is the
form that agrees with the constant relations for a, d and the exceedance
shifts a(u), d(u); it coincides with a joint ``/(1+v^2+w^2)`` compensator
for jumps on either axis.
"""
from __future__ import annotations

import contextlib
import contextvars
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-13
QUAD_LIMIT = 2 ** 16

# accepted absolute error when a target only feeds a Monte Carlo comparison; None means strict
_LOOSE_ABS: contextvars.ContextVar[float | None] = contextvars.ContextVar("loose_quadrature", default=None)


@contextlib.contextmanager
def loose_quadrature(abs_err: float):
    """Accept quadrature results with error estimate below ``abs_err`` despite QUADPACK warnings."""
    token = _LOOSE_ABS.set(abs_err)
    try:
        yield
    finally:
        _LOOSE_ABS.reset(token)
BISECT_TOL = 1e-12


class QuadratureError(ArithmeticError):
    pass


class CharacteristicsError(ValueError):
    """Characteristics are inconsistent or an argument is outside the admissible range."""


def _quad(fn: Callable[[float], float], lo: float, hi: float) -> float:
    if not lo < hi:
        return 0.0
    loose = _LOOSE_ABS.get()
    if loose is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fn, lo, hi, epsabs=0.1 * loose, epsrel=1e-6, limit=500)
        if not err <= loose:
            raise QuadratureError(f"quadrature on ({lo}, {hi}) error estimate {err:.3g} above {loose:.3g}")
        return val
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fn, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on ({lo}, {hi}) did not converge: {exc}") from exc
    if err > max(1e-8 * abs(val), 1e-11):
        raise QuadratureError(f"quadrature on ({lo}, {hi}) error estimate {err:.3g} for value {val:.6g}")
    return val


def _quad_split(fn, lo: float, hi: float, cuts: Sequence[float] = ()) -> float:
    pts = sorted({lo, hi, *[c for c in cuts if lo < c < hi]})
    return sum(_quad(fn, a, b) for a, b in zip(pts[:-1], pts[1:]))


# tail function ---------------------------------------------------------------

@dataclass(frozen=True)
class TailFunction:
    """pi_1: nonincreasing, right-continuous, infinite below u_pi and zero beyond v_pi.

    Kinds: ``frechet`` (weight*(u/scale)^-alpha for u > 0), ``gumbel``
    (weight*exp(-(u-loc)/scale)), ``negweibull`` (weight*(endpoint-u)^alpha
    below the endpoint), ``step`` (sum of masses of marks above u, above an
    optional floor) and ``custom`` (a callable, inverted by bisection).
    """

    kind: str
    params: dict = field(default_factory=dict)
    points: tuple[float, ...] = ()
    masses: tuple[float, ...] = ()
    floor: float = -np.inf
    fn: Callable | None = None

    @classmethod
    def frechet(cls, alpha: float, scale: float = 1.0, weight: float = 1.0) -> "TailFunction":
        return cls("frechet", {"alpha": alpha, "scale": scale, "weight": weight})

    @classmethod
    def gumbel(cls, loc: float = 0.0, scale: float = 1.0, weight: float = 1.0) -> "TailFunction":
        return cls("gumbel", {"loc": loc, "scale": scale, "weight": weight})

    @classmethod
    def negweibull(cls, alpha: float, endpoint: float = 0.0, weight: float = 1.0) -> "TailFunction":
        return cls("negweibull", {"alpha": alpha, "endpoint": endpoint, "weight": weight})

    @classmethod
    def step(cls, points: Sequence[float], masses: Sequence[float], floor: float = -np.inf) -> "TailFunction":
        pts = np.asarray(points, dtype=float)
        ms = np.asarray(masses, dtype=float)
        if pts.shape != ms.shape or np.any(ms <= 0):
            raise CharacteristicsError("step tail needs matching points and positive masses")
        order = np.argsort(pts)
        return cls("step", {}, tuple(pts[order]), tuple(ms[order]), float(floor))

    @classmethod
    def zero_above(cls, threshold: float) -> "TailFunction":
        return cls.step([], [], floor=threshold)

    @classmethod
    def custom(cls, fn: Callable, u_pi: float = -np.inf, v_pi: float = np.inf) -> "TailFunction":
        return cls("custom", {"u_pi": u_pi, "v_pi": v_pi}, fn=fn)

    def __call__(self, u: ArrayLike):
        u = np.asarray(u, dtype=float)
        p = self.params
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.kind == "frechet":
                out = np.where(u > 0, p["weight"] * (np.maximum(u, 0) / p["scale"]) ** (-p["alpha"]), np.inf)
            elif self.kind == "gumbel":
                out = p["weight"] * np.exp(-(u - p["loc"]) / p["scale"])
            elif self.kind == "negweibull":
                out = np.where(u < p["endpoint"], p["weight"] * np.maximum(p["endpoint"] - u, 0) ** p["alpha"], 0.0)
            elif self.kind == "step":
                pts = np.asarray(self.points)
                tail = np.concatenate([np.cumsum(np.asarray(self.masses)[::-1])[::-1], [0.0]])
                out = tail[np.searchsorted(pts, u, side="right")]
                out = np.where(u < self.floor, np.inf, out)
            elif self.kind == "custom":
                out = np.vectorize(self.fn, otypes=[float])(u)
            else:
                raise CharacteristicsError(f"unknown tail kind {self.kind!r}")
        out = np.where(u == np.inf, 0.0, out)
        out = np.where(u == -np.inf, np.inf, out)
        return float(out) if out.ndim == 0 else out

    @property
    def u_pi(self) -> float:
        if self.kind == "frechet":
            return 0.0
        if self.kind == "step":
            return self.floor
        if self.kind == "custom":
            return float(self.params["u_pi"])
        return -np.inf

    @property
    def v_pi(self) -> float:
        if self.kind == "negweibull":
            return float(self.params["endpoint"])
        if self.kind == "step":
            return max(self.points) if self.points else self.floor
        if self.kind == "custom":
            return float(self.params["v_pi"])
        return np.inf

    @property
    def discontinuities(self) -> tuple[float, ...]:
        if self.kind == "step":
            return self.points + ((self.floor,) if np.isfinite(self.floor) else ())
        return ()

    def inverse(self, y: ArrayLike) -> NDArray[np.float64]:
        """Smallest u with pi_1(u) <= y, for y > 0."""
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "frechet":
            return p["scale"] * (y / p["weight"]) ** (-1.0 / p["alpha"])
        if self.kind == "gumbel":
            return p["loc"] - p["scale"] * np.log(y / p["weight"])
        if self.kind == "negweibull":
            return p["endpoint"] - (y / p["weight"]) ** (1.0 / p["alpha"])
        if self.kind == "step":
            pts = np.asarray(self.points)
            tail = np.concatenate([np.cumsum(np.asarray(self.masses)[::-1])[::-1], [0.0]])
            # tail[k] is pi_1 on [pts[k-1], pts[k]); first k with tail[k] <= y
            k = np.searchsorted(-tail, -y, side="left")
            cand = np.where(k == 0, -np.inf, pts[np.clip(k - 1, 0, None)] if pts.size else -np.inf)
            return np.maximum(cand, self.floor)
        return bisect_inverse(self, y)


def bisect_inverse(tail: Callable, y: ArrayLike, lo: float = -1e6, hi: float = 1e6,
                   tol: float = BISECT_TOL) -> NDArray[np.float64]:
    """Vectorized monotone bisection for inf{u : tail(u) <= y}."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    a = np.full(y.shape, float(lo))
    b = np.full(y.shape, float(hi))
    if np.any(np.asarray(tail(b)) > y):
        raise QuadratureError("tail not inverted on the search bracket")
    while np.any(b - a > tol * np.maximum(1.0, np.abs(b))):
        mid = 0.5 * (a + b)
        above = np.asarray(tail(mid)) > y
        a = np.where(above, mid, a)
        b = np.where(above, b, mid)
    return b


# jump measures ---------------------------------------------------------------

@dataclass(frozen=True)
class Atoms:
    """Discrete jump measure; ``mark`` is NaN for jumps without a max-mark."""

    mark: NDArray[np.float64]
    v: NDArray[np.float64]
    w: NDArray[np.float64]
    mass: NDArray[np.float64]

    def __post_init__(self) -> None:
        arrs = [np.atleast_1d(np.asarray(x, dtype=float)).copy() for x in (self.mark, self.v, self.w, self.mass)]
        if len({a.shape for a in arrs}) != 1:
            raise CharacteristicsError("atom arrays must have equal length")
        mark, v, w, mass = arrs
        if np.any(w < 0):
            raise CharacteristicsError("w entries must be nonnegative")
        if np.any(mass <= 0):
            raise CharacteristicsError("atom masses must be positive")
        if np.any(np.isnan(mark) & (v == 0) & (w == 0)):
            raise CharacteristicsError("an unmarked atom at (0, 0) is a null jump")
        for name, a in zip(("mark", "v", "w", "mass"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple]) -> "Atoms":
        rows = list(rows)
        if not rows:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
        mark = [np.nan if r[0] is None else float(r[0]) for r in rows]
        return cls(np.array(mark), np.array([r[1] for r in rows], float), np.array([r[2] for r in rows], float),
                   np.array([r[3] for r in rows], float))

    def __len__(self) -> int:
        return self.mass.shape[0]

    def subset(self, keep: NDArray[np.bool_]) -> "Atoms":
        return Atoms(self.mark[keep], self.v[keep], self.w[keep], self.mass[keep])

    def to_csv(self) -> str:
        lines = ["u_mark_or_NONE,v,w,mass"]
        for m, v, w, q in zip(self.mark, self.v, self.w, self.mass):
            mm = "NONE" if np.isnan(m) else format(m, ".17g")
            lines.append(",".join([mm, format(v, ".17g"), format(w, ".17g"), format(q, ".17g")]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "Atoms":
        rows = []
        for ln in text.strip().splitlines()[1:]:
            m, v, w, q = ln.split(",")
            rows.append((None if m.strip() == "NONE" else float(m), float(v), float(w), float(q)))
        return cls.from_rows(rows)


@dataclass(frozen=True)
class Ray:
    """Absolutely continuous jumps along one axis on the interval (lo, hi).

    ``axis`` is ``v`` (jumps (s, 0)), ``w`` (jumps (0, s)) or ``diag``
    (jumps (s, s), the self-wired renewal case).

    ``density`` is ``power`` (weight*alpha*|s|^-(alpha+1)) or ``exponential``
    (weight*rate*exp(-rate*|s|)).  ``mark`` is None (no max-mark),
    ``identity`` (mark = s) or ``power`` (mark = scale * s**p on s > 0);
    marks are increasing in s so exceedance sets are half-lines.
    """

    axis: str
    density: str
    params: dict
    lo: float
    hi: float
    mark: str | None = None
    mark_params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.axis not in ("v", "w", "diag"):
            raise CharacteristicsError("axis must be 'v', 'w' or 'diag'")
        if self.axis in ("w", "diag") and self.lo < 0:
            raise CharacteristicsError("w jumps must be nonnegative")
        if not self.lo < self.hi or (self.lo < 0 < self.hi):
            raise CharacteristicsError("ray interval must be nonempty and on one side of 0")
        if self.mark == "power" and self.lo < 0:
            raise CharacteristicsError("power marks need a positive interval")

    def rho(self, s):
        s = np.abs(s)
        p = self.params
        if self.density == "power":
            return p["weight"] * p["alpha"] * s ** (-p["alpha"] - 1)
        if self.density == "exponential":
            return p["weight"] * p["rate"] * np.exp(-p["rate"] * s)
        raise CharacteristicsError(f"unknown density {self.density!r}")

    def mark_of(self, s):
        if self.mark == "identity":
            return s
        if self.mark == "power":
            return self.mark_params["scale"] * np.asarray(s) ** self.mark_params["p"]
        return np.full_like(np.asarray(s, dtype=float), np.nan)

    def mark_threshold(self, u: float) -> float:
        """s_u with mark(s) > u exactly when s > s_u."""
        if self.mark == "identity":
            return u
        if u <= 0:
            return -np.inf
        return (u / self.mark_params["scale"]) ** (1.0 / self.mark_params["p"])

    def cut(self, lo: float, hi: float) -> "Ray | None":
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        if not lo < hi:
            return None
        return Ray(self.axis, self.density, self.params, lo, hi, self.mark, self.mark_params)

    def integral(self, h: Callable, r: float = 0.0, cuts: Sequence[float] = ()) -> float:
        """int h(s) rho(s) ds over the ray, skipping jumps of norm <= r; ``cuts`` marks discontinuities of h."""
        lo, hi = self.lo, self.hi
        if self.axis == "diag":
            r = r / np.sqrt(2.0)
        if lo >= 0:
            lo = max(lo, r)
        else:
            hi = min(hi, -r)
        pts = sorted({c for c in (-1.0, 1.0, -r, r, *cuts) if lo < c < hi})
        return _quad_split(lambda s: h(s) * self.rho(s), lo, hi, pts)


@dataclass(frozen=True)
class JumpMeasure:
    atoms: Atoms = field(default_factory=lambda: Atoms.from_rows([]))
    rays: tuple[Ray, ...] = ()

    @property
    def is_discrete(self) -> bool:
        return not self.rays

    def total_mass(self) -> float:
        tot = float(self.atoms.mass.sum())
        for ray in self.rays:
            singular = ray.density == "power" and 0.0 in (ray.lo, ray.hi)
            tot += np.inf if singular else ray.integral(lambda s: 1.0)
        return tot

    def integrate(self, g: Callable, r: float = 0.0, cuts: Sequence[float] = ()) -> complex | float:
        """int g(v, w) over the measure; g must be vectorized and vanish at the origin.

        ``cuts`` lists ray coordinates where g jumps, so quadrature splits there.
        """
        at = self.atoms
        total = np.sum(g(at.v, at.w) * at.mass) if len(at) else 0.0
        for ray in self.rays:
            if ray.axis == "v":
                h = lambda s, ray=ray: g(np.asarray(s), np.zeros_like(np.asarray(s, dtype=float)))
            elif ray.axis == "diag":
                h = lambda s, ray=ray: g(np.asarray(s), np.asarray(s))
            else:
                h = lambda s, ray=ray: g(np.zeros_like(np.asarray(s, dtype=float)), np.asarray(s))
            probe = h(np.array(min(max(ray.lo, -1.0), ray.hi)))
            if np.iscomplexobj(probe):
                total = total + ray.integral(lambda s: float(np.real(h(s))), r, cuts) + 1j * ray.integral(
                    lambda s: float(np.imag(h(s))), r, cuts)
            else:
                total = total + ray.integral(lambda s: float(h(s)), r, cuts)
        return total

    def exceeding(self, u: float) -> "JumpMeasure":
        """The part whose max-marks exceed u."""
        at = self.atoms
        with np.errstate(invalid="ignore"):
            keep = ~np.isnan(at.mark) & (at.mark > u)
        rays = []
        for ray in self.rays:
            if ray.mark is None:
                continue
            cut = ray.cut(ray.mark_threshold(u), np.inf)
            if cut is not None:
                rays.append(cut)
        return JumpMeasure(at.subset(keep), tuple(rays))

    def not_exceeding(self, u: float) -> "JumpMeasure":
        at = self.atoms
        with np.errstate(invalid="ignore"):
            keep = np.isnan(at.mark) | (at.mark <= u)
        rays = []
        for ray in self.rays:
            if ray.mark is None:
                rays.append(ray)
                continue
            cut = ray.cut(-np.inf, ray.mark_threshold(u))
            if cut is not None:
                rays.append(cut)
        return JumpMeasure(at.subset(keep), tuple(rays))

    def mark_mass_above(self, u: float) -> float:
        """Mass of jumps whose mark exceeds u (the finite-activity pi_1)."""
        return float(np.real(self.exceeding(u).total_mass()))

    def location_mass(self, locations: Sequence[tuple[float, float]]) -> float:
        """Mass of the atoms sitting at the given (v, w) locations."""
        at = self.atoms
        hit = np.zeros(len(at), dtype=bool)
        for v, w in locations:
            hit |= (at.v == v) & (at.w == w)
        hit &= ~((at.v == 0) & (at.w == 0))
        return float(at.mass[hit].sum())


def _comp_v(s):
    return s / (1.0 + s * s)


def _exponent_integrand(y: float, z: float) -> Callable:
    def g(v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        ph = y * v + z * w
        re = -2.0 * np.sin(0.5 * ph) ** 2
        im = np.sin(ph) - (y * _comp_v(v) + z * _comp_v(w))
        return re + 1j * im
    return g


# characteristics -------------------------------------------------------------

@dataclass(frozen=True)
class LimitCharacteristics:
    tail: TailFunction
    jumps: JumpMeasure = field(default_factory=JumpMeasure)
    a: float = 0.0
    b2: float = 0.0
    c: float = 0.0

    def __post_init__(self) -> None:
        if self.b2 < 0 or self.c < 0:
            raise CharacteristicsError("b2 and c must be nonnegative")

    @cached_property
    def d(self) -> float:
        return self.c + float(np.real(self.jumps.integrate(lambda v, w: _comp_v(np.asarray(w, dtype=float)))))

    @property
    def u_pi(self) -> float:
        return self.tail.u_pi

    @property
    def v_pi(self) -> float:
        return self.tail.v_pi

    @classmethod
    def from_atoms(cls, rows: Sequence[tuple], a: float = 0.0, b2: float = 0.0, c: float = 0.0,
                   floor: float = -np.inf) -> "LimitCharacteristics":
        """Finite-activity characteristics whose pi_1 is the mark mass of the atoms above the floor."""
        atoms = Atoms.from_rows(rows)
        marked = ~np.isnan(atoms.mark) & (atoms.mark > floor)
        tail = TailFunction.step(atoms.mark[marked], atoms.mass[marked], floor=floor)
        return cls(tail, JumpMeasure(atoms), a, b2, c)


def pi1(chars: LimitCharacteristics, u):
    return chars.tail(u)


def extremal_fdd(chars: LimitCharacteristics, times: Sequence[float], levels: Sequence[float]) -> float:
    """P{xi_0(t_k) <= u_k for all k}; levels are first replaced by their running minimum from the right."""
    t = np.asarray(times, dtype=float)
    u = np.asarray(levels, dtype=float)
    if t.shape != u.shape or t.size == 0:
        raise CharacteristicsError("times and levels must be nonempty and of equal length")
    if t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise CharacteristicsError("times must be positive and strictly increasing")
    eff = np.minimum.accumulate(u[::-1])[::-1]
    rates = np.asarray(chars.tail(eff), dtype=float)
    if np.any(np.isinf(rates)):
        return 0.0
    dt = np.diff(np.concatenate([[0.0], t]))
    return float(np.exp(-np.sum(rates * dt)))


def transition_kernel(chars: LimitCharacteristics, v: float, u: float, t: float) -> float:
    if t < 0:
        raise CharacteristicsError("duration must be nonnegative")
    if v > u:
        return 0.0
    if t == 0:
        return 1.0
    rate = chars.tail(u)
    return 0.0 if np.isinf(rate) else float(np.exp(-t * rate))


def _exponent(a: float, b2: float, d: float, measure: JumpMeasure, y: float, z: float) -> complex:
    base = 1j * a * y - 0.5 * b2 * y * y + 1j * d * z
    if y == 0 and z == 0:
        return 0j
    return complex(base + measure.integrate(_exponent_integrand(y, z)))


def levy_exponent(chars: LimitCharacteristics, y: float, z: float) -> complex:
    return _exponent(chars.a, chars.b2, chars.d, chars.jumps, y, z)


def levy_charfn(chars: LimitCharacteristics, t: float, y: float, z: float) -> complex:
    if t < 0:
        raise CharacteristicsError("duration must be nonnegative")
    return complex(np.exp(t * levy_exponent(chars, y, z)))


@dataclass(frozen=True)
class ExceedanceDecomposition:
    u: float
    pi_u: JumpMeasure
    hat_pi_u: JumpMeasure
    a_u: float
    d_u: float


def _check_level(chars: LimitCharacteristics, u: float) -> None:
    upi = chars.u_pi
    if u < upi or (u == upi and np.isinf(chars.tail(upi))):
        raise CharacteristicsError(
            f"level {u} below the admissible range: need u > u_pi = {upi}, or u = u_pi with finite pi_1(u_pi)")


def exceedance_decomposition(chars: LimitCharacteristics, u: float) -> ExceedanceDecomposition:
    _check_level(chars, u)
    pi_u = chars.jumps.exceeding(u)
    hat = chars.jumps.not_exceeding(u)
    a_u = chars.a - float(np.real(pi_u.integrate(lambda v, w: _comp_v(np.asarray(v, dtype=float)))))
    d_u = chars.d - float(np.real(pi_u.integrate(lambda v, w: _comp_v(np.asarray(w, dtype=float)))))
    return ExceedanceDecomposition(u, pi_u, hat, a_u, d_u)


def conditional_exponent(chars: LimitCharacteristics, u: float, y: float, z: float) -> complex:
    dec = exceedance_decomposition(chars, u)
    return _exponent(dec.a_u, chars.b2, dec.d_u, dec.hat_pi_u, y, z)


def conditional_charfn(chars: LimitCharacteristics, u: float, t: float, y: float, z: float) -> complex:
    if t < 0:
        raise CharacteristicsError("duration must be nonnegative")
    upi = chars.u_pi
    if u < upi or (u == upi and np.isinf(chars.tail(upi))):
        return 1.0 + 0j
    return complex(np.exp(t * conditional_exponent(chars, u, y, z)))


def hybrid_kernel(chars: LimitCharacteristics, u_prev: float, u: float, t: float, y: float, z: float) -> complex:
    weight = transition_kernel(chars, u_prev, u, t)
    if weight == 0.0:
        return 0j
    return weight * conditional_charfn(chars, u, t, y, z)


@dataclass(frozen=True)
class SamplerParameters:
    gamma_drift: float
    kappa_drift: float
    b: float
    jumps: JumpMeasure


def sampler_parameters(chars: LimitCharacteristics) -> SamplerParameters:
    if not chars.jumps.is_discrete:
        raise CharacteristicsError("samplers need a discrete (finite-activity) jump measure")
    at = chars.jumps.atoms
    g_drift = chars.a - float(np.sum(_comp_v(at.v) * at.mass))
    k_drift = chars.d - float(np.sum(_comp_v(at.w) * at.mass))
    if k_drift < -1e-12:
        raise CharacteristicsError(f"recovered kappa drift {k_drift} is negative")
    return SamplerParameters(g_drift, max(k_drift, 0.0), float(np.sqrt(chars.b2)), chars.jumps)


def uncompensated_charfn(params: SamplerParameters, t: float, y: float, z: float) -> complex:
    """Characteristic function rebuilt from drifts plus the raw compound-Poisson integral."""
    at = params.jumps.atoms
    jump = np.sum((np.exp(1j * (y * at.v + z * at.w)) - 1.0) * at.mass)
    expo = 1j * params.gamma_drift * y + 1j * params.kappa_drift * z - 0.5 * params.b ** 2 * y * y + jump
    return complex(np.exp(t * expo))


# constant relations -----------------------------------------------------------

def _v_integral(measure: JumpMeasure, h: Callable[[NDArray], NDArray], cuts: Sequence[float] = ()) -> float:
    return float(np.real(measure.integrate(lambda v, w: h(np.asarray(v, dtype=float)), cuts=cuts)))


def _w_integral(measure: JumpMeasure, h: Callable[[NDArray], NDArray], cuts: Sequence[float] = ()) -> float:
    return float(np.real(measure.integrate(lambda v, w: h(np.asarray(w, dtype=float)), cuts=cuts)))


def _in_band(s, lo, hi):
    return np.where((np.abs(s) > lo) & (np.abs(s) < hi), 1.0, 0.0)


def a_of_v(chars: LimitCharacteristics, v: float, measure: JumpMeasure | None = None, a: float | None = None) -> float:
    """Truncated-mean constant a(v) recovered from a and the sum-jump marginal."""
    m = chars.jumps if measure is None else measure
    a = chars.a if a is None else a
    if np.any(np.abs(m.atoms.v) == v):
        raise CharacteristicsError(f"v = {v} carries an atom of the sum-jump marginal; pick a continuity point")
    inner = _v_integral(m, lambda s: np.where(np.abs(s) < v, s ** 3 / (1 + s * s), 0.0), (-v, v))
    outer = _v_integral(m, lambda s: np.where(np.abs(s) > v, s / (1 + s * s), 0.0), (-v, v))
    return a + inner - outer


def c_of_w(chars: LimitCharacteristics, w: float) -> float:
    return chars.c + _w_integral(chars.jumps, lambda s: np.where((s > 0) & (s < w), s, 0.0), (w,))


def a_u_direct(chars: LimitCharacteristics, u: float) -> float:
    return exceedance_decomposition(chars, u).a_u


def a_u_chain(chars: LimitCharacteristics, u: float, v: float) -> float:
    """a(u) through the truncated-mean route: a(v), then the exceedance correction at level v,
    then the constant relation against the complement measure."""
    dec = exceedance_decomposition(chars, u)
    a_v = a_of_v(chars, v)
    a_u_v = a_v - _v_integral(dec.pi_u, lambda s: np.where(np.abs(s) <= v, s, 0.0), (-v, v))
    inner = _v_integral(dec.hat_pi_u, lambda s: np.where(np.abs(s) < v, s ** 3 / (1 + s * s), 0.0), (-v, v))
    outer = _v_integral(dec.hat_pi_u, lambda s: np.where(np.abs(s) > v, s / (1 + s * s), 0.0), (-v, v))
    return a_u_v - inner + outer


def measure_bound_violation(chars: LimitCharacteristics, u1: float, u2: float,
                            locations: Sequence[tuple[float, float]]) -> float:
    """Positive part of Pi^(u1)(A) - Pi^(u2)(A) - min(pi_1(u1) - pi_1(u2), Pi(A)) for u1 <= u2."""
    if u1 > u2:
        raise CharacteristicsError("need u1 <= u2")
    lhs = chars.jumps.exceeding(u1).location_mass(locations) - chars.jumps.exceeding(u2).location_mass(locations)
    p1, p2 = chars.tail(u1), chars.tail(u2)
    gap = np.inf if np.isinf(p1) else p1 - p2
    rhs = min(gap, chars.jumps.location_mass(locations))
    return max(0.0, lhs - rhs)
