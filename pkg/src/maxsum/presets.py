"""Shipped model families paired with their limiting characteristics.

Each preset is a builder ``params -> (ArrayModel | None, LimitCharacteristics)``
plus a parameter schema with defaults.  Presets without a model are pure
limit-side test measures for the samplers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .limit_law import Atoms, JumpMeasure, LimitCharacteristics, Ray, TailFunction
from .triangular_array import (ArrayModel, LatentFamily, Marginal, RiskFamily, identical_family,
                               independent_family)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    defaults: dict
    build: Callable[[dict], tuple[ArrayModel | None, LimitCharacteristics]]

    def make(self, params: dict | None = None):
        merged = dict(self.defaults)
        unknown = set(params or {}) - set(self.defaults)
        if unknown:
            raise ValueError(f"preset {self.name!r} has no parameters {sorted(unknown)}")
        merged.update(params or {})
        return self.build(merged)


def _eps(p: dict) -> tuple[float, ...]:
    return tuple(float(e) for e in p.get("eps_grid", (1e-2, 1e-3, 1e-4)))


def _unit_kappa() -> Marginal:
    return Marginal("const", {"value": 1.0}, scale_exponent=1.0)


def _zero() -> Marginal:
    return Marginal("const", {"value": 0.0})


def _power_shift(alpha: float, weight: float = 1.0) -> float:
    """Shift a of a one-sided power Levy measure with no truncated-mean drift."""
    f = lambda s: s / (1 + s * s) * weight * alpha * s ** (-alpha - 1)
    return integrate.quad(f, 0, 1, epsabs=1e-14, epsrel=1e-12)[0] + integrate.quad(f, 1, np.inf, epsabs=1e-14,
                                                                                  epsrel=1e-12)[0]


def _pareto_scale(p):
    a = float(p["alpha"])
    xi = Marginal("pareto", {"alpha": a}, scale_exponent=1 / a)
    model = ArrayModel(independent_family(xi, _zero(), _unit_kappa()), _eps(p), name="pareto_scale")
    return model, LimitCharacteristics(TailFunction.frechet(a), c=1.0)


def _gumbel_scale(p):
    xi = Marginal("exponential", {"rate": 1.0}, log_shift=1.0)
    model = ArrayModel(independent_family(xi, _zero(), _unit_kappa()), _eps(p), name="gumbel_scale")
    return model, LimitCharacteristics(TailFunction.gumbel(), c=1.0)


def _example1(p):
    a = float(p["alpha"])
    x = Marginal("pareto", {"alpha": a}, scale_exponent=1 / a)
    fam = LatentFamily(x, x, x, (0, 0, 0), "renewal_self")
    ray = Ray("diag", "power", {"weight": 1.0, "alpha": a}, 0.0, np.inf, "identity")
    shift = _power_shift(a)
    chars = LimitCharacteristics(TailFunction.frechet(a), JumpMeasure(rays=(ray,)), a=shift, c=0.0)
    return ArrayModel(fam, _eps(p), name="example1"), chars


def _example2(p):
    claim_alpha = float(p["claim_alpha"])
    y_xi = Marginal("pareto", {"alpha": claim_alpha}, scale_exponent=1 / claim_alpha)
    y_sum = Marginal("pareto", {"alpha": claim_alpha}, scale_exponent=1.0)
    x = Marginal("exponential", {"rate": float(p["interarrival_rate"])}, scale_exponent=1.0)
    fam = LatentFamily(y_xi, y_sum, x, (0, 0, 1), "insurance_pair")
    mean_claim = claim_alpha / (claim_alpha - 1)
    chars = LimitCharacteristics(TailFunction.frechet(claim_alpha), a=mean_claim,
                                 c=1.0 / float(p["interarrival_rate"]))
    return ArrayModel(fam, _eps(p), name="example2"), chars


def _example3(p):
    alpha = float(p["magnitude_alpha"])
    y = Marginal("pareto", {"alpha": alpha}, scale_exponent=1 / alpha)
    z = Marginal("normal", {"mu": 0.0, "sigma": float(p["loss_sigma"])}, scale_exponent=0.5)
    x = Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0)
    fam = LatentFamily(y, z, x, (0, 1, 2), "earthquake_triple")
    chars = LimitCharacteristics(TailFunction.frechet(alpha), b2=float(p["loss_sigma"]) ** 2, c=1.0)
    return ArrayModel(fam, _eps(p), name="example3"), chars


def _risk(p):
    kappa = Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0)
    claim = Marginal("exponential", {"rate": float(p["claim_rate"])}, scale_exponent=1.0)
    prem = float(p["premium"])
    fam = RiskFamily(kappa, claim, prem)
    eps = _eps(p) if "eps_grid" in p else (1e-1, 1e-2)
    chars = LimitCharacteristics(TailFunction.zero_above(0.0), a=prem - 1.0 / float(p["claim_rate"]), c=1.0)
    return ArrayModel(fam, eps, name="risk"), chars


def _independent(p):
    lam = float(p["jump_rate"])
    xi = Marginal("pareto", {"alpha": 1.0}, scale_exponent=1.0)
    gamma = Marginal("rare", {"rate": lam, "value": 1.0})
    fam = independent_family(xi, gamma, _unit_kappa())
    jumps = JumpMeasure(Atoms.from_rows([(None, 1.0, 0.0, lam)]))
    return ArrayModel(fam, _eps(p), name="independent"), LimitCharacteristics(
        TailFunction.frechet(1.0), jumps, a=lam / 2, c=1.0)


def _identical(p):
    alpha = float(p["alpha"])
    y = Marginal("pareto", {"alpha": alpha}, scale_exponent=1 / alpha, center=True)
    fam = identical_family(y, _unit_kappa())
    ray = Ray("v", "power", {"weight": 1.0, "alpha": alpha}, 0.0, np.inf, "identity")
    f = lambda s: s ** 3 / (1 + s * s) * alpha * s ** (-alpha - 1)
    shift = -(integrate.quad(f, 0, 1, epsabs=1e-14, epsrel=1e-12)[0]
              + integrate.quad(f, 1, np.inf, epsabs=1e-14, epsrel=1e-12)[0])
    return ArrayModel(fam, _eps(p), name="identical"), LimitCharacteristics(
        TailFunction.frechet(alpha), JumpMeasure(rays=(ray,)), a=shift, c=1.0)


def _comonotone(p):
    rate = float(p["rate"])
    power = float(p["mark_power"])
    ray = Ray("v", "exponential", {"weight": 1.0, "rate": rate}, 0.0, np.inf, "power", {"scale": 1.0, "p": power})
    f = lambda s: s / (1 + s * s) * rate * np.exp(-rate * s)
    shift = integrate.quad(f, 0, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
    tail = TailFunction.custom(lambda u: np.exp(-rate * max(u, 0.0) ** (1 / power)) if u > 0 else 1.0,
                               u_pi=-np.inf)
    chars = LimitCharacteristics(tail, JumpMeasure(rays=(ray,)), a=shift, c=1.0)
    return None, chars


def _gaussian_domain(p):
    gamma = Marginal("normal", {"mu": 0.0, "sigma": 1.0}, scale_exponent=0.5)
    xi = Marginal("exponential", {"rate": 1.0}, log_shift=1.0)
    fam = independent_family(xi, gamma, _unit_kappa())
    return ArrayModel(fam, _eps(p), name="gaussian_domain"), LimitCharacteristics(
        TailFunction.gumbel(), b2=1.0, c=1.0)


def _deterministic(p):
    xi = Marginal("const", {"value": 0.0})
    one = Marginal("const", {"value": 1.0}, scale_exponent=1.0)
    fam = independent_family(xi, one, one)
    return ArrayModel(fam, _eps(p), name="deterministic"), LimitCharacteristics(
        TailFunction.zero_above(0.0), a=1.0, c=1.0)


def _compound(p):
    rows = [(None, 1.0, 1.0, 1.0), (None, -1.0, 1.0, 1.0)]
    return None, LimitCharacteristics.from_atoms(rows, a=float(p["a"]), b2=float(p["b2"]), c=float(p["c"]))


def _hybrid(p):
    rows = [(0.5, 0.5, 0.0, 1.0), (1.0, 1.0, 0.2, 0.8), (2.0, 2.0, 0.5, 0.4), (4.0, -1.0, 1.0, 0.2),
            (None, -0.5, 0.3, 1.0), (None, 0.8, 0.0, 0.5)]
    return None, LimitCharacteristics.from_atoms(rows, a=float(p["a"]), b2=float(p["b2"]), c=float(p["c"]),
                                                 floor=0.0)


def _split(p):
    rows = [(0.5, 0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 0.6), (2.5, 0.0, 0.0, 0.3),
            (None, 1.0, 0.5, 1.0), (None, -0.5, 0.0, 1.0), (None, 2.0, 1.0, 0.3)]
    return None, LimitCharacteristics.from_atoms(rows, a=float(p["a"]), b2=float(p["b2"]), c=float(p["c"]),
                                                 floor=0.0)


def _discrete_identical(p):
    rows = [(v, v, 0.0, m) for v, m in ((0.5, 1.0), (1.0, 0.7), (2.0, 0.4), (3.0, 0.1))]
    return None, LimitCharacteristics.from_atoms(rows, a=0.0, b2=0.0, c=1.0, floor=0.0)


_COMMON = {"eps_grid": [1e-2, 1e-3, 1e-4]}

PRESETS: dict[str, Preset] = {p.name: p for p in [
    Preset("pareto_scale", "Frechet domain: xi = Pareto(alpha) / n^(1/alpha), kappa = 1/n",
           {"alpha": 1.0, **_COMMON}, _pareto_scale),
    Preset("gumbel_scale", "Gumbel domain: xi = Exp(1) - log n, kappa = 1/n", dict(_COMMON), _gumbel_scale),
    Preset("example1", "renewal counting: xi = gamma = kappa = X, X Pareto(alpha) / n^(1/alpha)",
           {"alpha": 0.5, **_COMMON}, _example1),
    Preset("example2", "insurance pair: claims Y Pareto(claim_alpha) as max (/n^(1/alpha)) and sum (/n), "
                       "interarrivals Exp(interarrival_rate) / n",
           {"claim_alpha": 2.5, "interarrival_rate": 1.0, **_COMMON}, _example2),
    Preset("example3", "earthquake triple: magnitude Pareto, losses Normal / sqrt(n), interarrivals Exp / n",
           {"magnitude_alpha": 2.5, "loss_sigma": 1.0, **_COMMON}, _example3),
    Preset("risk", "risk reserve family: xi = premium * kappa, gamma = premium * kappa - claim",
           {"premium": 1.2, "claim_rate": 1.0, "eps_grid": [1e-1, 1e-2]}, _risk),
    Preset("independent", "independence: xi Pareto(1) / n, gamma = 1 with probability jump_rate / n",
           {"jump_rate": 1.0, **_COMMON}, _independent),
    Preset("identical", "identical components: xi = gamma = (Y - EY) / n^(1/alpha), Y Pareto(alpha)",
           {"alpha": 1.5, **_COMMON}, _identical),
    Preset("comonotone", "limit-only comonotone exponential jumps with power marks",
           {"rate": 1.0, "mark_power": 2.0}, _comonotone),
    Preset("gaussian_domain", "Gaussian sums: gamma = N(0,1) / sqrt(n), Gumbel max", dict(_COMMON), _gaussian_domain),
    Preset("deterministic", "xi = 0, gamma = kappa = 1/n", dict(_COMMON), _deterministic),
    Preset("compound", "limit-only compound Poisson atoms (+-1, 1) plus Gaussian part",
           {"a": 0.2, "b2": 0.5, "c": 0.3}, _compound),
    Preset("hybrid", "limit-only marked atoms for the joint hybrid sampler",
           {"a": 0.1, "b2": 0.25, "c": 0.5}, _hybrid),
    Preset("split", "limit-only atoms whose marks never carry a sum jump (independence structure)",
           {"a": 0.0, "b2": 0.3, "c": 0.5}, _split),
    Preset("discrete_identical", "limit-only atoms with mark equal to the gamma jump", {}, _discrete_identical),
]}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def list_presets() -> list[dict]:
    """Catalog entries; ``config`` is a minimal run configuration selecting the preset."""
    out = []
    for p in PRESETS.values():
        model, _ = p.make()
        out.append({"name": p.name, "description": p.description, "parameters": dict(p.defaults),
                    "families": model.family.to_dict() if model is not None else None,
                    "config": {"seed": 0, "model": {"preset": p.name, "params": dict(p.defaults)}}})
    return out
