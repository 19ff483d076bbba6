"""Source laws F on (0, inf) with the analytic handles the s.b.p. formulas use.

A model bundles density, cdf, quantile, Laplace transform phi with its
derivative and inverse, the mean, optionally the density of k-fold sums,
and a sampler. Models are frozen dataclasses and safe to share.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import CapabilityError, ConvergenceError, DomainError, SpecParseError

_MAX_BRACKET_DOUBLINGS = 2000


class DistributionModel:
    """Interface shared by all source laws.

    Subclasses supply ``laplace`` and ``laplace_deriv``; everything else has
    a generic fallback (numeric inversion, quantile-transform sampling,
    quadrature of the density).
    """

    name: str = "model"
    has_density: bool = True

    # -- analytic handles -------------------------------------------------
    def density(self, x):
        raise CapabilityError(f"{self.name}: no density")

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def laplace(self, y):
        raise NotImplementedError

    def laplace_deriv(self, y):
        raise NotImplementedError

    def laplace_inv(self, u):
        return laplace_inv_numeric(self, u)

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def convolution_density(self, k: int, s):
        raise CapabilityError(f"{self.name}: no closed-form density of {k}-fold sums")

    @property
    def tail_power(self) -> Optional[tuple]:
        """``(a, lam)`` with F(x) ~ lam^a x^a / Gamma(a+1) near 0, if known."""
        return None

    def tilted_moment(self, y: float, p: float = 0.0) -> float:
        """int x^p e^{-xy} F(dx)."""
        if not self.has_density:
            raise CapabilityError(f"{self.name}: no density to integrate")
        val, _ = integrate.quad(
            lambda x: x**p * math.exp(-x * y) * self.density(x), 0.0, np.inf,
            epsabs=1e-13, epsrel=1e-11, limit=200,
        )
        return val

    def tilted_cdf(self, x: float, y: float) -> float:
        """int_0^x e^{-ty} F(dt)."""
        if not self.has_density:
            raise CapabilityError(f"{self.name}: no density to integrate")
        if x <= 0:
            return 0.0
        val, _ = integrate.quad(
            lambda t: math.exp(-t * y) * self.density(t), 0.0, x,
            epsabs=1e-13, epsrel=1e-11, limit=200,
        )
        return val

    # -- sampling ---------------------------------------------------------
    def sample(self, rng: np.random.Generator, size):
        return np.asarray(self.quantile(rng.random(size)), dtype=float)


@dataclass(frozen=True)
class GammaModel(DistributionModel):
    """gamma(shape, rate): density rate^a x^{a-1} e^{-rate x} / Gamma(a)."""

    shape: float
    rate: float = 1.0
    fast_sampler: bool = True
    name: str = field(default="gamma", compare=False)

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"gamma parameters must be positive, got a={self.shape}, rate={self.rate}")
        object.__setattr__(self, "name", f"gamma:a={self.shape:g},rate={self.rate:g}")

    def density(self, x):
        return stats.gamma.pdf(x, self.shape, scale=1.0 / self.rate)

    def logpdf(self, x):
        return stats.gamma.logpdf(x, self.shape, scale=1.0 / self.rate)

    def cdf(self, x):
        return special.gammainc(self.shape, self.rate * np.asarray(x, dtype=float))

    def quantile(self, p):
        return special.gammaincinv(self.shape, np.asarray(p, dtype=float)) / self.rate

    def laplace(self, y):
        y = np.asarray(y, dtype=float)
        return (self.rate / (self.rate + y)) ** self.shape

    def laplace_deriv(self, y):
        y = np.asarray(y, dtype=float)
        return -self.shape * self.rate**self.shape * (self.rate + y) ** (-self.shape - 1.0)

    def laplace_inv(self, u):
        u = _check_unit(u)
        return self.rate * (u ** (-1.0 / self.shape) - 1.0)

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def convolution_density(self, k: int, s):
        if k < 1:
            raise DomainError(f"convolution order must be >= 1, got {k}")
        return stats.gamma.pdf(s, k * self.shape, scale=1.0 / self.rate)

    def log_convolution_density(self, k: int, s):
        return stats.gamma.logpdf(s, k * self.shape, scale=1.0 / self.rate)

    @property
    def tail_power(self):
        return (self.shape, self.rate)

    def tilted_moment(self, y, p=0.0):
        a, lam = self.shape, self.rate
        return math.exp(
            a * math.log(lam) + special.gammaln(a + p) - special.gammaln(a) - (a + p) * math.log(lam + y)
        )

    def tilted_cdf(self, x, y):
        # e^{-ty} F(dt) is (lam/(lam+y))^a times the gamma(a, lam+y) law
        return float(self.laplace(y) * special.gammainc(self.shape, (self.rate + y) * max(x, 0.0)))

    def sample(self, rng, size):
        if self.fast_sampler:
            return rng.gamma(self.shape, 1.0 / self.rate, size)
        return super().sample(rng, size)


@dataclass(frozen=True)
class DiscreteModel(DistributionModel):
    """Finitely many positive atoms with probabilities summing to one."""

    values: tuple
    weights: tuple
    name: str = field(default="discrete", compare=False)
    has_density = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.ndim != 1 or v.shape != w.shape or v.size == 0:
            raise DomainError("atoms need matching, non-empty value and weight lists")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise DomainError("atom values must be strictly positive")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError(f"weights must be nonnegative and sum to 1, got sum {w.sum()!r}")
        order = np.argsort(v, kind="stable")
        object.__setattr__(self, "values", tuple(float(t) for t in v[order]))
        object.__setattr__(self, "weights", tuple(float(t) for t in w[order]))
        atoms = ",".join(f"{a:g}@{b:g}" for a, b in zip(self.values, self.weights))
        object.__setattr__(self, "name", f"discrete:{atoms}")

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]):
        vals, wts = zip(*atoms)
        return cls(tuple(vals), tuple(wts))

    @property
    def _v(self):
        return np.asarray(self.values)

    @property
    def _w(self):
        return np.asarray(self.weights)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cw = np.cumsum(self._w)
        idx = np.searchsorted(self._v, x, side="right")
        out = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)
        return np.minimum(out, 1.0)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        cw = np.cumsum(self._w)
        cw[-1] = 1.0
        idx = np.searchsorted(cw, p, side="left")
        return self._v[np.minimum(idx, len(cw) - 1)]

    def laplace(self, y):
        y = np.asarray(y, dtype=float)
        return np.sum(self._w * np.exp(-np.multiply.outer(y, self._v)), axis=-1)

    def laplace_deriv(self, y):
        y = np.asarray(y, dtype=float)
        return -np.sum(self._w * self._v * np.exp(-np.multiply.outer(y, self._v)), axis=-1)

    @property
    def mean(self) -> float:
        return float(np.dot(self._v, self._w))

    def tilted_moment(self, y, p=0.0):
        return float(np.sum(self._w * self._v**p * np.exp(-y * self._v)))

    def tilted_cdf(self, x, y):
        keep = self._v <= x
        return float(np.sum(self._w[keep] * np.exp(-y * self._v[keep])))


def _check_unit(u):
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0)) or np.any(arr > 1):
        raise DomainError(f"u must lie in (0, 1], got {u!r}")
    return arr


def laplace_inv_numeric(model: DistributionModel, u: float) -> float:
    """Invert the Laplace transform: the y >= 0 with phi(y) = u.

    Brackets the root by doubling the upper end, then refines with Brent's
    method on phi(y)/u - 1 so the stopping rule is relative in u.
    """
    u = float(_check_unit(u))
    if u == 1.0:
        return 0.0

    def g(y):
        return float(model.laplace(y)) / u - 1.0

    hi = 1.0
    for _ in range(_MAX_BRACKET_DOUBLINGS):
        if g(hi) < 0:
            break
        hi *= 2.0
        if not math.isfinite(hi):
            break
    else:
        raise ConvergenceError(f"could not bracket phi^-1({u}) for {model.name}")
    if not g(hi) < 0:
        raise ConvergenceError(f"could not bracket phi^-1({u}) for {model.name}")
    lo = 0.0 if hi == 1.0 else hi / 2.0
    try:
        root = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"phi^-1({u}) did not converge for {model.name}: {exc}") from exc
    return root


def sample_iid(model: DistributionModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws from ``model``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return np.asarray(model.sample(rng, n), dtype=float)


# -- model specification strings -------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"


def parse_model(spec: str) -> DistributionModel:
    """Build a model from ``gamma:a=2,rate=1`` or ``discrete:1@0.5,2@0.5``."""
    if ":" not in spec:
        raise SpecParseError(f"model spec {spec!r}: expected '<family>:<params>'")
    family, _, body = spec.partition(":")
    family = family.strip().lower()
    tokens = [t.strip() for t in body.split(",")] if body.strip() else []
    if family == "gamma":
        params = {}
        for tok in tokens:
            m = re.fullmatch(rf"(a|shape|rate|lambda)=({_NUM})", tok)
            if not m:
                raise SpecParseError(f"model spec {spec!r}: bad token {tok!r}")
            key = {"shape": "a", "lambda": "rate"}.get(m.group(1), m.group(1))
            if key in params:
                raise SpecParseError(f"model spec {spec!r}: duplicate token {tok!r}")
            params[key] = float(m.group(2))
        if "a" not in params:
            raise SpecParseError(f"model spec {spec!r}: missing token 'a=<shape>'")
        try:
            return GammaModel(params["a"], params.get("rate", 1.0))
        except DomainError as exc:
            raise SpecParseError(f"model spec {spec!r}: {exc}") from exc
    if family == "discrete":
        if not tokens:
            raise SpecParseError(f"model spec {spec!r}: no atoms")
        atoms = []
        for tok in tokens:
            m = re.fullmatch(rf"({_NUM})@({_NUM})", tok)
            if not m:
                raise SpecParseError(f"model spec {spec!r}: bad token {tok!r}")
            v, w = float(m.group(1)), float(m.group(2))
            if v <= 0:
                raise SpecParseError(f"model spec {spec!r}: token {tok!r} has a nonpositive value")
            atoms.append((v, w))
        try:
            return DiscreteModel.from_atoms(atoms)
        except DomainError as exc:
            raise SpecParseError(f"model spec {spec!r}: {exc}") from exc
    raise SpecParseError(f"model spec {spec!r}: unknown family token {family!r}")
