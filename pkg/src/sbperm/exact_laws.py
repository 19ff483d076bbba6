"""Closed-form and quadrature evaluation of finite-n and successive-sampling laws.

Notation: phi is the Laplace transform of the source law F, y_u = phi^-1(u).

* ``f_nk_density`` - density of the k-th largest of n uniforms.
* ``marginal_density`` - density of the k-th size-biased pick X_n[k].
* ``joint_density_first_k`` - joint density of X_n[1..k].
* ``successive_law`` - F_u(dx) = e^{-x y_u} F(dx) / u and its size-biased
  tilt G_u(dx) = x F_u(dx) / mu_u.
* residual probes for the integral identity and the evolution equation
  satisfied by f(u, x) = e^{-x y_u} / u. Both probes evaluate every
  candidate normalisation or sign and report them side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .dist_models import DistributionModel, GammaModel
from .errors import CapabilityError, ConvergenceError, DomainError

_EPSABS = 1e-10
_EPSREL = 1e-8
_LOG_TINY = -745.0


def _log_comb(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def log_f_nk(n: int, k: int, u):
    """log f_{n,k}(u); -inf outside (0, 1) where the density vanishes."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            math.log(n)
            + _log_comb(n - 1, k - 1)
            + special.xlogy(n - k, u)
            + special.xlog1py(k - 1, -u)
        )
    return np.where((u > 0) & (u < 1), out, np.where((u == 0) & (k == n), math.log(n), -np.inf))


def f_nk_density(n: int, k: int, u):
    """n C(n-1, k-1) u^{n-k} (1-u)^{k-1}, the beta(n-k+1, k) density.

    Direct evaluation for n <= 50, log domain above.
    """
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr > 0)) or np.any(~(u_arr < 1)):
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    if n <= 50:
        return n * math.comb(n - 1, k - 1) * u_arr ** (n - k) * (1.0 - u_arr) ** (k - 1)
    return np.exp(log_f_nk(n, k, u_arr))


# -- marginal law of the k-th pick -------------------------------------------

def _phi_split(model: DistributionModel) -> float:
    return float(model.laplace_inv(0.5))


def marginal_kernel(model: DistributionModel, n: int, k: int, x: float) -> float:
    """int_0^inf e^{-xy} f_{n,k}(phi(y)) dy.

    The half-line is split at y* = phi^-1(1/2). The inner piece is
    integrated adaptively; the outer piece uses y = y* - log(1 - v)/x, which
    maps the e^{-xy} tail onto (0, 1) with a bounded integrand.
    """
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    ystar = _phi_split(model)

    def log_integrand(y):
        u = float(model.laplace(y))
        return -x * y + float(log_f_nk(n, k, u))

    def inner(y):
        return math.exp(log_integrand(y))

    def outer(v):
        if v >= 1.0:
            return 0.0
        y = ystar - math.log1p(-v) / x
        # e^{-x y} dy = e^{-x y*} dv / x
        return math.exp(-x * ystar + float(log_f_nk(n, k, float(model.laplace(y))))) / x

    brk = [min(ystar, c / x) for c in (1.0, 10.0) if c / x < ystar]
    a, err_a = integrate.quad(inner, 0.0, ystar, points=brk or None,
                              epsabs=_EPSABS, epsrel=_EPSREL, limit=400)
    b, err_b = integrate.quad(outer, 0.0, 1.0, epsabs=_EPSABS, epsrel=_EPSREL, limit=400)
    total = a + b
    if err_a + err_b > max(1e-7 * abs(total), 1e-9):
        raise ConvergenceError(
            f"marginal kernel quadrature: n={n} k={k} x={x} value={total} est.err={err_a + err_b}"
        )
    return total


def marginal_density(model: DistributionModel, n: int, k: int, x: float) -> float:
    """Density of X_n[k] at x: x F'(x) int_0^inf e^{-xy} f_{n,k}(phi(y)) dy."""
    if not model.has_density:
        raise CapabilityError(f"{model.name} has atoms; use marginal_atom_probs")
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    log_pref = math.log(x) + float(_logpdf(model, x))
    if log_pref < _LOG_TINY:
        return 0.0
    kern = marginal_kernel(model, n, k, x)
    if kern <= 0:
        return 0.0
    logv = log_pref + math.log(kern)
    return 0.0 if logv < _LOG_TINY else math.exp(logv)


def marginal_atom_probs(model: DistributionModel, n: int, k: int) -> dict:
    """P(X_n[k] = v) for each atom v of a discrete source."""
    vals = getattr(model, "values", None)
    if vals is None:
        raise CapabilityError(f"{model.name} has no atoms")
    return {v: v * w * marginal_kernel(model, n, k, v) for v, w in zip(model.values, model.weights)}


def _logpdf(model, x):
    if isinstance(model, GammaModel):
        return model.logpdf(x)
    d = float(model.density(x))
    return math.log(d) if d > 0 else -np.inf


# -- joint law of the first k picks -------------------------------------------

def joint_density_first_k(model: DistributionModel, n: int, k: int, x) -> float:
    """Joint density of (X_n[1], ..., X_n[k]) at x.

    n!/(n-k)! prod_j x_j nu_1(x_j) int_0^inf nu_{n-k}(s) prod_j (x_j + ... + x_k + s)^-1 ds,
    with the integral replaced by prod_j (x_j + ... + x_n)^-1 when k = n.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (k,):
        raise DomainError(f"x must have length k={k}")
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if np.any(x <= 0):
        return 0.0
    log_pref = special.gammaln(n + 1) - special.gammaln(n - k + 1)
    with np.errstate(divide="ignore"):
        log_pref += float(np.sum(np.log(x) + np.log(model.convolution_density(1, x))))
    if not math.isfinite(log_pref):
        return 0.0
    tails = np.cumsum(x[::-1])[::-1]
    if k == n:
        return math.exp(log_pref - float(np.sum(np.log(tails))))
    # probe the order early so a missing nu raises CapabilityError
    model.convolution_density(n - k, 1.0)

    def integrand(s):
        return float(model.convolution_density(n - k, s)) / float(np.prod(tails + s))

    scale = max(model.mean * (n - k), 1e-12)
    i1, e1 = integrate.quad(integrand, 0.0, scale, epsabs=1e-13, epsrel=1e-10, limit=200)
    i2, e2 = integrate.quad(integrand, scale, np.inf, epsabs=1e-13, epsrel=1e-10, limit=200)
    return math.exp(log_pref) * (i1 + i2)


# -- successive sampling laws ------------------------------------------------

@dataclass(frozen=True)
class SuccessiveLaw:
    """F_u and G_u for a source law and a fraction u in (0, 1]."""

    model: DistributionModel
    u: float
    y: float
    mu_u: float

    def f(self, x):
        """Density ratio dF_u/dF = e^{-x y}/u."""
        return np.exp(-np.asarray(x, dtype=float) * self.y) / self.u

    def fu_density(self, x):
        return self.f(x) * self.model.density(x)

    def gu_density(self, x):
        x = np.asarray(x, dtype=float)
        return x * self.fu_density(x) / self.mu_u

    def fu_cdf(self, x):
        return np.array([self.model.tilted_cdf(t, self.y) for t in np.atleast_1d(x)]) / self.u

    @property
    def mean_fu(self) -> float:
        return self.mu_u

    @property
    def mean_gu(self) -> float:
        """mu(G_u) = int x^2 F_u(dx) / mu_u."""
        return self.model.tilted_moment(self.y, 2.0) / self.u / self.mu_u

    @property
    def var_gu(self) -> float:
        second = self.model.tilted_moment(self.y, 3.0) / self.u / self.mu_u
        return second - self.mean_gu**2

    def gamma_params(self):
        """(shape, rate) of F_u and G_u when the source is gamma(a, lam)."""
        if not isinstance(self.model, GammaModel):
            raise CapabilityError("closed-form F_u, G_u only for gamma sources")
        a, lam = self.model.shape, self.model.rate
        return (a, lam + self.y), (a + 1.0, lam + self.y)


def successive_law(model: DistributionModel, u: float) -> SuccessiveLaw:
    if not (0 < u <= 1):
        raise DomainError(f"u must lie in (0, 1], got {u}")
    y = 0.0 if u == 1 else float(model.laplace_inv(u))
    mu_u = -float(model.laplace_deriv(y)) / u
    return SuccessiveLaw(model, float(u), y, mu_u)


def mu_of_g(model: DistributionModel, s: float) -> float:
    """mu(G_s), the mean of the size-biased tilt at fraction s."""
    y = float(model.laplace_inv(s))
    return model.tilted_moment(y, 2.0) / -float(model.laplace_deriv(y))


def var_of_g(model: DistributionModel, s: float) -> float:
    y = float(model.laplace_inv(s))
    d = -float(model.laplace_deriv(y))
    m1 = model.tilted_moment(y, 2.0) / d
    return model.tilted_moment(y, 3.0) / d - m1 * m1


@dataclass(frozen=True)
class MeanFunction:
    """Candidates for m(u): int_0^u mu(G_s) ds, u mu(F_u) and mu(F_u)."""

    u: float
    integral_mu_g: float
    u_times_mu_fu: float
    mu_fu: float

    def matching(self, tol=1e-8):
        """Names of the closed-form candidates that equal the integral."""
        out = []
        ref = self.integral_mu_g
        for name in ("u_times_mu_fu", "mu_fu"):
            if abs(getattr(self, name) - ref) <= tol * max(1.0, abs(ref)):
                out.append(name)
        return out


def mean_function_m(model: DistributionModel, u: float) -> MeanFunction:
    if not (0 < u <= 1):
        raise DomainError(f"u must lie in (0, 1], got {u}")
    val, err = integrate.quad(lambda s: mu_of_g(model, s), 0.0, u,
                              epsabs=1e-12, epsrel=1e-10, limit=200)
    if err > 1e-8 * max(1.0, abs(val)):
        raise ConvergenceError(f"m(u) quadrature: value {val}, error {err}")
    law = successive_law(model, u)
    return MeanFunction(float(u), val, u * law.mu_u, law.mu_u)


def variance_function(model: DistributionModel, u: float) -> float:
    """int_0^u sigma^2(G_s) ds."""
    val, _ = integrate.quad(lambda s: var_of_g(model, s), 0.0, u, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def order_fluctuation_variance(model: DistributionModel, u: float) -> float:
    """Var of int_0^u g'(s) B(s) ds for a Brownian bridge B, g(s) = mu(G_s).

    Equals int_0^u (g(u) - g(r))^2 dr - (u g(u) - int_0^u g)^2. This is the
    extra variance a sum over exactly floor(nu) last picks carries from the
    fluctuation of the uniform order statistics.
    """
    gu = mu_of_g(model, u)
    sq, _ = integrate.quad(lambda r: (gu - mu_of_g(model, r)) ** 2, 0.0, u, epsabs=1e-13, epsrel=1e-10, limit=200)
    ig, _ = integrate.quad(lambda r: mu_of_g(model, r), 0.0, u, epsabs=1e-13, epsrel=1e-10, limit=200)
    return sq - (u * gu - ig) ** 2


# -- identity probes ----------------------------------------------------------

@dataclass(frozen=True)
class IntegralResiduals:
    """sup_x |int_0^u g_s(x) ds - c f(u,x) F'(x)| for c = 1 and c = u."""

    u: float
    c_one: float
    c_u: float

    def pinned(self, tol=1e-6):
        ok = [name for name, r in (("c=1", self.c_one), ("c=u", self.c_u)) if r < tol]
        return ok


def _g_density(model, s, x):
    y = float(model.laplace_inv(s))
    d = -float(model.laplace_deriv(y))
    return x * math.exp(-x * y) * float(model.density(x)) / d


def integral_identity_residual(model: DistributionModel, u: float, x_grid) -> IntegralResiduals:
    if not (0 < u <= 1):
        raise DomainError(f"u must lie in (0, 1], got {u}")
    law = successive_law(model, u)
    r1 = ru = 0.0
    for x in np.atleast_1d(np.asarray(x_grid, dtype=float)):
        lhs, _ = integrate.quad(lambda s: _g_density(model, s, x), 0.0, u,
                                epsabs=1e-13, epsrel=1e-11, limit=400)
        fu = float(law.fu_density(x))
        r1 = max(r1, abs(lhs - fu))
        ru = max(ru, abs(lhs - u * fu))
    return IntegralResiduals(float(u), r1, ru)


@dataclass(frozen=True)
class OdeResiduals:
    """Residuals of d/du[u f(u,x)] = +x f/mu_u (``plus``) and = -x f/mu_u (``minus``).

    Both are relative to ``scale`` = |x f/mu_u|: where u f(u,x) underflows
    the absolute residuals of both variants vanish and cannot tell them apart.
    """

    u: float
    x: float
    plus: float
    minus: float
    scale: float

    def pinned(self, tol=1e-5):
        return [name for name, r in (("+", self.plus), ("-", self.minus)) if abs(r) < tol]


def _uf(model, u, x):
    return math.exp(-x * float(model.laplace_inv(u)))


def evolution_ode_residual(model: DistributionModel, u: float, x: float) -> OdeResiduals:
    if not (0 < u < 1):
        raise DomainError(f"u must lie in (0, 1), got {u}")
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    h = 1e-5 * u
    if u + h < 1:
        lhs = (_uf(model, u + h, x) - _uf(model, u - h, x)) / (2 * h)
    else:
        lhs = (3 * _uf(model, u, x) - 4 * _uf(model, u - h, x) + _uf(model, u - 2 * h, x)) / (2 * h)
    law = successive_law(model, u)
    rhs = x * float(law.f(x)) / law.mu_u
    if not rhs > 0:
        raise DomainError(f"u f(u, x) underflows at u={u}, x={x}")
    return OdeResiduals(float(u), float(x), (lhs - rhs) / rhs, (lhs + rhs) / rhs, rhs)
