"""Stick-breaking views of a finite i.i.d. size-biased permutation.

The totals left before each pick form an inhomogeneous Markov chain whose
kernel is ``transition_density``. For gamma sources the break fractions are
independent betas (``patil_taillie_sample``) and there is a second, reverse
representation through decreasing uniform order statistics
(``reverse_representation_sample``). GEM(alpha, theta) fractions come from
``gem_sample``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dist_models import DistributionModel, GammaModel, sample_iid
from .errors import DomainError
from .sampler import SbpSample, batch_by_exponential_keys


@dataclass(frozen=True)
class StickChain:
    """Totals (T_n, ..., T_1), break fractions W and residuals 1 - W.

    ``ratios[k] = values[k] / totals[k]``; the last fraction is always 1.
    """

    totals: np.ndarray
    ratios: np.ndarray
    complements: np.ndarray
    representation: str = "sbp"

    @classmethod
    def from_sample(cls, sample: SbpSample, representation: str = "sbp") -> "StickChain":
        totals = sample.remaining_totals
        w = sample.values / totals
        return cls(totals, w, 1.0 - w, representation)


@dataclass(frozen=True)
class GemParams:
    """GEM(alpha, theta): W_i ~ beta(1 - alpha, theta + i alpha).

    Valid regions: 0 <= alpha < 1 with theta > -alpha, or alpha = -a < 0
    with theta = n a for a positive integer n (then at most n pieces).
    """

    alpha: float
    theta: float

    def __post_init__(self):
        a, t = self.alpha, self.theta
        if 0 <= a < 1:
            if not t > -a:
                raise DomainError(f"GEM({a}, {t}): need theta > -alpha")
        elif a < 0:
            n = t / (-a)
            if not (abs(n - round(n)) <= 1e-9 * max(1.0, abs(n)) and round(n) >= 1):
                raise DomainError(f"GEM({a}, {t}): negative alpha needs theta = n * (-alpha), n >= 1")
        else:
            raise DomainError(f"GEM({a}, {t}): alpha must be < 1")

    @property
    def n_pieces(self):
        """Number of pieces in the alpha < 0 case, else None."""
        if self.alpha < 0:
            return int(round(self.theta / (-self.alpha)))
        return None


def _log_conv(model, k, s):
    if isinstance(model, GammaModel):
        return model.log_convolution_density(k, s)
    return np.log(model.convolution_density(k, s))


def transition_density(model: DistributionModel, n: int, k: int, t: float, s) -> np.ndarray:
    """Density at s of T_{n-k} given T_{n-k+1} = t, for k = 1..n-1."""
    if not (n >= 2 and 1 <= k <= n - 1):
        raise DomainError(f"need 1 <= k <= n-1, got n={n}, k={k}")
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)) or np.any(~(s < t)):
        raise DomainError(f"s must lie in (0, t={t})")
    logv = (
        math.log(n - k + 1)
        + np.log((t - s) / t)
        + _log_conv(model, 1, t - s)
        + _log_conv(model, n - k, s)
        - _log_conv(model, n - k + 1, t)
    )
    return np.exp(logv)


def chain_from_sample(sample: SbpSample) -> StickChain:
    return StickChain.from_sample(sample)


def _check_gamma_args(a, lam, n):
    if not (a > 0 and lam > 0):
        raise DomainError(f"need a, lambda > 0, got a={a}, lambda={lam}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")


def patil_taillie_sample(a: float, lam: float, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """X_n[1..n] for gamma(a, lam) sources via independent beta breaks.

    gamma0 ~ gamma(a n, lam) is the total and beta_k ~ beta(a+1, (n-k) a)
    is the fraction broken off the remaining stick at step k. Returns shape
    (n,) or (size, n).
    """
    _check_gamma_args(a, lam, n)
    shape = () if size is None else (size,)
    g0 = rng.gamma(a * n, 1.0 / lam, shape)
    out = np.empty(shape + (n,))
    left = np.array(g0, dtype=float)
    for k in range(1, n):
        b = rng.beta(a + 1.0, (n - k) * a, shape)
        out[..., k - 1] = left * b
        left = left * (1.0 - b)
    out[..., n - 1] = left
    return out


def reverse_representation_sample(a: float, lam: float, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """X_n[k] = U_down(k)^(1/a) gamma_k with gamma_k ~ gamma(a+1, lam) i.i.d.

    ``U_down`` are the decreasing order statistics of n uniforms.
    """
    _check_gamma_args(a, lam, n)
    shape = () if size is None else (size,)
    g = rng.gamma(a + 1.0, 1.0 / lam, shape + (n,))
    u = -np.sort(-rng.random(shape + (n,)), axis=-1)
    return u ** (1.0 / a) * g


def gem_sample(params: GemParams, k: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """First k GEM(alpha, theta) fractions P_i = W_i prod_{j<i} (1 - W_j)."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    n = params.n_pieces
    if n is not None and k > n:
        raise DomainError(f"GEM({params.alpha}, {params.theta}) has only {n} pieces, asked for {k}")
    shape = () if size is None else (size,)
    out = np.empty(shape + (k,))
    left = np.ones(shape)
    for i in range(1, k + 1):
        b_par = params.theta + i * params.alpha
        if n is not None and i == n:
            w = np.ones(shape)  # beta(1 + a, 0) is the point mass at 1
        else:
            w = rng.beta(1.0 - params.alpha, b_par, shape)
        out[..., i - 1] = left * w
        left = left * (1.0 - w)
    return out


@dataclass(frozen=True)
class IndependenceProbe:
    statistic: float
    threshold: float
    p_value: float
    dof: int
    applicable: bool


def _quantile_bins(x, bins):
    edges = np.unique(np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1]))
    return np.searchsorted(edges, x, side="right")


def independence_chi2(x, y, bins: int = 10, level: float = 0.01) -> IndependenceProbe:
    """Chi-square test of independence on a quantile-binned contingency table."""
    bx = _quantile_bins(x, bins)
    by = _quantile_bins(y, bins)
    table = np.zeros((bx.max() + 1, by.max() + 1))
    np.add.at(table, (bx, by), 1.0)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if min(table.shape) < 2:
        return IndependenceProbe(0.0, 0.0, 1.0, 0, False)
    res = stats.chi2_contingency(table, correction=False)
    dof = int(res.dof)
    return IndependenceProbe(float(res.statistic), float(stats.chi2.isf(level, dof)), float(res.pvalue), dof, True)


def first_pick_and_total(model: DistributionModel, n: int, reps: int, rng: np.random.Generator):
    """(T_n, X_n[1] / T_n) over ``reps`` independent s.b.p. of n i.i.d. draws."""
    x = sample_iid(model, n * reps, rng).reshape(reps, n)
    order = batch_by_exponential_keys(x, rng)
    total = x.sum(axis=1)
    first = x[np.arange(reps), order[:, 0]]
    return total, first / total


def lukacs_independence_probe(model: DistributionModel, n: int, reps: int, rng: np.random.Generator,
                              level: float = 0.01, bins: int = 10, seed=None):
    """Test whether T_n and X_n[1]/T_n look independent.

    Gamma sources make them independent; by the converse (via Lukacs'
    characterisation) any other source makes them dependent. The report
    passes when the contingency chi-square stays below its threshold;
    ``details['verdict']`` is ``independence-consistent``,
    ``dependence-detected`` or ``not-applicable``.
    """
    from .verification import TestReport

    if reps < 10_000:
        raise DomainError(f"reps must be >= 1e4, got {reps}")
    if n == 1:
        return TestReport("lukacs_independence", 0.0, 0.0, reps, seed, True,
                          {"verdict": "not-applicable", "reason": "X_1[1]/T_1 is identically 1"})
    total, ratio = first_pick_and_total(model, n, reps, rng)
    probe = independence_chi2(total, ratio, bins=bins, level=level)
    if not probe.applicable:
        return TestReport("lukacs_independence", 0.0, 0.0, reps, seed, True,
                          {"verdict": "not-applicable", "reason": "degenerate contingency table"})
    independent = probe.statistic <= probe.threshold
    verdict = "independence-consistent" if independent else "dependence-detected"
    return TestReport(
        "lukacs_independence", probe.statistic, probe.threshold, reps, seed, independent,
        {"verdict": verdict, "p_value": probe.p_value, "dof": probe.dof, "level": level,
         "model": model.name, "n": n},
    )
