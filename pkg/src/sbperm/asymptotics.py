"""Limits of the last size-biased picks and the smallest order statistics.

For a source with F(x) ~ lam^a x^a / Gamma(a+1) near 0 the picks
n^{1/a} X_n^rev[k] converge to xi_rev[k] = T_(k)^{1/a} gamma_k / lam, with
T_(k) the points of a unit-rate Poisson process and gamma_k i.i.d.
gamma(a+1, 1). The pairs (S_k, T_(k)), S_k = T_(k) gamma_k^a / Gamma(a+1),
form a Poisson process on the quadrant with intensity ``mu_density``. Ranking
its points by t or by s gives the permutations J (s-rank of the k-th
smallest t) and K = J^-1.

Writing r = (Gamma(a+1) s / t)^{1/a}, the intensity factors as
ds x e^{-r} dr. So the process can be generated along the s axis:
S_(j) are cumulative standard exponentials, the marks r_j are i.i.d.
standard exponentials and T_j = Gamma(a+1) S_(j) r_j^{-a}. That is the
generator used here, because it makes the truncation certificate cheap: the
points not yet generated all have s > S_M, and the expected number of them
with t < t* is t* Q(a, r(S_M, t*)), which decays like exp(-S_M^{1/a}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .dist_models import DistributionModel, sample_iid
from .errors import ConvergenceError, DomainError, ResourceError
from .rng import child_generators

DEFAULT_MAX_POINTS = 10_000_000
_INITIAL_CHUNK = 64


def _check_a(a):
    if not (a > 0 and math.isfinite(a)):
        raise DomainError(f"a must be positive and finite, got {a}")


def _check_eps(eps):
    if not (0 < eps <= 1e-3):
        raise DomainError(f"eps must lie in (0, 1e-3], got {eps}")


# -- the intensity measure ----------------------------------------------------

def mark_of(s, t, a):
    """r = (Gamma(a+1) s / t)^{1/a}."""
    return (special.gamma(a + 1.0) * np.asarray(s, dtype=float) / np.asarray(t, dtype=float)) ** (1.0 / a)


def mu_density(s, t, a):
    """Density of the coupling intensity in (s, t) coordinates.

    (1/(a t)) Gamma(a+1)^{1/a} (s/t)^{1/a} exp(-(Gamma(a+1) s/t)^{1/a}), i.e.
    r e^{-r} / (a t). Both coordinate marginals are Lebesgue measure.
    """
    _check_a(a)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    r = mark_of(s, t, a)
    return r * np.exp(-r) / (a * t)


def mu_density_without_t_factor(s, t, a):
    """The same expression without the 1/t factor.

    Kept for comparison only: its s-marginal diverges, so it is not the
    intensity of the coupling process.
    """
    _check_a(a)
    return t * mu_density(s, t, a)


def _gamma_mass(a, w0, w1):
    """int_{w0}^{w1} w^{a-1} e^{-w} dw / Gamma(a) by quadrature."""
    if w1 <= w0:
        return 0.0
    lg = special.gammaln(a)

    def f(w):
        return math.exp((a - 1.0) * math.log(w) - w - lg) if w > 0 else 0.0

    pieces = []
    lo = w0
    # break at the mode and a few scales past it so quad sees the bulk
    for b in (max(a - 1.0, 0.0), a, a + 10.0 * math.sqrt(a) + 10.0):
        if lo < b < w1:
            pieces.append((lo, b))
            lo = b
    pieces.append((lo, w1))
    total = 0.0
    for p0, p1 in pieces:
        v, err = integrate.quad(f, p0, p1, epsabs=1e-14, epsrel=1e-12, limit=200)
        if err > 1e-9 * max(1.0, abs(v)) + 1e-13:
            raise ConvergenceError(f"gamma mass quadrature on ({p0}, {p1}), a={a}: error {err}")
        total += v
    return total


def _s_strip_mass(s0, s1, t, a):
    """mu((s0, s1) x (0, t)) = int_{s0}^{s1} e^{-r(s, t)} ds.

    With w = r(s, t) this is t times a gamma(a) mass between r(s0, t) and
    r(s1, t).
    """
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return s1 - s0
    w0 = float(mark_of(s0, t, a))
    w1 = math.inf if math.isinf(s1) else float(mark_of(s1, t, a))
    return t * _gamma_mass(a, w0, w1)


def rect_mass(s_range, t_range, a) -> float:
    """mu((s0, s1) x (t0, t1)); either upper end may be ``inf``."""
    _check_a(a)
    s0, s1 = map(float, s_range)
    t0, t1 = map(float, t_range)
    if not (0 <= s0 and 0 <= t0):
        raise DomainError("rectangle corners must be nonnegative")
    if s1 <= s0 or t1 <= t0:
        return 0.0
    if math.isinf(s1) and math.isinf(t1):
        return math.inf
    return max(_s_strip_mass(s0, s1, t1, a) - _s_strip_mass(s0, s1, t0, a), 0.0)


def upper_tail_mass(s, t, a):
    """mu((s, inf) x (0, t)) = t Q(a, r(s, t)), closed form, vectorised."""
    t = np.asarray(t, dtype=float)
    return t * special.gammaincc(a, mark_of(s, t, a))


# -- conditional laws of K_j and J_k --------------------------------------------

@dataclass(frozen=True)
class ConditionalLaw:
    """Poisson(poisson_mean) + Binomial(binomial_n, binomial_p), independent.

    ``poisson_mean`` and ``binomial_p`` are the rectangle-mass values; the
    ``*_closed`` fields are the closed forms and ``binomial_p_alternative`` is
    the alternative closed form that only agrees at a = 1.
    """

    poisson_mean: float
    binomial_n: int
    binomial_p: float
    poisson_mean_closed: float
    binomial_p_closed: float
    binomial_p_alternative: float

    @property
    def alternative_p_in_range(self) -> bool:
        return 0.0 <= self.binomial_p_alternative <= 1.0

    def pmf(self, k_max: int) -> np.ndarray:
        """P(count = 0..k_max) by direct convolution."""
        from scipy import stats

        ks = np.arange(k_max + 1)
        pois = stats.poisson.pmf(ks, self.poisson_mean)
        binom = stats.binom.pmf(ks, self.binomial_n, self.binomial_p)
        return np.convolve(pois, binom)[: k_max + 1]


def kj_conditional_law(j: int, s: float, r: float, a: float) -> ConditionalLaw:
    """Law of K_j - 1 given S_(j) = s carrying mark r.

    Points with larger s and smaller t are Poisson; each of the j-1 points
    with smaller s independently has smaller t.
    """
    _check_a(a)
    if j < 1 or not (s > 0 and r > 0):
        raise DomainError(f"need j >= 1 and s, r > 0, got j={j}, s={s}, r={r}")
    t = special.gamma(a + 1.0) * s * r ** (-a)
    lower = special.gammainc(a, r) * special.gamma(a)  # int_0^r x^{a-1} e^{-x} dx
    upper = special.gammaincc(a, r) * special.gamma(a)
    m_closed = a * s * r ** (-a) * upper
    p_closed = a * r ** (-a) * lower
    p_alt = a * s ** (2.0 / a - 2.0) * r ** (a - 2.0) * lower
    denom = rect_mass((0.0, s), (0.0, math.inf), a)
    if not math.isfinite(denom) or denom <= 0:
        raise DomainError(f"binomial denominator mu((0,s) x (0,inf)) = {denom}")
    m_rect = rect_mass((s, math.inf), (0.0, t), a)
    p_rect = rect_mass((0.0, s), (0.0, t), a) / denom
    return ConditionalLaw(m_rect, j - 1, p_rect, m_closed, p_closed, p_alt)


def jk_conditional_law(k: int, t: float, r: float, a: float) -> ConditionalLaw:
    """Law of J_k - 1 given T_(k) = t carrying mark r.

    The binomial denominator is mu((0, inf) x (0, t)) = t, the mass of the
    strip the k-1 earlier t-points are uniform on.
    """
    _check_a(a)
    if k < 1 or not (t > 0 and r > 0):
        raise DomainError(f"need k >= 1 and t, r > 0, got k={k}, t={t}, r={r}")
    g = special.gamma(a + 1.0)
    s = t * r**a / g
    lower = special.gammainc(a, r) * special.gamma(a)
    upper = special.gammaincc(a, r) * special.gamma(a)
    m_closed = t * ((r**a + a * upper) / g - 1.0)
    p_closed = special.gammainc(a, r)
    p_alt = g ** (1.0 - 2.0 / a) * a * t ** (2.0 / a - 2.0) * r ** (a - 1.0 / a) * lower
    denom = rect_mass((0.0, math.inf), (0.0, t), a)
    if not math.isfinite(denom) or denom <= 0:
        raise DomainError(f"binomial denominator mu((0,inf) x (0,t)) = {denom}")
    m_rect = rect_mass((0.0, s), (t, math.inf), a)
    p_rect = rect_mass((0.0, s), (0.0, t), a) / denom
    return ConditionalLaw(m_rect, k - 1, p_rect, m_closed, p_closed, p_alt)


# -- K_1 and J_1 at a = 1 ------------------------------------------------------
#
# Given the mark r, K_1 is geometric with p_r = r/(r + e^{-r}) and r ~ e^{-r} dr;
# J_1 is geometric with p~_r = 1/(r + e^{-r}) and r ~ r e^{-r} dr.

def _k1_logs(r):
    # p = r e^r / (1 + r e^r), q = 1 / (1 + r e^r)
    z = r * math.exp(r) if r < 700 else math.inf
    log_q = -math.log1p(z)
    log_p = math.log(z) + log_q if z < math.inf else 0.0
    return log_p, log_q


def _j1_q(r):
    # q~ = (r + e^{-r} - 1)/(r + e^{-r}); series for small r avoids cancellation
    if r < 1e-3:
        num = r * r * (0.5 - r / 6.0 + r * r / 24.0)
    else:
        num = r + math.expm1(-r)
    return num / (r + math.exp(-r))


def _quad_pieces(f, pieces):
    total = 0.0
    for lo, hi in pieces:
        v, err = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)
        total += v
    return total


def k1_pmf(k: int) -> float:
    """P(K_1 = k) = int_0^inf p_r q_r^{k-1} e^{-r} dr (a = 1).

    On (0, 1) the substitution r = e^{-v} spreads out the region r ~ 1/k
    where q_r^{k-1} still carries mass for large k.
    """
    if k < 1 or int(k) != k:
        raise DomainError(f"k must be a positive integer, got {k}")

    def integrand(r):
        log_p, log_q = _k1_logs(r)
        return math.exp(log_p + (k - 1) * log_q - r)

    def small(v):
        r = math.exp(-v)
        return integrand(r) * r

    vk = math.log(k) if k > 1 else 1.0
    low = _quad_pieces(small, [(0.0, vk), (vk, vk + 20.0), (vk + 20.0, math.inf)])
    high = _quad_pieces(integrand, [(1.0, 40.0), (40.0, math.inf)])
    return low + high


def j1_pmf(j: int) -> float:
    """P(J_1 = j) = int_0^inf p~_r q~_r^{j-1} r e^{-r} dr (a = 1)."""
    if j < 1 or int(j) != j:
        raise DomainError(f"j must be a positive integer, got {j}")

    def integrand(r):
        if r <= 0:
            return 0.0
        q = _j1_q(r)
        lq = (j - 1) * math.log(q) if j > 1 else 0.0
        return math.exp(lq + math.log(r) - r) / (r + math.exp(-r))

    peak = math.sqrt(j)
    pieces = [(0.0, 1.0)]
    edges = sorted({1.0, max(1.0, peak), max(1.0, 4 * peak), max(1.0, 4 * peak) + 60.0})
    pieces += list(zip(edges[:-1], edges[1:]))
    pieces.append((edges[-1], math.inf))
    return _quad_pieces(integrand, [p for p in pieces if p[1] > p[0]])


def j1_tail(N: int):
    """(P(J_1 > N), E[J_1; J_1 > N]) from the geometric tail in closed form.

    Given r, P(J > N) = q^N and E[J; J > N] = q^N (N + 1/p).
    """
    def mass(r):
        if r <= 0:
            return 0.0
        return math.exp(N * math.log(_j1_q(r)) + math.log(r) - r)

    def mean(r):
        return mass(r) * (N + r + math.exp(-r))

    peak = max(1.0, math.sqrt(N))
    pieces = [(0.0, 1.0), (1.0, peak), (peak, 4 * peak + 60.0), (4 * peak + 60.0, math.inf)]
    pieces = [p for p in pieces if p[1] > p[0]]
    return _quad_pieces(mass, pieces), _quad_pieces(mean, pieces)


def j1_moments(N: int = 200):
    """Truncation-corrected (total mass, mean) of J_1: sums up to N plus tails."""
    pm = np.array([j1_pmf(j) for j in range(1, N + 1)])
    tail_mass, tail_mean = j1_tail(N)
    js = np.arange(1, N + 1)
    return math.fsum(pm) + tail_mass, math.fsum(js * pm) + tail_mean


def k1_partial_expectation(N: int) -> float:
    """sum_{k <= N} k P(K_1 = k).

    Given r, sum_{k<=N} k p q^{k-1} = (1 - (N+1) q^N + N q^{N+1}) / p.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")

    def integrand(r):
        log_p, log_q = _k1_logs(r)
        qn = math.exp(N * log_q)
        q = math.exp(log_q)
        # 1 - (N+1) q^N + N q^{N+1} = 1 - q^N - N q^N (1 - q)
        head = -math.expm1(N * log_q) - N * qn * math.exp(log_p)
        return max(head, 0.0) / math.exp(log_p) * math.exp(-r) if q < 1 else 0.0

    def small(v):
        r = math.exp(-v)
        return integrand(r) * r

    vn = math.log(N) if N > 1 else 1.0
    low = _quad_pieces(small, [(0.0, vn), (vn, vn + 40.0), (vn + 40.0, math.inf)])
    high = _quad_pieces(integrand, [(1.0, 40.0), (40.0, math.inf)])
    return low + high


def prob_last_pick_is_min() -> float:
    """1 - int_0^1 u / (u - log u) du, the limit P(J_1 = 1) = P(K_1 = 1)."""
    def f(u):
        if u <= 0:
            return 0.0
        if u >= 1:
            return 1.0
        return u / (u - math.log(u))

    v, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 - v


# -- the limit point process ----------------------------------------------------

@dataclass(frozen=True)
class LimitProcess:
    """A certified finite piece of the coupling point process.

    ``s``, ``t`` and ``gammas`` list all generated points in increasing t;
    the first ``len(J)`` of them are the true T_(1..k_max). ``J[k-1]`` is the
    s-rank of the k-th smallest t and ``K[j-1]`` the t-rank of the j-th
    smallest s, on the prefix where no ungenerated point can change it.
    ``s_sorted`` holds the generated s-values in increasing order; they are
    exactly S_(1), S_(2), ... of the whole process.
    """

    a: float
    lam: float
    s: np.ndarray
    t: np.ndarray
    gammas: np.ndarray
    s_sorted: np.ndarray
    J: np.ndarray
    K: np.ndarray
    truncation_bound: float
    k_bound: float = field(default=math.nan)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.s, self.t])

    @property
    def n_points(self) -> int:
        return self.s.size


def _chunk_schedule(first: int):
    size = first
    total = 0
    while True:
        yield size
        total += size
        size = total  # double the generated count each round


def limit_process(a: float, lam: float, k_max: int, eps: float, rng: np.random.Generator, *,
                  certify_k: bool = False, max_points: int = DEFAULT_MAX_POINTS) -> LimitProcess:
    """Generate points along the s axis until the first k_max t-ranks are certified.

    The certificate is the expected number of ungenerated points below the
    current k_max-th smallest t; since such points are Poisson this also
    bounds the probability that one exists. J is certified on 1..k_max. K is
    certified on the longest prefix whose t-values are covered the same way;
    with ``certify_k`` generation continues until that prefix is 1..k_max.
    Raises ResourceError when ``max_points`` is reached first.
    """
    _check_a(a)
    _check_eps(eps)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    g = special.gamma(a + 1.0)
    s_parts, r_parts = [], []
    s_last = 0.0
    count = 0
    bound = math.inf
    for size in _chunk_schedule(max(_INITIAL_CHUNK, 4 * k_max)):
        size = min(size, max_points - count)
        if size <= 0:
            raise ResourceError(
                f"limit process: bound {bound:.3g} > eps={eps:g} after {count} points", achieved=bound)
        gaps = rng.standard_exponential(size)
        marks = rng.standard_exponential(size)
        s_new = s_last + np.cumsum(gaps)
        s_parts.append(s_new)
        r_parts.append(marks)
        s_last = float(s_new[-1])
        count += size
        if count < k_max:
            continue
        s = np.concatenate(s_parts)
        r = np.concatenate(r_parts)
        with np.errstate(divide="ignore"):
            t = g * s * r ** (-a)
        t_k = float(np.partition(t, k_max - 1)[k_max - 1])
        bound = float(upper_tail_mass(s_last, t_k, a))
        if certify_k:
            bound = max(bound, float(upper_tail_mass(s_last, t[:k_max].max(), a)))
        if bound <= eps:
            break
    order = np.argsort(t, kind="stable")
    J = order[:k_max] + 1
    t_rank = np.empty(count, dtype=np.intp)
    t_rank[order] = np.arange(1, count + 1)
    # longest K prefix whose running max t is covered by the generated points
    k_bounds = upper_tail_mass(s_last, np.maximum.accumulate(t[:k_max]), a)
    ok = k_bounds <= eps
    k_len = k_max if ok.all() else int(np.argmin(ok))
    K = t_rank[:k_len]
    return LimitProcess(
        float(a), float(lam), s[order], t[order], r[order], s, J, K, bound,
        float(k_bounds[k_len - 1]) if k_len else math.nan,
    )


@dataclass(frozen=True)
class LimitSample:
    """xi_sbp[k-1] = xi_rev[k] and xi_order[j-1] = xi_rev(j)."""

    xi_sbp: np.ndarray
    xi_order: np.ndarray

    @classmethod
    def from_process(cls, proc: LimitProcess) -> "LimitSample":
        k_max = proc.J.size
        g = special.gamma(proc.a + 1.0)
        xi_sbp = proc.t[:k_max] ** (1.0 / proc.a) * proc.gammas[:k_max] / proc.lam
        xi_order = (g * proc.s_sorted) ** (1.0 / proc.a) / proc.lam
        return cls(xi_sbp, xi_order)


def limit_sbp_sample(a: float, lam: float, k_max: int, rng: np.random.Generator, size=None) -> LimitSample:
    """xi_rev[1..k_max] from T_(k) = cumulative exponentials and gamma(a+1) marks.

    ``xi_order`` is the increasing sort of these k_max values (the order
    statistics of the sampled prefix). Arrays have shape (k_max,) or
    (size, k_max).
    """
    _check_a(a)
    if not lam > 0 or k_max < 1:
        raise DomainError(f"need lambda > 0 and k_max >= 1, got {lam}, {k_max}")
    shape = () if size is None else (size,)
    t = np.cumsum(rng.standard_exponential(shape + (k_max,)), axis=-1)
    gam = rng.gamma(a + 1.0, 1.0, shape + (k_max,))
    xi = t ** (1.0 / a) * gam / lam
    return LimitSample(xi, np.sort(xi, axis=-1))


# -- vectorised replicas -------------------------------------------------------

def _j_prefix_block(a, k_max, eps, b, rng, max_points):
    g = special.gamma(a + 1.0)
    s_last = np.zeros(b)
    best_t = np.full((b, k_max), np.inf)
    best_i = np.zeros((b, k_max), dtype=np.int64)
    bounds = np.full(b, np.inf)
    active = np.arange(b)
    count = 0
    for size in _chunk_schedule(max(_INITIAL_CHUNK, 4 * k_max)):
        if count >= max_points:
            raise ResourceError(
                f"J prefix: {active.size} replicas above eps={eps:g} after {count} points",
                achieved=float(bounds[active].max()))
        size = min(size, max_points - count)
        na = active.size
        gaps = rng.standard_exponential((na, size))
        marks = rng.standard_exponential((na, size))
        s = s_last[active, None] + np.cumsum(gaps, axis=1)
        s_last[active] = s[:, -1]
        with np.errstate(divide="ignore"):
            t = g * s * marks ** (-a)
        cand_t = np.concatenate([best_t[active], t], axis=1)
        cand_i = np.concatenate([best_i[active], np.broadcast_to(count + np.arange(size), (na, size))], axis=1)
        sel = np.argsort(cand_t, axis=1, kind="stable")[:, :k_max]
        best_t[active] = np.take_along_axis(cand_t, sel, axis=1)
        best_i[active] = np.take_along_axis(cand_i, sel, axis=1)
        count += size
        t_k = best_t[active, k_max - 1]
        with np.errstate(invalid="ignore"):
            bnd = np.where(np.isfinite(t_k), upper_tail_mass(s_last[active], t_k, a), np.inf)
        bounds[active] = bnd
        active = active[~(bnd <= eps)]
        if active.size == 0:
            break
    return best_i + 1, bounds


def limit_j_prefix(a: float, k_max: int, eps: float, reps: int, rng: np.random.Generator, *,
                   block: int = 50_000, max_points: int = 100_000):
    """Certified (J_1..J_k_max) for ``reps`` independent limit processes.

    Returns ``(J, bounds)`` with J of shape (reps, k_max). Blocks of replicas
    draw from child streams of ``rng``.
    """
    _check_a(a)
    _check_eps(eps)
    Js, bs = [], []
    for size, child in child_generators(rng, reps, block):
        J, b = _j_prefix_block(a, k_max, eps, size, child, max_points)
        Js.append(J)
        bs.append(b)
    if not Js:
        return np.empty((0, k_max), dtype=np.int64), np.empty(0)
    return np.concatenate(Js), np.concatenate(bs)


def _k1_block(a, eps, cap, b, rng, max_points):
    g = special.gamma(a + 1.0)
    s1 = rng.standard_exponential(b)
    r1 = rng.standard_exponential(b)
    with np.errstate(divide="ignore"):
        t1 = g * s1 * r1 ** (-a)
    below = np.zeros(b, dtype=np.int64)
    s_last = s1.copy()
    active = np.arange(b)
    count = 1
    bounds = np.zeros(b)
    for size in _chunk_schedule(_INITIAL_CHUNK):
        bnd = upper_tail_mass(s_last[active], t1[active], a)
        bounds[active] = bnd
        done = (bnd <= eps) | (below[active] >= cap)
        active = active[~done]
        if active.size == 0:
            break
        if count >= max_points:
            raise ResourceError(
                f"K_1: {active.size} replicas above eps={eps:g} after {count} points",
                achieved=float(bounds[active].max()))
        size = min(size, max_points - count)
        na = active.size
        gaps = rng.standard_exponential((na, size))
        marks = rng.standard_exponential((na, size))
        s = s_last[active, None] + np.cumsum(gaps, axis=1)
        s_last[active] = s[:, -1]
        with np.errstate(divide="ignore"):
            t = g * s * marks ** (-a)
        below[active] += (t < t1[active, None]).sum(axis=1)
        count += size
    return np.minimum(below + 1, cap + 1), bounds


def limit_k1(a: float, eps: float, reps: int, rng: np.random.Generator, *, cap: int = 20,
             block: int = 50_000, max_points: int = 1_000_000):
    """K_1 for ``reps`` limit processes, values above ``cap`` reported as cap + 1.

    A replica stops once ``cap`` points with smaller t are seen or the
    ungenerated region below T_1 has expected count <= eps.
    """
    _check_a(a)
    _check_eps(eps)
    out = []
    for size, child in child_generators(rng, reps, block):
        k1, _ = _k1_block(a, eps, cap, size, child, max_points)
        out.append(k1)
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def finite_last_picks(model: DistributionModel, n: int, k: int, reps: int, rng: np.random.Generator,
                      *, cells: int = 2_000_000) -> np.ndarray:
    """(X_n^rev[1], ..., X_n^rev[k]) for ``reps`` s.b.p. of n i.i.d. draws, shape (reps, k).

    X_n^rev[1] is the last pick, i.e. the value with the largest exponential
    key e_i / x_i. Replicas run in blocks of about ``cells`` values, each from
    its own child stream.
    """
    if n < 1 or reps < 1 or not (1 <= k <= n):
        raise DomainError(f"need n, reps >= 1 and 1 <= k <= n, got n={n}, k={k}, reps={reps}")
    out = np.empty((reps, k))
    pos = 0
    for size, child in child_generators(rng, reps, max(1, cells // n)):
        x = sample_iid(model, size * n, child).reshape(size, n)
        keys = child.standard_exponential((size, n)) / x
        top = np.argpartition(-keys, k - 1, axis=1)[:, :k] if k < n else np.tile(np.arange(n), (size, 1))
        order = np.argsort(-np.take_along_axis(keys, top, axis=1), axis=1)
        out[pos:pos + size] = np.take_along_axis(x, np.take_along_axis(top, order, axis=1), axis=1)
        pos += size
    return out


def finite_last_pick(model: DistributionModel, n: int, reps: int, rng: np.random.Generator,
                     *, cells: int = 2_000_000):
    """(X_n^rev[1], J_{n,1}) for ``reps`` s.b.p. of n i.i.d. draws from ``model``.

    The last pick is the largest exponential key e_i / x_i; J_{n,1} is its
    increasing rank among the n values. Replicas run in blocks of about
    ``cells`` values, each from its own child stream.
    """
    if n < 1 or reps < 1:
        raise DomainError(f"need n, reps >= 1, got {n}, {reps}")
    block = max(1, cells // n)
    last = np.empty(reps)
    rank = np.empty(reps, dtype=np.int64)
    pos = 0
    for size, child in child_generators(rng, reps, block):
        x = sample_iid(model, size * n, child).reshape(size, n)
        keys = child.standard_exponential((size, n)) / x
        j = np.argmax(keys, axis=1)
        xl = x[np.arange(size), j]
        last[pos:pos + size] = xl
        rank[pos:pos + size] = (x < xl[:, None]).sum(axis=1) + 1
        pos += size
    return last, rank
