"""Size-biased permutations of finite positive sequences.

Two independent samplers are provided: the sequential definition (each
next index drawn with probability proportional to its value among those
not yet picked) and the exponential-keys coupling (sort ``e_i / x_i`` for
i.i.d. standard exponentials ``e_i``). ``exact_sbp_law`` enumerates the
law of the pick order for small inputs.

Conventions: ``pick_order`` holds 0-based positions into ``source``.
Ranks in :class:`CouplingPermutation` are 1-based, so ``J[0] == 1`` means
the last pick is the smallest value. Ties are broken by source position
in every ranking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeError

EXACT_LAW_MAX_N = 10


@dataclass(frozen=True)
class SbpSample:
    """One realised size-biased permutation.

    ``remaining_totals[k]`` is the sum of ``values[k:]``, i.e. the
    sequence (T_n, T_{n-1}, ..., T_1) of totals left before each pick.
    """

    source: np.ndarray
    pick_order: np.ndarray
    values: np.ndarray
    remaining_totals: np.ndarray

    @classmethod
    def from_order(cls, source, pick_order) -> "SbpSample":
        source = np.asarray(source, dtype=float)
        pick_order = np.asarray(pick_order, dtype=np.intp)
        values = source[pick_order]
        # reverse cumulative sum keeps the small tail totals accurate
        totals = np.cumsum(values[::-1])[::-1]
        return cls(source, pick_order, values, totals)

    @property
    def n(self) -> int:
        return len(self.source)

    @property
    def reversed_values(self) -> np.ndarray:
        """X^rev[k]: the picks read from the last one backwards."""
        return self.values[::-1]


@dataclass(frozen=True)
class CouplingPermutation:
    """J[k-1] = rank (1-based, increasing) of the k-th pick from the end; K = J^-1."""

    J: np.ndarray
    K: np.ndarray


def _check_values(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("values must be a non-empty 1-d sequence")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise DomainError("values must be finite and strictly positive")
    return x


def _check_batch(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] == 0:
        raise DomainError("batch values must be a (reps, n) array with n >= 1")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise DomainError("values must be finite and strictly positive")
    return x


def sbp_by_definition(values, rng: np.random.Generator) -> SbpSample:
    """Sequential sampler: cumulative-weight inversion at each step, O(n^2)."""
    x = _check_values(values)
    n = x.size
    remaining = list(range(n))
    order = np.empty(n, dtype=np.intp)
    for k in range(n):
        w = x[remaining]
        cw = np.cumsum(w)
        target = rng.random() * cw[-1]
        j = int(np.searchsorted(cw, target, side="right"))
        j = min(j, len(remaining) - 1)
        order[k] = remaining.pop(j)
    return SbpSample.from_order(x, order)


def sbp_by_exponential_keys(values, rng: np.random.Generator) -> SbpSample:
    """Induced-order-statistics sampler: sort by keys e_i / x_i."""
    x = _check_values(values)
    keys = rng.standard_exponential(x.size) / x
    return SbpSample.from_order(x, np.argsort(keys, kind="stable"))


def batch_by_definition(values, rng: np.random.Generator) -> np.ndarray:
    """Pick orders for each row of a (reps, n) array, sequential sampler.

    Loops over the n steps and vectorises over replicas.
    """
    x = _check_batch(values)
    reps, n = x.shape
    w = x.copy()
    rows = np.arange(reps)
    order = np.empty((reps, n), dtype=np.intp)
    for k in range(n):
        cw = np.cumsum(w, axis=1)
        target = rng.random(reps) * cw[:, -1]
        j = (cw <= target[:, None]).sum(axis=1)
        # j may point at an already-picked (zero-weight) slot only through
        # round-off at the top end; step back to the last live slot
        j = np.minimum(j, n - 1)
        dead = w[rows, j] == 0
        if np.any(dead):
            for r in np.flatnonzero(dead):
                live = np.flatnonzero(w[r] > 0)
                j[r] = live[np.searchsorted(live, j[r]) - 1] if j[r] > live[0] else live[0]
        order[:, k] = j
        w[rows, j] = 0.0
    return order


def batch_by_exponential_keys(values, rng: np.random.Generator) -> np.ndarray:
    """Pick orders for each row of a (reps, n) array, exponential keys."""
    x = _check_batch(values)
    keys = rng.standard_exponential(x.shape) / x
    return np.argsort(keys, axis=1, kind="stable")


def exact_sbp_law(values) -> dict:
    """Probability of every pick order (tuples of 0-based positions)."""
    x = _check_values(values)
    n = x.size
    if n > EXACT_LAW_MAX_N:
        raise SizeError(f"exact law enumerates n! orders; n={n} exceeds {EXACT_LAW_MAX_N}")
    total = float(math.fsum(x))
    law = {}
    for perm in itertools.permutations(range(n)):
        p = 1.0
        left = total
        for i in perm:
            p *= x[i] / left
            left -= x[i]
        law[perm] = p
    return law


def order_statistics(values) -> np.ndarray:
    """Increasing order statistics (stable in source position)."""
    x = np.asarray(values, dtype=float)
    return x[np.argsort(x, kind="stable")]


def ranks(values) -> np.ndarray:
    """1-based increasing ranks, ties broken by position."""
    x = np.asarray(values, dtype=float)
    r = np.empty(x.size, dtype=np.intp)
    r[np.argsort(x, kind="stable")] = np.arange(1, x.size + 1)
    return r


def invert_permutation(perm) -> np.ndarray:
    """Inverse of a 1-based permutation."""
    perm = np.asarray(perm, dtype=np.intp)
    inv = np.empty_like(perm)
    inv[perm - 1] = np.arange(1, perm.size + 1)
    return inv


def coupling_permutation(sample: SbpSample) -> CouplingPermutation:
    """J[k-1] is the order-statistic rank of X^rev[k]."""
    r = ranks(sample.source)
    J = r[sample.pick_order[::-1]]
    return CouplingPermutation(J, invert_permutation(J))


def nested_subsample(sample: SbpSample, m: int, rng: np.random.Generator) -> SbpSample:
    """Keep m uniformly chosen positions of the permutation, in pick order.

    The result's ``source`` is the chosen source entries in their original
    order and its ``pick_order`` indexes into that subset.
    """
    n = sample.n
    if not 1 <= m <= n:
        raise DomainError(f"m must lie in 1..{n}, got {m}")
    pos = np.sort(rng.choice(n, size=m, replace=False))
    picked = sample.pick_order[pos]
    subset = np.sort(picked)
    new_order = np.searchsorted(subset, picked)
    return SbpSample.from_order(sample.source[subset], new_order)
