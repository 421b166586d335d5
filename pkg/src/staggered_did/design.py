"""Random adoption-date assignment with fixed group sizes, and its exhaustive oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError, SupportTooLargeError
from .estimator import compute_weights
from .numerics import shuffle_multiset
from .panel import AdoptionAssignment, PotentialOutcomeTable

MAX_SUPPORT = 10**6


@dataclass(frozen=True)
class DesignCounts:
    """Number of units at each date code (dates 1..T, then never)."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise InputError("need counts for dates 1..T and never (T >= 1)")
        if any(c < 0 for c in counts):
            raise InputError(f"counts must be non-negative, got {counts}")
        if sum(counts) < 1:
            raise InputError("counts must include at least one unit")
        object.__setattr__(self, "counts", counts)

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def T(self) -> int:
        return len(self.counts) - 1

    @property
    def shares(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.N

    def support_size(self) -> int:
        size = math.factorial(self.N)
        for c in self.counts:
            size //= math.factorial(c)
        return size

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)


def as_counts(counts) -> DesignCounts:
    if isinstance(counts, DesignCounts):
        return counts
    return DesignCounts(tuple(np.asarray(counts).tolist()))


def sample_assignment(counts, rng) -> AdoptionAssignment:
    """Uniform draw among all assignments with exactly these group sizes."""
    d = as_counts(counts)
    base = np.repeat(np.arange(d.T + 1, dtype=np.int64), d.counts)
    return AdoptionAssignment(shuffle_multiset(base, rng), d.T)


def _guard(d: DesignCounts, limit: int) -> int:
    size = d.support_size()
    if size > limit:
        raise SupportTooLargeError(
            f"support too large: {size} assignments exceed the enumeration limit {limit}"
        )
    return size


def assignment_matrix(counts, limit: int = MAX_SUPPORT) -> np.ndarray:
    """Every admissible assignment as a row of date codes, in lexicographic order."""
    d = as_counts(counts)
    size = _guard(d, limit)
    return kernels.multiset_permutations(d.as_array(), size)


def enumerate_assignments(counts, limit: int = MAX_SUPPORT):
    """Yield every admissible assignment exactly once, lexicographically."""
    d = as_counts(counts)
    _guard(d, limit)
    cur = np.repeat(np.arange(d.T + 1, dtype=np.int64), d.counts)
    n = cur.size
    while True:
        yield AdoptionAssignment(cur.copy(), d.T)
        i = n - 2
        while i >= 0 and cur[i] >= cur[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while cur[j] <= cur[i]:
            j -= 1
        cur[i], cur[j] = cur[j], cur[i]
        cur[i + 1 :] = cur[i + 1 :][::-1].copy()


def _check_population(pot: PotentialOutcomeTable, d: DesignCounts):
    if d.N != pot.N or d.T != pot.T:
        raise InputError(
            f"counts describe {d.N} units over {d.T} periods, population is {pot.N} x {pot.T}"
        )


def oracle_estimates(pot: PotentialOutcomeTable, counts, limit: int = MAX_SUPPORT):
    """DID estimate under every admissible assignment, with the assignment matrix."""
    d = as_counts(counts)
    _check_population(pot, d)
    C = assignment_matrix(d, limit)
    w = compute_weights(d.T, d.shares)
    return kernels.taus_for_assignments(pot.Y, w.g, w.denom, C), C


def oracle_moments(pot: PotentialOutcomeTable, counts, limit: int = MAX_SUPPORT):
    """Exact mean and variance of the DID estimate by brute-force enumeration."""
    taus, _ = oracle_estimates(pot, counts, limit)
    mean = float(taus.mean())
    return mean, float(np.mean((taus - mean) ** 2))


def neyman_two_period_variance(pot: PotentialOutcomeTable, counts, tol: float = 1e-12) -> float:
    """Classical variance of a difference in means for the two-period special case.

    Requires T = 2, units adopting only at period 2 or never, and zero
    first-period outcomes.
    """
    d = as_counts(counts)
    _check_population(pot, d)
    if pot.T != 2:
        raise InputError("two-period formula requires T = 2")
    n1, n2, n_never = d.counts
    if n1 != 0 or n2 == 0 or n_never == 0:
        raise InputError("two-period formula requires adopters at period 2 and never-adopters only")
    if np.abs(pot.Y[:, 0, :]).max() > tol:
        raise InputError("two-period formula requires zero first-period outcomes")
    N = pot.N
    treated = pot.Y[:, 1, 1] - pot.Y[:, 1, 1].mean()
    control = pot.Y[:, 1, 2] - pot.Y[:, 1, 2].mean()
    return float(
        treated @ treated / (n2 * (N - 1))
        + control @ control / (n_never * (N - 1))
        - (treated - control) @ (treated - control) / (N * (N - 1))
    )
