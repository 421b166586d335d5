"""Dense linear algebra and reproducible random sampling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NotPSDError, SingularSystemError

PSD_TOL = 1e-10


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by ``(seed, stream)``.

    Streams with different ids are statistically independent; the same
    pair always yields the same sequence. Replication ``r`` of a Monte
    Carlo study uses ``stream=r`` so serial and parallel runs agree.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngStream``, a ``Generator`` or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


def _square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InputError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite entries")
    return a


def solve_linear_system(a, b, rtol: float = 1e-12) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Raises SingularSystemError when a pivot of U is below
    ``rtol * max|a|``; the error carries the offending pivot index.
    """
    a = _square(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise InputError(f"right-hand side has length {b.shape[0]}, expected {a.shape[0]}")
    with warnings.catch_warnings():
        # singularity is reported below with the pivot index
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(np.abs(a).max(), 1.0)
    bad = np.flatnonzero(diag <= rtol * scale)
    if bad.size:
        k = int(bad[0])
        raise SingularSystemError(
            f"singular system: pivot {k} has magnitude {diag[k]:.3e}", pivot=k
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def cholesky_factor(s, tol: float = PSD_TOL) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == s`` for PSD ``s``.

    Pivots in ``[-tol, 0]`` are clamped to zero so exactly singular
    covariance matrices still factor; the corresponding column is zero.
    """
    s = _square(s, "covariance")
    if not np.allclose(s, s.T, rtol=0.0, atol=1e-12):
        raise InputError("covariance matrix is not symmetric")
    n = s.shape[0]
    low = np.zeros_like(s)
    for j in range(n):
        d = s[j, j] - low[j, :j] @ low[j, :j]
        if d < -tol:
            raise NotPSDError(f"not PSD: pivot {j} is {d:.3e}")
        if d <= tol:
            # column j is linearly dependent on the previous ones
            continue
        low[j, j] = np.sqrt(d)
        low[j + 1 :, j] = (s[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def sample_standard_normal(rng, size=None):
    """Standard normal draw(s)."""
    return as_generator(rng).standard_normal(size)


def sample_multivariate_normal(mu, chol, rng, size=None) -> np.ndarray:
    """Draw ``mu + L z`` with ``z`` standard normal.

    With ``size`` given, returns an array of shape ``(size, dim)``.
    """
    mu = np.asarray(mu, dtype=float)
    chol = np.asarray(chol, dtype=float)
    if chol.ndim != 2 or chol.shape != (mu.size, mu.size):
        raise InputError(
            f"dimension mismatch: mean has length {mu.size}, factor has shape {chol.shape}"
        )
    gen = as_generator(rng)
    if size is None:
        return mu + chol @ gen.standard_normal(mu.size)
    z = gen.standard_normal((size, mu.size))
    return mu + z @ chol.T


def shuffle_multiset(values, rng) -> np.ndarray:
    """Uniformly random arrangement of ``values`` (Fisher-Yates)."""
    values = np.asarray(values)
    if values.size <= 1:
        return values.copy()
    return as_generator(rng).permutation(values)
