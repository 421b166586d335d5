"""Hot loops with a numba path and an equivalent pure-numpy path.

Each public kernel dispatches on :data:`staggered_did._accel.USE_NUMBA`;
both implementations are importable for testing and benchmarking.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import njit

DENOM_TOL = 1e-12


# -- cluster bootstrap with re-estimated shares -----------------------------


@njit
def _b1_numba(Y, codes, idx):
    R, N = idx.shape
    T = Y.shape[1]
    K = T + 1
    taus = np.zeros(R)
    degenerate = np.zeros(R, dtype=np.bool_)
    counts = np.zeros(K)
    sums = np.zeros((T, K))
    pi = np.zeros(K)
    cum = np.zeros(T)
    for r in range(R):
        counts[:] = 0.0
        sums[:, :] = 0.0
        for j in range(N):
            i = idx[r, j]
            k = codes[i]
            counts[k] += 1.0
            for t in range(T):
                sums[t, k] += Y[i, t]
        mean_date = 0.0
        acc = 0.0
        for k in range(K):
            pi[k] = counts[k] / N
            if k < T:
                mean_date += (k + 1) * pi[k]
                acc += pi[k]
                cum[k] = acc
        num = 0.0
        den = 0.0
        for t in range(T):
            for k in range(K):
                w = 1.0 if (k < T and k <= t) else 0.0
                d = float(k + 1) if k < T else 0.0
                nv = 1.0 if k == T else 0.0
                g = (w - cum[t]) + (d - mean_date) / T + (T + 1.0) / T * (nv - pi[T])
                num += g * sums[t, k]
                den += pi[k] * g * g
        if den <= DENOM_TOL:
            degenerate[r] = True
        else:
            taus[r] = num / (N * den)
    return taus, degenerate


def _b1_numpy(Y, codes, idx):
    R, N = idx.shape
    T = Y.shape[1]
    K = T + 1
    key = (np.arange(R)[:, None] * K + codes[idx]).ravel()
    counts = np.bincount(key, minlength=R * K).reshape(R, K).astype(float)
    sums = np.empty((R, T, K))
    for t in range(T):
        sums[:, t, :] = np.bincount(key, weights=Y[idx, t].ravel(), minlength=R * K).reshape(R, K)
    pi = counts / N
    cum = np.cumsum(pi[:, :T], axis=1)
    finite_date = np.append(np.arange(1, T + 1), 0.0)
    mean_date = pi @ finite_date
    W = (np.arange(K)[None, :] <= np.arange(T)[:, None]) & (np.arange(K)[None, :] < T)
    is_never = np.arange(K) == T
    g = (
        (W[None, :, :] - cum[:, :, None])
        + (finite_date[None, None, :] - mean_date[:, None, None]) / T
        + (T + 1.0) / T * (is_never[None, None, :] - pi[:, None, T:])
    )
    num = (g * sums).sum(axis=(1, 2))
    den = (pi[:, None, :] * g**2).sum(axis=(1, 2))
    degenerate = den <= DENOM_TOL
    taus = np.divide(num, N * den, out=np.zeros(R), where=~degenerate)
    return taus, degenerate


def b1_replicates(Y, codes, idx):
    """DID estimates on unit resamples ``idx`` (R x N) with shares re-estimated.

    Returns the estimates and a mask of resamples without exposure variation.
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if _accel.USE_NUMBA:
        return _b1_numba(Y, codes, idx)
    return _b1_numpy(Y, codes, idx)


# -- DID estimates over an explicit set of assignments ----------------------


@njit
def _taus_numba(Ypot, g, denom, C):
    M, N = C.shape
    T = Ypot.shape[1]
    out = np.zeros(M)
    scale = N * denom
    for m in range(M):
        acc = 0.0
        for i in range(N):
            k = C[m, i]
            for t in range(T):
                acc += g[t, k] * Ypot[i, t, k]
        out[m] = acc / scale
    return out


def _taus_numpy(Ypot, g, denom, C, chunk=65536):
    M, N = C.shape
    units = np.arange(N)[None, :]
    out = np.empty(M)
    for lo in range(0, M, chunk):
        c = C[lo : lo + chunk]
        y = Ypot[units, :, c]  # (m, N, T)
        w = g.T[c]  # (m, N, T)
        out[lo : lo + chunk] = (w * y).sum(axis=(1, 2)) / (N * denom)
    return out


def taus_for_assignments(Ypot, g, denom, C):
    """DID estimate for every row of the assignment matrix ``C`` (codes, M x N).

    All rows must share the date counts that produced ``g`` and ``denom``.
    """
    Ypot = np.ascontiguousarray(Ypot, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.int64)
    if _accel.USE_NUMBA:
        return _taus_numba(Ypot, g, float(denom), C)
    return _taus_numpy(Ypot, g, float(denom), C)


# -- multiset permutations in lexicographic order ---------------------------


@njit
def _multiset_numba(first, M):
    N = first.size
    out = np.empty((M, N), dtype=np.int64)
    cur = first.copy()
    for m in range(M):
        out[m] = cur
        # next permutation
        i = N - 2
        while i >= 0 and cur[i] >= cur[i + 1]:
            i -= 1
        if i < 0:
            break
        j = N - 1
        while cur[j] <= cur[i]:
            j -= 1
        tmp = cur[i]
        cur[i] = cur[j]
        cur[j] = tmp
        lo = i + 1
        hi = N - 1
        while lo < hi:
            tmp = cur[lo]
            cur[lo] = cur[hi]
            cur[hi] = tmp
            lo += 1
            hi -= 1
    return out


@lru_cache(maxsize=None)
def _multiset_block(counts: tuple) -> np.ndarray:
    n = sum(counts)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    blocks = []
    for k, c in enumerate(counts):
        if c == 0:
            continue
        rest = list(counts)
        rest[k] -= 1
        tail = _multiset_block(tuple(rest))
        head = np.full((tail.shape[0], 1), k, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    return np.vstack(blocks)


def _multiset_numpy(counts):
    out = _multiset_block(tuple(int(c) for c in counts)).copy()
    _multiset_block.cache_clear()
    return out


def multiset_permutations(counts, size: int) -> np.ndarray:
    """All arrangements of ``counts[k]`` copies of code ``k``, lexicographically.

    ``size`` must equal the multinomial coefficient of ``counts``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if _accel.USE_NUMBA:
        first = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
        return _multiset_numba(first, int(size))
    return _multiset_numpy(counts)
