"""Brute-force reference computations, deliberately independent of the package internals."""

import itertools

import numpy as np


def demeaned_exposure(W):
    """Two-way demeaning of an explicit N x T exposure matrix."""
    W = np.asarray(W, dtype=float)
    return W - W.mean(axis=0, keepdims=True) - W.mean(axis=1, keepdims=True) + W.mean()


def exposure_from_dates(dates, T):
    """dates: list of ints (1..T) or None for never."""
    return np.array([[1.0 if (a is not None and a <= t) else 0.0 for t in range(1, T + 1)]
                     for a in dates])


def ols_tau(Y, W):
    """Coefficient on W from lstsq with a full set of unit and period dummies."""
    N, T = Y.shape
    rows = []
    for i in range(N):
        for t in range(T):
            x = np.zeros(N + T + 1)
            x[i] = 1.0
            x[N + t] = 1.0
            x[-1] = W[i, t]
            rows.append(x)
    X = np.array(rows)
    coef, *_ = np.linalg.lstsq(X, Y.ravel(), rcond=None)
    return coef[-1], Y.ravel() - X @ coef


def distinct_arrangements(values):
    return sorted(set(itertools.permutations(values)))


def enumerate_tau(Ypot, base_codes):
    """tau_hat over all distinct arrangements of base_codes, via explicit demeaning.

    Ypot: (N, T, T+1) with code T meaning never.
    """
    N, T, K = Ypot.shape
    out = []
    for arr in distinct_arrangements(tuple(base_codes)):
        dates = [None if k == T else k + 1 for k in arr]
        W = exposure_from_dates(dates, T)
        Wd = demeaned_exposure(W)
        Y = np.array([Ypot[i, :, arr[i]] for i in range(N)])
        out.append((Wd * Y).sum() / (Wd**2).sum())
    return np.array(out)


def sandwich_tau(Y, W):
    """Unit-clustered sandwich for the W coefficient from an explicit dummy regression."""
    N, T = Y.shape
    X = np.zeros((N * T, N + T))
    X[:, 0] = 1.0
    for i in range(N):
        for t in range(T):
            j = i * T + t
            if i < N - 1:
                X[j, 1 + i] = 1.0
            if t < T - 1:
                X[j, N + t] = 1.0
            X[j, -1] = W[i, t]
    coef, *_ = np.linalg.lstsq(X, Y.ravel(), rcond=None)
    e = Y.ravel() - X @ coef
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((N + T, N + T))
    for i in range(N):
        s = X[i * T:(i + 1) * T].T @ e[i * T:(i + 1) * T]
        meat += np.outer(s, s)
    return (bread @ meat @ bread)[-1, -1]
