"""Two-way fixed effects DID estimator and its adoption-group weight representation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, InputError, SingularSystemError
from .numerics import solve_linear_system
from .panel import (
    AdoptionAssignment,
    Panel,
    PotentialOutcomeTable,
    exposure_matrix,
    group_means,
    population_means,
)

DENOM_TOL = 1e-12


def adoption_shares(assignment: AdoptionAssignment) -> np.ndarray:
    """Fraction of units at each date code (length T+1)."""
    if assignment.N < 1:
        raise InputError("need at least one unit")
    return assignment.counts / assignment.N


def _check_shares(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size < 2:
        raise InputError("shares must be a vector over dates 1..T and never")
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise InputError(f"shares must be non-negative and sum to one, got {pi.tolist()}")
    return pi


def compute_g(T: int, pi) -> np.ndarray:
    """Doubly demeaned exposure ``g[t-1, code]`` as a function of the date shares.

    For any assignment with shares ``pi`` the two-way demeaned treatment of
    unit i in period t equals ``g[t-1, code(A_i)]``.
    """
    pi = _check_shares(pi)
    if pi.size != T + 1:
        raise InputError(f"expected {T + 1} shares for T={T}, got {pi.size}")
    W = exposure_matrix(T)
    cum = np.cumsum(pi[:T])  # share treated by period t
    finite_date = np.append(np.arange(1, T + 1), 0.0)
    mean_date = finite_date @ pi
    is_never = np.zeros(T + 1)
    is_never[T] = 1.0
    return (
        (W - cum[:, None])
        + (finite_date - mean_date)[None, :] / T
        + (T + 1) / T * (is_never - pi[T])[None, :]
    )


@dataclass(frozen=True)
class WeightTable:
    """Non-stochastic weights on the adoption-group period means.

    ``gamma[t-1, code]`` multiplies the mean outcome of date-``code`` units in
    period t. ``gamma_plus[t-1]`` sums the weights of dates already adopted by
    period t, ``gamma_minus[t-1]`` those of later dates.
    """

    T: int
    pi: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    denom: float

    def to_dict(self) -> dict:
        from .panel import all_dates

        dates = [str(a) for a in all_dates(self.T)]
        return {
            "dates": dates,
            "pi": self.pi.tolist(),
            "gamma": self.gamma.tolist(),
            "gamma_plus": self.gamma_plus.tolist(),
            "gamma_minus": self.gamma_minus.tolist(),
            "denom": float(self.denom),
        }


def compute_weights(T: int, pi) -> WeightTable:
    pi = _check_shares(pi)
    g = compute_g(T, pi)
    denom = float((pi[None, :] * g**2).sum())
    if denom <= DENOM_TOL:
        raise DegenerateDesignError("no exposure variation: DID estimator undefined")
    gamma = pi[None, :] * g / denom
    treated = exposure_matrix(T).astype(bool)
    gamma_plus = np.where(treated, gamma, 0.0).sum(axis=1)
    gamma_minus = np.where(treated, 0.0, gamma).sum(axis=1)
    return WeightTable(T, pi, g, gamma, gamma_plus, gamma_minus, denom)


def panel_weights(panel: Panel) -> WeightTable:
    return compute_weights(panel.T, adoption_shares(panel.assignment))


def adjusted_treatment(panel: Panel) -> np.ndarray:
    """N x T doubly demeaned exposure of the realized panel."""
    g = compute_g(panel.T, adoption_shares(panel.assignment))
    return g[:, panel.codes].T


def did_estimate(panel: Panel) -> float:
    """Closed-form two-way fixed effects estimate ``sum(Wdot*Y) / sum(Wdot**2)``."""
    wdot = adjusted_treatment(panel)
    denom = float((wdot**2).sum())
    if denom <= DENOM_TOL * panel.N:
        raise DegenerateDesignError("no exposure variation: DID estimator undefined")
    return float((wdot * panel.Y).sum() / denom)


def did_estimate_via_weights(panel: Panel) -> float:
    w = panel_weights(panel)
    return float((w.gamma * group_means(panel)).sum())


@dataclass(frozen=True)
class Decomposition:
    """Split of the estimate into contrasts by exposure status.

    ``term_current`` weighs adopt-at-1 versus never contrasts, ``term_future``
    never versus not-yet-adopted dates, ``term_past`` already-adopted dates
    versus adopt-at-1.
    """

    term_current: float
    term_future: float
    term_past: float
    total: float

    def to_dict(self) -> dict:
        return {
            "term_current": self.term_current,
            "term_future": self.term_future,
            "term_past": self.term_past,
            "total": self.total,
        }


def _three_terms(weights: WeightTable, means: np.ndarray):
    """Weighted contrasts of a T x (T+1) matrix of (group or population) means."""
    T = weights.T
    gamma = weights.gamma
    treated = exposure_matrix(T).astype(bool)
    first = means[:, [0]]
    never = means[:, [T]]
    current = float(weights.gamma_plus @ (first - never).ravel())
    future = float(np.where(~treated, gamma * (means - never), 0.0).sum())
    past = -float(np.where(treated, gamma * (first - means), 0.0).sum())
    return current, future, past


def decompose(panel: Panel) -> Decomposition:
    w = panel_weights(panel)
    current, future, past = _three_terms(w, group_means(panel))
    return Decomposition(current, future, past, current + future + past)


def design_matrix(panel: Panel) -> np.ndarray:
    """Rows ``(1, unit dummies 1..N-1, period dummies 1..T-1, W)`` in unit-major order."""
    N, T = panel.N, panel.T
    X = np.zeros((N * T, N + T))
    X[:, 0] = 1.0
    unit = np.repeat(np.arange(N), T)
    period = np.tile(np.arange(T), N)
    keep = unit < N - 1
    X[np.flatnonzero(keep), 1 + unit[keep]] = 1.0
    keep = period < T - 1
    X[np.flatnonzero(keep), N + period[keep]] = 1.0
    X[:, -1] = panel.W.ravel()
    return X


def did_estimate_via_ols(panel: Panel):
    """Least squares on unit and period dummies plus exposure.

    Returns the exposure coefficient and the N x T residual matrix.
    """
    X = design_matrix(panel)
    y = panel.Y.ravel()
    try:
        theta = solve_linear_system(X.T @ X, X.T @ y)
    except SingularSystemError as exc:
        raise DegenerateDesignError(f"collinear design ({exc})") from exc
    resid = (y - X @ theta).reshape(panel.N, panel.T)
    return float(theta[-1]), resid


MODES = ("full", "no_anticipation", "binary")


def expected_estimand(pot: PotentialOutcomeTable, pi, mode: str = "full") -> float:
    """Randomization expectation of the estimate, as a weighted sum of average effects.

    ``full`` holds under random adoption alone; ``no_anticipation`` and
    ``binary`` are the simplified forms that are valid once the
    corresponding exclusion restrictions hold.
    """
    w = compute_weights(pot.T, pi)
    means = population_means(pot)
    T = pot.T
    never = means[:, [T]]
    if mode == "full":
        return float(sum(_three_terms(w, means)))
    if mode == "no_anticipation":
        treated = exposure_matrix(T).astype(bool)
        return float(np.where(treated, w.gamma * (means - never), 0.0).sum())
    if mode == "binary":
        return float(w.gamma_plus @ (means[:, 0] - means[:, T]))
    raise InputError(f"unknown estimand mode {mode!r}; expected one of {MODES}")
