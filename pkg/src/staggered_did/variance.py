"""Randomization variance of the DID estimator and competing estimators of it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateDesignError, InputError, SingularSystemError
from .estimator import (
    WeightTable,
    adjusted_treatment,
    compute_weights,
    design_matrix,
    panel_weights,
)
from .numerics import as_generator, solve_linear_system
from .panel import Panel, PotentialOutcomeTable, date_code

Z_95 = 1.96
DEFAULT_BOOT_REPS = 1000
DEFAULT_MAX_REDRAWS = 100


@dataclass(frozen=True)
class CollapsedOutcomes:
    """Potential and observed outcomes aggregated over periods with the weights.

    ``unit_outcomes[i, code]`` is unit i's weighted sum over periods of its
    outcomes under that date; ``means`` averages it over all units and
    ``observed_means`` over the units actually assigned that date.
    """

    unit_outcomes: np.ndarray
    means: np.ndarray
    observed_means: np.ndarray | None = None


def collapse(pot: PotentialOutcomeTable, weights: WeightTable, panel: Panel | None = None):
    Yc = np.einsum("itk,tk->ik", pot.Y, weights.gamma)
    observed = None
    if panel is not None:
        yc = collapsed_observed(panel, weights)
        sums = np.bincount(panel.codes, weights=yc, minlength=pot.T + 1)
        counts = panel.counts
        observed = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return CollapsedOutcomes(Yc, Yc.mean(axis=0), observed)


def collapsed_observed(panel: Panel, weights: WeightTable) -> np.ndarray:
    """Length-N vector of each unit's weighted outcome under its own date."""
    return (weights.gamma[:, panel.codes].T * panel.Y).sum(axis=1)


def _centered(pot, weights):
    if pot.N < 2:
        raise InputError("population variances need at least two units")
    Yc = np.einsum("itk,tk->ik", pot.Y, weights.gamma)
    return Yc - Yc.mean(axis=0)


def s2_population(pot: PotentialOutcomeTable, weights: WeightTable, a) -> float:
    """Finite-population variance of the collapsed outcome under date ``a``."""
    d = _centered(pot, weights)[:, date_code(a, pot.T)]
    return float(d @ d / (pot.N - 1))


def v2_population(pot: PotentialOutcomeTable, weights: WeightTable, a, a_prime) -> float:
    """Finite-population variance of the sum of two collapsed outcomes."""
    d = _centered(pot, weights)
    s = d[:, date_code(a, pot.T)] + d[:, date_code(a_prime, pot.T)]
    return float(s @ s / (pot.N - 1))


def s2_diff_population(pot: PotentialOutcomeTable, weights: WeightTable, a, a_prime) -> float:
    """Finite-population variance of the difference of two collapsed outcomes."""
    d = _centered(pot, weights)
    s = d[:, date_code(a_prime, pot.T)] - d[:, date_code(a, pot.T)]
    return float(s @ s / (pot.N - 1))


def _population_second_moments(pot, weights):
    d = _centered(pot, weights)
    S = d.T @ d / (pot.N - 1)  # covariance of collapsed outcomes
    s2 = np.diag(S).copy()
    v2 = s2[:, None] + s2[None, :] + 2.0 * S
    return s2, v2


def _validate_counts(counts, N, T) -> np.ndarray:
    counts = np.asarray(counts)
    if counts.shape != (T + 1,):
        raise InputError(f"expected {T + 1} date counts, got shape {counts.shape}")
    if np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise InputError("date counts must be non-negative integers")
    if int(counts.sum()) != N:
        raise InputError(f"date counts sum to {int(counts.sum())}, population has {N} units")
    return counts.astype(np.int64)


def variance_upper_bound(pot: PotentialOutcomeTable, counts) -> float:
    counts = _validate_counts(counts, pot.N, pot.T)
    w = compute_weights(pot.T, counts / pot.N)
    s2, _ = _population_second_moments(pot, w)
    present = counts > 0
    return float((s2[present] / counts[present]).sum())


def exact_variance(pot: PotentialOutcomeTable, counts) -> float:
    """Exact variance of the estimate over uniformly random assignments with these counts.

    Dates with no units carry zero weight and drop out of every term.
    """
    counts = _validate_counts(counts, pot.N, pot.T)
    N, T = pot.N, pot.T
    w = compute_weights(T, counts / N)
    s2, v2 = _population_second_moments(pot, w)
    present = counts > 0
    own = (s2[present] / counts[present]).sum()
    total = own + s2.sum() * (T - 1) / N - np.triu(v2, k=1).sum() / N
    bound_slack = 1e-9 * (1.0 + abs(own))
    if total > own + bound_slack:
        raise ArithmeticError(f"exact variance {total} exceeds its upper bound {own}")
    return float(max(total, 0.0))


def conservative_estimator(panel: Panel, weights: WeightTable | None = None) -> float:
    """Sum over dates of the within-group variance of collapsed outcomes over group size."""
    w = panel_weights(panel) if weights is None else weights
    yc = collapsed_observed(panel, w)
    total = 0.0
    for k in np.flatnonzero(panel.counts):
        n = int(panel.counts[k])
        if not np.any(w.gamma[:, k]):
            continue
        if n < 2:
            raise DegenerateDesignError(
                f"degenerate group: variance inestimable (date {_date_label(k, panel.T)} has one unit)"
            )
        vals = yc[panel.codes == k]
        total += vals.var(ddof=1) / n
    return float(total)


def _date_label(k, T):
    return "never" if k == T else str(k + 1)


def conservative_over_assignments(pot: PotentialOutcomeTable, weights: WeightTable, C) -> np.ndarray:
    """Conservative estimator for every assignment row of ``C`` (codes, M x N)."""
    C = np.asarray(C, dtype=np.int64)
    units = np.arange(pot.N)[None, :]
    gam = weights.gamma
    Yc_all = np.einsum("itk,tk->ik", pot.Y, gam)  # (N, K)
    yc = Yc_all[units, C]  # (M, N)
    counts = np.bincount(C[0], minlength=pot.T + 1)
    out = np.zeros(C.shape[0])
    for k in np.flatnonzero(counts):
        if not np.any(gam[:, k]):
            continue
        n = int(counts[k])
        if n < 2:
            raise DegenerateDesignError(
                f"degenerate group: variance inestimable (date {_date_label(k, pot.T)} has one unit)"
            )
        mask = C == k
        vals = yc[mask].reshape(C.shape[0], n)
        out += vals.var(axis=1, ddof=1) / n
    return out


def lz_variance(panel: Panel) -> float:
    """Cluster-robust (unit-clustered) sandwich variance of the exposure coefficient.

    Uses the partialled-out regressor; algebraically identical to the
    exposure element of the full dummy-variable sandwich.
    """
    wdot = adjusted_treatment(panel)
    sxx = float((wdot**2).sum())
    if sxx <= 1e-12 * panel.N:
        raise DegenerateDesignError("no exposure variation: DID estimator undefined")
    tau = float((wdot * panel.Y).sum() / sxx)
    Y = panel.Y
    ydd = Y - Y.mean(axis=0, keepdims=True) - Y.mean(axis=1, keepdims=True) + Y.mean()
    resid = ydd - tau * wdot
    scores = (wdot * resid).sum(axis=1)
    return float(scores @ scores / sxx**2)


def lz_variance_full(panel: Panel) -> float:
    """Same quantity computed from the full design matrix and its Gram inverse."""
    X = design_matrix(panel)
    y = panel.Y.ravel()
    gram = X.T @ X
    try:
        theta = solve_linear_system(gram, X.T @ y)
        e_tau = np.zeros(gram.shape[0])
        e_tau[-1] = 1.0
        row = solve_linear_system(gram, e_tau)
    except SingularSystemError as exc:
        raise DegenerateDesignError(f"collinear design ({exc})") from exc
    resid = y - X @ theta
    # unit-level score sums X_j * e_j
    scores = (X * resid[:, None]).reshape(panel.N, panel.T, -1).sum(axis=1)
    proj = scores @ row
    return float(proj @ proj)


def _check_reps(reps):
    if reps < 2:
        raise InputError("bootstrap needs at least two replicates")


def bootstrap_b1(panel: Panel, reps: int = DEFAULT_BOOT_REPS, rng=None,
                 max_redraws: int = DEFAULT_MAX_REDRAWS) -> float:
    """Unit-cluster bootstrap; adoption shares vary across resamples.

    Resamples without exposure variation are redrawn, at most
    ``max_redraws`` times per replicate.
    """
    _check_reps(reps)
    gen = as_generator(0 if rng is None else rng)
    N = panel.N
    idx = gen.integers(0, N, size=(reps, N))
    taus, bad = kernels.b1_replicates(panel.Y, panel.codes, idx)
    attempts = 1
    while bad.any():
        if attempts >= max_redraws:
            raise DegenerateDesignError(
                f"bootstrap: {int(bad.sum())} resamples still lack exposure variation "
                f"after {max_redraws} draws"
            )
        rows = np.flatnonzero(bad)
        idx_new = gen.integers(0, N, size=(rows.size, N))
        t_new, b_new = kernels.b1_replicates(panel.Y, panel.codes, idx_new)
        taus[rows] = t_new
        bad[rows] = b_new
        attempts += 1
    return float(taus.var(ddof=1))


def bootstrap_b2(panel: Panel, reps: int = DEFAULT_BOOT_REPS, rng=None,
                 weights: WeightTable | None = None, return_counts: bool = False):
    """Bootstrap resampling units within each adoption date, so group sizes are fixed.

    The weights stay at their original values, so each replicate is the sum
    over dates of resampled group means of collapsed outcomes.
    """
    _check_reps(reps)
    gen = as_generator(0 if rng is None else rng)
    w = panel_weights(panel) if weights is None else weights
    yc = collapsed_observed(panel, w)
    taus = np.zeros(reps)
    rep_counts = np.zeros((reps, panel.T + 1), dtype=np.int64)
    for k in np.flatnonzero(panel.counts):
        members = np.flatnonzero(panel.codes == k)
        n = members.size
        pick = gen.integers(0, n, size=(reps, n))
        taus += yc[members][pick].mean(axis=1)
        rep_counts[:, k] = n
    var = float(taus.var(ddof=1))
    if return_counts:
        return var, rep_counts
    return var


def critical_value(level: float = 0.95) -> float:
    if level == 0.95:
        return Z_95
    if not 0.0 < level < 1.0:
        raise InputError(f"confidence level must be in (0, 1), got {level}")
    from scipy.stats import norm

    return float(norm.ppf(0.5 + level / 2.0))


def confidence_interval(tau_hat: float, v: float, z: float = Z_95):
    """Normal interval ``tau_hat -/+ z * sqrt(v)``."""
    if not v >= 0:
        raise InputError(f"variance must be non-negative, got {v}")
    half = z * np.sqrt(v)
    return (float(tau_hat - half), float(tau_hat + half))


@dataclass(frozen=True)
class VarianceReport:
    v_exact: float | None
    v_hat_did: float
    v_lz: float
    v_b1: float
    v_b2: float

    def to_dict(self) -> dict:
        return {
            "v_exact": self.v_exact,
            "v_hat_did": self.v_hat_did,
            "v_lz": self.v_lz,
            "v_b1": self.v_b1,
            "v_b2": self.v_b2,
        }


def variance_report(panel: Panel, reps: int = DEFAULT_BOOT_REPS, rng=None,
                    pot: PotentialOutcomeTable | None = None) -> VarianceReport:
    gen = as_generator(0 if rng is None else rng)
    w = panel_weights(panel)
    v_exact = exact_variance(pot, panel.counts) if pot is not None else None
    return VarianceReport(
        v_exact=v_exact,
        v_hat_did=conservative_estimator(panel, w),
        v_lz=lz_variance(panel),
        v_b1=bootstrap_b1(panel, reps, gen),
        v_b2=bootstrap_b2(panel, reps, gen, weights=w),
    )


__all__ = [
    "CollapsedOutcomes",
    "VarianceReport",
    "bootstrap_b1",
    "bootstrap_b2",
    "collapse",
    "confidence_interval",
    "conservative_estimator",
    "critical_value",
    "exact_variance",
    "lz_variance",
    "lz_variance_full",
    "s2_diff_population",
    "s2_population",
    "v2_population",
    "variance_upper_bound",
]
