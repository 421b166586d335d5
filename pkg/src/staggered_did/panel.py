"""Finite-population panel model: potential outcomes, adoption dates, panels.

Adoption dates are ``1..T`` or :data:`NEVER`. Arrays index them by a date
code: code ``k`` is date ``k + 1`` for ``k < T`` and code ``T`` is NEVER.
Periods in the public API are 1-based.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InputError
from .numerics import as_generator


@functools.total_ordering
class _Never:
    """The never-adopting date; compares greater than every period."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("staggered_did.NEVER")

    def __repr__(self):
        return "NEVER"

    def __str__(self):
        return "never"

    def __reduce__(self):
        return (_Never, ())


NEVER = _Never()
AdoptionDate = Union[int, _Never]


def date_code(a: AdoptionDate, T: int) -> int:
    if a is NEVER:
        return T
    if isinstance(a, (int, np.integer)) and not isinstance(a, bool) and 1 <= a <= T:
        return int(a) - 1
    raise InputError(f"adoption date must be in 1..{T} or NEVER, got {a!r}")


def code_date(k: int, T: int) -> AdoptionDate:
    return NEVER if k == T else int(k) + 1


def all_dates(T: int) -> list:
    return [*range(1, T + 1), NEVER]


def exposure(a: AdoptionDate, t: int) -> int:
    """1 if a unit adopting at ``a`` is treated in period ``t``."""
    return int(a is not NEVER and a <= t)


def exposure_matrix(T: int) -> np.ndarray:
    """``W[t-1, code]`` for every period and date code."""
    t = np.arange(1, T + 1)[:, None]
    dates = np.append(np.arange(1, T + 1), np.iinfo(np.int64).max)
    return (dates[None, :] <= t).astype(float)


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """``Y[i, t-1, code]`` = outcome of unit ``i`` in period ``t`` under a date."""

    Y: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim != 3 or Y.shape[2] != Y.shape[1] + 1:
            raise InputError(f"potential outcomes must have shape (N, T, T+1), got {Y.shape}")
        if Y.shape[0] < 1 or Y.shape[1] < 1:
            raise InputError("need at least one unit and one period")
        if not np.all(np.isfinite(Y)):
            raise InputError("potential outcomes must be finite")
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.Y.shape[1]

    def outcome(self, i: int, t: int, a: AdoptionDate) -> float:
        return float(self.Y[i, t - 1, date_code(a, self.T)])

    def slice(self, a: AdoptionDate) -> np.ndarray:
        """N x T outcomes under adoption date ``a`` for every unit."""
        return self.Y[:, :, date_code(a, self.T)]


@dataclass(frozen=True)
class AdoptionAssignment:
    """Adoption date codes for N units over a T-period window."""

    codes: np.ndarray
    T: int
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64).ravel()
        if codes.size and (codes.min() < 0 or codes.max() > self.T):
            raise InputError(f"date codes must lie in 0..{self.T}")
        codes.setflags(write=False)
        counts = np.bincount(codes, minlength=self.T + 1)
        counts.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_dates(cls, dates, T: int) -> "AdoptionAssignment":
        return cls(np.array([date_code(a, T) for a in dates], dtype=np.int64), T)

    @property
    def N(self) -> int:
        return self.codes.size

    @property
    def dates(self) -> list:
        return [code_date(k, self.T) for k in self.codes]

    def count(self, a: AdoptionDate) -> int:
        return int(self.counts[date_code(a, self.T)])


@dataclass(frozen=True)
class Panel:
    """Realized N x T outcomes together with the adoption assignment."""

    Y: np.ndarray
    assignment: AdoptionAssignment
    unit_labels: tuple | None = None
    time_labels: tuple | None = None

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim != 2:
            raise InputError("panel outcomes must be an N x T matrix")
        if Y.shape != (self.assignment.N, self.assignment.T):
            raise InputError(
                f"outcomes have shape {Y.shape} but the assignment covers "
                f"{self.assignment.N} units and {self.assignment.T} periods"
            )
        if not np.all(np.isfinite(Y)):
            raise InputError("panel outcomes must be finite")
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.Y.shape[1]

    @property
    def codes(self) -> np.ndarray:
        return self.assignment.codes

    @property
    def counts(self) -> np.ndarray:
        return self.assignment.counts

    @property
    def W(self) -> np.ndarray:
        return exposure_matrix(self.T)[:, self.codes].T

    def with_outcomes(self, Y) -> "Panel":
        return Panel(Y, self.assignment, self.unit_labels, self.time_labels)


def realize(pot: PotentialOutcomeTable, assignment: AdoptionAssignment) -> Panel:
    """Observed panel: each unit reveals the outcomes of its own date."""
    if assignment.N != pot.N or assignment.T != pot.T:
        raise InputError(
            f"assignment is {assignment.N} units x {assignment.T} periods, "
            f"table is {pot.N} x {pot.T}"
        )
    Y = pot.Y[np.arange(pot.N), :, assignment.codes]
    return Panel(Y, assignment)


def group_means(panel: Panel) -> np.ndarray:
    """T x (T+1) matrix of period means by adoption date, 0 for empty groups."""
    K = panel.T + 1
    sums = np.zeros((panel.T, K))
    for t in range(panel.T):
        sums[t] = np.bincount(panel.codes, weights=panel.Y[:, t], minlength=K)
    counts = panel.counts
    return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)


def group_mean(panel: Panel, t: int, a: AdoptionDate) -> float:
    k = date_code(a, panel.T)
    members = panel.codes == k
    if not members.any():
        return 0.0
    return float(panel.Y[members, t - 1].mean())


def population_means(pot: PotentialOutcomeTable) -> np.ndarray:
    """T x (T+1) matrix of population means of each potential outcome."""
    return pot.Y.mean(axis=0)


def population_mean(pot: PotentialOutcomeTable, t: int, a: AdoptionDate) -> float:
    return float(pot.Y[:, t - 1, date_code(a, pot.T)].mean())


def tau_population(pot, t: int, a: AdoptionDate, a_prime: AdoptionDate) -> float:
    """Average effect in period ``t`` of moving every unit from ``a`` to ``a_prime``."""
    return population_mean(pot, t, a_prime) - population_mean(pot, t, a)


def tau_hat(panel: Panel, t: int, a: AdoptionDate, a_prime: AdoptionDate) -> float:
    return group_mean(panel, t, a_prime) - group_mean(panel, t, a)


def check_no_anticipation(pot: PotentialOutcomeTable, tol: float = 1e-12) -> list:
    """(i, t, a) with a > t whose outcome differs from the never-adopt outcome."""
    out = []
    never = pot.Y[:, :, pot.T]
    for t in range(1, pot.T + 1):
        for a in range(t + 1, pot.T + 1):
            diff = np.abs(pot.Y[:, t - 1, a - 1] - never[:, t - 1])
            out.extend((int(i), t, a) for i in np.flatnonzero(diff > tol))
    return sorted(out)


def check_invariance_to_history(pot: PotentialOutcomeTable, tol: float = 1e-12) -> list:
    """(i, t, a) with a <= t whose outcome differs from the adopt-at-1 outcome."""
    out = []
    first = pot.Y[:, :, 0]
    for t in range(1, pot.T + 1):
        for a in range(2, t + 1):
            diff = np.abs(pot.Y[:, t - 1, a - 1] - first[:, t - 1])
            out.extend((int(i), t, a) for i in np.flatnonzero(diff > tol))
    return sorted(out)


def check_constant_effects(pot: PotentialOutcomeTable, tol: float = 1e-12) -> list:
    """Violations of effect homogeneity across units and of the 1-vs-never effect over time.

    Returns ``("unit", i, t, a, a')`` when unit ``i``'s contrast between
    dates ``a`` and ``a'`` in period ``t`` differs from unit 0's, and
    ``("time", i, t)`` when unit ``i``'s effect of adopting at 1 versus
    never in period ``t`` differs from its period-1 effect.
    """
    out = []
    Y, T = pot.Y, pot.T
    dates = all_dates(T)
    for t in range(T):
        for k in range(T + 1):
            for k2 in range(k + 1, T + 1):
                contrast = Y[:, t, k] - Y[:, t, k2]
                bad = np.flatnonzero(np.abs(contrast - contrast[0]) > tol)
                out.extend(("unit", int(i), t + 1, dates[k], dates[k2]) for i in bad)
    effect = Y[:, :, 0] - Y[:, :, T]
    drift = np.abs(effect - effect[:, :1]) > tol
    for i, t in zip(*np.nonzero(drift)):
        out.append(("time", int(i), int(t) + 1))
    return out


def pretest_independence(panel: Panel, n_perm: int, rng) -> float:
    """Permutation p-value for first-period balance between date-2 and never adopters.

    Under random adoption dates and no anticipation, first-period outcomes
    are independent of the adoption date within these two groups. The
    statistic is the absolute difference in first-period means; labels are
    permuted within the pooled two-group subsample.
    """
    if n_perm < 1:
        raise InputError("number of permutations must be positive")
    if panel.T < 2:
        raise InputError("pretest inapplicable: needs at least two periods")
    early = panel.codes == 1
    never = panel.codes == panel.T
    n_early, n_never = int(early.sum()), int(never.sum())
    if n_early == 0 or n_never == 0:
        raise InputError(
            "pretest inapplicable: needs units adopting at period 2 and never-adopters"
        )
    y = panel.Y[early | never, 0]
    is_early = early[early | never]
    n = y.size
    observed = abs(y[is_early].mean() - y[~is_early].mean())

    gen = as_generator(rng)
    keys = gen.random((n_perm, n))
    perm = np.argsort(keys, axis=1)[:, :n_early]
    total = y.sum()
    s_early = y[perm].sum(axis=1)
    stats = np.abs(s_early / n_early - (total - s_early) / n_never)
    slack = 1e-12 * max(1.0, np.abs(y).max())
    hits = int(np.count_nonzero(stats >= observed - slack))
    return (1 + hits) / (1 + n_perm)


_HEADER = ("unit", "time", "outcome", "adoption")


def _parse_adoption(raw: str, lineno: int):
    raw = raw.strip()
    if raw == "never":
        return NEVER
    try:
        value = int(raw)
    except ValueError:
        raise InputError(
            f"line {lineno}: adoption must be a positive integer or 'never', got {raw!r}"
        ) from None
    if value < 1:
        raise InputError(f"line {lineno}: adoption must be positive, got {value}")
    return value


def read_panel_csv(path) -> Panel:
    """Read a long-format ``unit,time,outcome,adoption`` file.

    Times must be the integers ``1..T`` and every (unit, time) pair must be
    present exactly once. Adoption is constant within a unit.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("line 1: empty file") from None
        if tuple(h.strip() for h in header) != _HEADER:
            raise InputError(f"line 1: header must be {','.join(_HEADER)}, got {','.join(header)}")

        cells = {}
        adoption = {}
        units = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise InputError(f"line {lineno}: expected 4 fields, got {len(row)}")
            unit = row[0].strip()
            if not unit:
                raise InputError(f"line {lineno}: empty unit label")
            try:
                t = int(row[1])
            except ValueError:
                raise InputError(f"line {lineno}: time must be an integer, got {row[1]!r}") from None
            if t < 1:
                raise InputError(f"line {lineno}: time must be >= 1, got {t}")
            try:
                y = float(row[2])
            except ValueError:
                raise InputError(f"line {lineno}: outcome is not a number: {row[2]!r}") from None
            if not np.isfinite(y):
                raise InputError(f"line {lineno}: outcome must be finite")
            a = _parse_adoption(row[3], lineno)
            if (unit, t) in cells:
                raise InputError(f"line {lineno}: duplicate observation for unit {unit}, time {t}")
            if unit in adoption:
                if adoption[unit] != a:
                    raise InputError(
                        f"line {lineno}: unit {unit} changes adoption date "
                        f"from {adoption[unit]} to {a}"
                    )
            else:
                adoption[unit] = a
                units.append(unit)
            cells[(unit, t)] = y

    if not units:
        raise InputError("no observations")
    T = max(t for _, t in cells)
    for unit in units:
        for t in range(1, T + 1):
            if (unit, t) not in cells:
                raise InputError(f"incomplete panel: missing (unit={unit}, time={t})")
    for unit in units:
        a = adoption[unit]
        if a is not NEVER and a > T:
            raise InputError(f"unit {unit}: adoption date {a} is after the last period {T}")

    Y = np.array([[cells[(u, t)] for t in range(1, T + 1)] for u in units])
    assignment = AdoptionAssignment.from_dates([adoption[u] for u in units], T)
    return Panel(Y, assignment, tuple(units), tuple(range(1, T + 1)))


def write_panel_csv(panel: Panel, path) -> None:
    units = panel.unit_labels or tuple(str(i + 1) for i in range(panel.N))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_HEADER)
        for i, unit in enumerate(units):
            a = code_date(panel.codes[i], panel.T)
            for t in range(panel.T):
                writer.writerow([unit, t + 1, repr(float(panel.Y[i, t])), str(a)])
