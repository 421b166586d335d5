"""Monte Carlo study of variance estimators over Designs A-D with T = 3.

Each configuration draws one fixed population of potential outcomes and
then re-randomizes adoption dates (with fixed group sizes) ``n_sims`` times.
Replication ``r`` draws everything from random stream ``r``; the
population uses stream 0.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .design import DesignCounts, sample_assignment
from .errors import InputError
from .estimator import compute_weights, did_estimate, expected_estimand
from .numerics import RngStream, cholesky_factor, sample_multivariate_normal
from .panel import PotentialOutcomeTable, realize
from .variance import (
    bootstrap_b1,
    bootstrap_b2,
    confidence_interval,
    conservative_estimator,
    critical_value,
    exact_variance,
    lz_variance,
)

T_SIM = 3
DESIGNS = ("A", "B", "C", "D")
PI_VARIANTS = ("I", "II")
METHODS = ("exact", "did_hat", "lz", "b1", "b2")

# (t, a) slot order of the 9-vector: a in (2, 3, never) within each period
_SLOT_CODES = (1, 2, 3)

_MU_A = (0.0, 0.0, 0.0, 4.0, 3.0, 3.0, 2.0, 2.0, 1.0)
_MU_BCD = (0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 2.0, 11.0, 1.0)


def _block_equicorrelated(rho: float) -> np.ndarray:
    block = np.full((3, 3), rho)
    np.fill_diagonal(block, 1.0)
    return np.kron(np.eye(3), block)


def design_moments(design: str, sigma: float = 1.0):
    """Mean vector and covariance of the 9 potential outcomes per unit."""
    if design == "A":
        mu, cov = _MU_A, np.eye(9)
    elif design == "B":
        mu, cov = _MU_BCD, np.diag([1.0, 10.0, 1, 1, 1, 1, 1, 1, 1])
    elif design == "C":
        mu, cov = _MU_BCD, _block_equicorrelated(0.9)
    elif design == "D":
        mu, cov = _MU_BCD, _block_equicorrelated(-0.4)
    else:
        raise InputError(f"unknown design {design!r}; expected one of {DESIGNS}")
    return np.array(mu), sigma**2 * cov


def generate_population(design: str, N: int, sigma: float, rng) -> PotentialOutcomeTable:
    """Fixed population for a design; outcomes under adoption at period 1 are zero."""
    mu, cov = design_moments(design, sigma)
    draws = sample_multivariate_normal(mu, cholesky_factor(cov), rng, size=N)
    Y = np.zeros((N, T_SIM, T_SIM + 1))
    for t in range(T_SIM):
        for j, code in enumerate(_SLOT_CODES):
            Y[:, t, code] = draws[:, 3 * t + j]
    return PotentialOutcomeTable(Y)


def counts_from_pi(pi_variant: str, N: int) -> DesignCounts:
    """Group sizes for dates (1, 2, 3, never); variant I uses shares (0, 2/3, 0, 1/3)."""
    if pi_variant == "I":
        num, den = (0, 2, 0, 1), 3
    elif pi_variant == "II":
        num, den = (0, 5, 4, 1), 10
    else:
        raise InputError(f"unknown share variant {pi_variant!r}; expected I or II")
    if N % den:
        raise InputError(f"share variant {pi_variant} needs N divisible by {den}, got {N}")
    return DesignCounts(tuple(N * k // den for k in num))


@dataclass(frozen=True)
class SimConfig:
    design: str = "A"
    pi_variant: str = "I"
    N: int = 30
    T: int = T_SIM
    sigma: float = 1.0
    n_sims: int = 2000
    n_boot: int = 1000
    seed: int = 0
    level: float = 0.95

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise InputError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        if self.T != T_SIM:
            raise InputError(f"simulation designs are defined for T = {T_SIM} only")
        if self.n_sims < 1:
            raise InputError("n_sims must be at least 1")
        if self.n_boot < 2:
            raise InputError("n_boot must be at least 2")
        if self.sigma < 0:
            raise InputError("sigma must be non-negative")
        if not 0 < self.level < 1:
            raise InputError("level must be in (0, 1)")
        counts_from_pi(self.pi_variant, self.N)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InputError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class SimReport:
    """Averages of each variance and coverage of each normal interval."""

    design: str
    pi_variant: str
    N: int
    n_sims: int
    estimand: float
    v_exact: float
    mean_variance: dict
    coverage: dict
    sd_variance: dict
    mean_tau: float
    var_tau: float

    CSV_COLUMNS = (
        "design", "pi", "N", "v_exact", "cov_exact", "v_did_hat", "cov_did_hat",
        "v_lz", "cov_lz", "v_b1", "cov_b1", "v_b2", "cov_b2",
    )

    def csv_row(self) -> list:
        row = [self.design, self.pi_variant, str(self.N), repr(self.v_exact)]
        row.append(repr(self.coverage["exact"]))
        for m in METHODS[1:]:
            row += [repr(self.mean_variance[m]), repr(self.coverage[m])]
        return row

    def to_dict(self) -> dict:
        return asdict(self)


def _replications(config: SimConfig, pot, counts, weights, v_exact, stream_ids):
    out = np.zeros((len(stream_ids), 1 + len(METHODS)))
    for row, r in enumerate(stream_ids):
        gen = RngStream(config.seed, int(r)).generator()
        panel = realize(pot, sample_assignment(counts, gen))
        tau = did_estimate(panel)
        variances = (
            v_exact,
            conservative_estimator(panel, weights),
            lz_variance(panel),
            bootstrap_b1(panel, config.n_boot, gen),
            bootstrap_b2(panel, config.n_boot, gen, weights=weights),
        )
        out[row, 0] = tau
        out[row, 1:] = variances
    return out


def _replications_star(args):
    return _replications(*args)


def run_simulation(config: SimConfig, workers: int = 1) -> SimReport:
    """Run one configuration. Results do not depend on ``workers``."""
    pot = generate_population(config.design, config.N, config.sigma, RngStream(config.seed, 0))
    counts = counts_from_pi(config.pi_variant, config.N)
    weights = compute_weights(T_SIM, counts.shares)
    estimand = expected_estimand(pot, counts.shares, "full")
    v_exact = exact_variance(pot, counts.as_array())
    z = critical_value(config.level)

    streams = np.arange(1, config.n_sims + 1)
    common = (config, pot, counts, weights, v_exact)
    if workers > 1 and config.n_sims > 1:
        chunks = np.array_split(streams, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replications_star, [(*common, c) for c in chunks]))
        records = np.vstack(parts)
    else:
        records = _replications(*common, streams)

    taus = records[:, 0]
    mean_variance, coverage, sd_variance = {}, {}, {}
    for j, m in enumerate(METHODS, start=1):
        v = records[:, j]
        hits = 0
        for tau, vv in zip(taus, v):
            lo, hi = confidence_interval(tau, vv, z)
            hits += bool(lo <= estimand <= hi)
        mean_variance[m] = float(v.mean())
        sd_variance[m] = float(v.std(ddof=1)) if v.size > 1 else 0.0
        coverage[m] = float(hits / taus.size)
    return SimReport(
        design=config.design,
        pi_variant=config.pi_variant,
        N=config.N,
        n_sims=config.n_sims,
        estimand=float(estimand),
        v_exact=float(v_exact),
        mean_variance=mean_variance,
        coverage=coverage,
        sd_variance=sd_variance,
        mean_tau=float(taus.mean()),
        var_tau=float(taus.var(ddof=1)) if taus.size > 1 else 0.0,
    )


def table1_configs(base_seed: int, n_sims: int, n_boot: int, sigma: float = 1.0) -> list:
    configs = []
    for N in (30, 150):
        for pi_variant in PI_VARIANTS:
            for design in DESIGNS:
                configs.append(
                    SimConfig(design=design, pi_variant=pi_variant, N=N, sigma=sigma,
                              n_sims=n_sims, n_boot=n_boot, seed=base_seed + len(configs))
                )
    return configs


def table1(base_seed: int = 0, n_sims: int = 2000, n_boot: int = 1000,
           sigma: float = 1.0, workers: int = 1) -> list:
    """All 16 rows: designs A-D within share variants I, II within N = 30, 150."""
    return [run_simulation(c, workers) for c in table1_configs(base_seed, n_sims, n_boot, sigma)]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SimReport.CSV_COLUMNS)
    for rep in reports:
        writer.writerow(rep.csv_row())
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
