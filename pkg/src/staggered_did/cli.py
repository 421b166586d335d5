"""Command-line interface.

Exit codes: 0 success, 1 failed oracle check, 2 input or validation error,
3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .design import DesignCounts, oracle_estimates
from .errors import DegenerateDesignError, InputError
from .estimator import (
    compute_weights,
    decompose,
    did_estimate,
    expected_estimand,
    panel_weights,
)
from .numerics import RngStream
from .panel import PotentialOutcomeTable, all_dates, exposure_matrix, pretest_independence, read_panel_csv
from .sim import SimConfig, reports_to_csv, reports_to_json, run_simulation, table1
from .variance import (
    bootstrap_b1,
    bootstrap_b2,
    confidence_interval,
    conservative_estimator,
    conservative_over_assignments,
    exact_variance,
    lz_variance,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3
ORACLE_TOL = 1e-9


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _method_entry(tau, compute):
    try:
        v = compute()
    except DegenerateDesignError as exc:
        return {"variance": None, "ci": None, "error": str(exc)}
    lo, hi = confidence_interval(tau, v)
    return {"variance": v, "ci": [lo, hi]}


def estimate_report(panel, boot_reps=1000, seed=0, skip_bootstrap=False) -> dict:
    tau = did_estimate(panel)
    weights = panel_weights(panel)
    parts = decompose(panel)
    gen = RngStream(seed).generator()
    variances = {
        "did_hat": _method_entry(tau, lambda: conservative_estimator(panel, weights)),
        "lz": _method_entry(tau, lambda: lz_variance(panel)),
    }
    if not skip_bootstrap:
        variances["b1"] = _method_entry(tau, lambda: bootstrap_b1(panel, boot_reps, gen))
        variances["b2"] = _method_entry(
            tau, lambda: bootstrap_b2(panel, boot_reps, gen, weights=weights)
        )
    dates = [str(a) for a in all_dates(panel.T)]
    return {
        "n_units": panel.N,
        "n_periods": panel.T,
        "counts": dict(zip(dates, (int(c) for c in panel.counts))),
        "tau_hat": tau,
        "decomposition": parts.to_dict(),
        "variances": variances,
        "weights": weights.to_dict(),
        "bootstrap": None if skip_bootstrap else {"reps": boot_reps, "seed": seed},
    }


def _fmt(x):
    return "NA" if x is None else f"{x:.6f}"


def estimate_table(report: dict) -> str:
    lines = [
        f"units: {report['n_units']}  periods: {report['n_periods']}",
        "counts: " + "  ".join(f"{a}={n}" for a, n in report["counts"].items()),
        f"tau_hat: {_fmt(report['tau_hat'])}",
        "decomposition: "
        + "  ".join(f"{k}={_fmt(v)}" for k, v in report["decomposition"].items()),
        "",
        f"{'method':<8} {'variance':>12} {'ci_low':>12} {'ci_high':>12}",
    ]
    for name, entry in report["variances"].items():
        ci = entry["ci"] or (None, None)
        lines.append(f"{name:<8} {_fmt(entry['variance']):>12} {_fmt(ci[0]):>12} {_fmt(ci[1]):>12}")
    w = report["weights"]
    lines += ["", "gamma (rows: periods, columns: " + ", ".join(w["dates"]) + ")"]
    for t, row in enumerate(w["gamma"], start=1):
        lines.append(f"  t={t}: " + " ".join(f"{g:>10.6f}" for g in row))
    return "\n".join(lines) + "\n"


def estimate_csv(report: dict) -> str:
    rows = ["quantity,value,ci_low,ci_high", f"tau_hat,{report['tau_hat']!r},,"]
    for name, entry in report["variances"].items():
        if entry["ci"] is None:
            rows.append(f"v_{name},,,")
        else:
            lo, hi = entry["ci"]
            rows.append(f"v_{name},{entry['variance']!r},{lo!r},{hi!r}")
    return "\n".join(rows) + "\n"


def cmd_estimate(args) -> str:
    if args.boot_reps < 2 and not args.skip_bootstrap:
        raise InputError("--boot-reps must be at least 2")
    panel = read_panel_csv(args.panel)
    report = estimate_report(panel, args.boot_reps, args.seed, args.skip_bootstrap)
    if args.format == "json":
        return _dump(report)
    if args.format == "csv":
        return estimate_csv(report)
    return estimate_table(report)


def cmd_simulate(args) -> str:
    if args.all:
        reports = table1(args.seed, args.sims, args.boot_reps, args.sigma, args.workers)
    else:
        if args.config:
            config = SimConfig.from_json(args.config)
        else:
            config = SimConfig(design=args.design, pi_variant=args.pi, N=args.n,
                               sigma=args.sigma, n_sims=args.sims, n_boot=args.boot_reps,
                               seed=args.seed)
        reports = [run_simulation(config, args.workers)]
    if args.format == "json":
        return reports_to_json(reports)
    return reports_to_csv(reports)


def _parse_counts(text: str, T: int) -> np.ndarray:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"--counts must be comma-separated integers, got {text!r}") from None
    if len(values) > T + 1:
        raise InputError(f"--counts has {len(values)} entries but T={T} allows at most {T + 1}")
    # right-aligned: the last entry is the never-adopter count
    counts = np.zeros(T + 1, dtype=np.int64)
    counts[T + 1 - len(values):] = values
    if np.any(counts < 0):
        raise InputError("--counts must be non-negative")
    return counts


def oracle_population(N, T, kind, sigma, effect, seed) -> PotentialOutcomeTable:
    gen = RngStream(seed).generator()
    if kind == "random":
        return PotentialOutcomeTable(sigma * gen.standard_normal((N, T, T + 1)))
    unit = gen.standard_normal(N)
    period = gen.standard_normal(T)
    base = unit[:, None, None] + period[None, :, None]
    Y = base + effect * exposure_matrix(T)[None, :, :]
    return PotentialOutcomeTable(Y + sigma * gen.standard_normal((N, T, T + 1)))


def oracle_checks(pot, counts) -> list:
    """Compare brute-force randomization moments with the closed forms."""
    design = DesignCounts(tuple(counts))
    taus, C = oracle_estimates(pot, design)
    mean = float(taus.mean())
    var = float(np.mean((taus - mean) ** 2))
    estimand = expected_estimand(pot, design.shares, "full")
    v_exact = exact_variance(pot, counts)
    checks = [
        ("mean", mean, estimand, "PASS" if abs(mean - estimand) <= ORACLE_TOL else "FAIL"),
        ("variance", var, v_exact, "PASS" if abs(var - v_exact) <= ORACLE_TOL else "FAIL"),
    ]
    weights = compute_weights(pot.T, design.shares)
    try:
        v_hat = float(conservative_over_assignments(pot, weights, C).mean())
    except DegenerateDesignError:
        checks.append(("conservative", None, v_exact, "SKIP"))
    else:
        ok = v_hat >= v_exact - 1e-12
        checks.append(("conservative", v_hat, v_exact, "PASS" if ok else "FAIL"))
    return checks


def cmd_oracle(args) -> tuple:
    if args.t < 1:
        raise InputError("--t must be at least 1")
    counts = _parse_counts(args.counts, args.t)
    N = int(counts.sum())
    if args.n is not None and args.n != N:
        raise InputError(f"--n is {args.n} but --counts sum to {N}")
    if N < 2:
        raise InputError("need at least two units")
    pot = oracle_population(N, args.t, args.population, args.sigma, args.effect, args.seed)
    checks = oracle_checks(pot, counts)
    failed = any(c[3] == "FAIL" for c in checks)
    if args.format == "json":
        out = _dump({
            "n": N, "t": args.t, "counts": counts.tolist(), "seed": args.seed,
            "checks": [
                {"name": n, "enumerated": e, "formula": f, "status": s} for n, e, f, s in checks
            ],
        })
    else:
        labels = {
            "mean": "enumerated mean of tau_hat vs estimand",
            "variance": "enumerated variance of tau_hat vs exact variance",
            "conservative": "enumerated mean of V_did_hat >= exact variance",
        }
        lines = [f"oracle: N={N} T={args.t} counts={','.join(map(str, counts))} seed={args.seed}"]
        for name, e, f, status in checks:
            diff = "" if e is None else f"  diff={e - f:.3e}"
            lines.append(f"{status:<4}  {labels[name]}: {_fmt(e)} vs {_fmt(f)}{diff}")
        out = "\n".join(lines) + "\n"
    return out, EXIT_FAIL if failed else EXIT_OK


def cmd_pretest(args) -> str:
    if args.perms < 1:
        raise InputError("--perms must be a positive integer")
    panel = read_panel_csv(args.panel)
    p = pretest_independence(panel, args.perms, RngStream(args.seed))
    early = panel.codes == 1
    never = panel.codes == panel.T
    stat = abs(panel.Y[early, 0].mean() - panel.Y[never, 0].mean())
    report = {
        "p_value": p,
        "statistic": float(stat),
        "n_adopt_2": int(early.sum()),
        "n_never": int(never.sum()),
        "perms": args.perms,
        "seed": args.seed,
    }
    if args.format == "json":
        return _dump(report)
    return (
        f"first-period balance, adopters at 2 (n={report['n_adopt_2']}) "
        f"vs never (n={report['n_never']})\n"
        f"statistic: {stat:.6f}\np-value: {p:.6f} ({args.perms} permutations)\n"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staggered-did",
        description="Design-based DID estimation and inference under staggered adoption.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate tau and its variances from a panel CSV")
    p.add_argument("panel", help="long-format CSV: unit,time,outcome,adoption")
    p.add_argument("--boot-reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "table", "csv"), default="json")
    p.add_argument("--skip-bootstrap", action="store_true")

    p = sub.add_parser("simulate", help="Monte Carlo study of the variance estimators")
    p.add_argument("--config", help="SimConfig JSON file")
    p.add_argument("--all", action="store_true", help="run all 16 table configurations")
    p.add_argument("--design", choices=("A", "B", "C", "D"), default="A")
    p.add_argument("--pi", choices=("I", "II"), default="I")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--sims", type=int, default=2000)
    p.add_argument("--boot-reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("oracle", help="verify closed forms against exhaustive enumeration")
    p.add_argument("--n", type=int, default=None, help="number of units (must match --counts)")
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--counts", required=True,
                   help="comma-separated group sizes, right-aligned so the last is 'never'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--population", choices=("random", "additive"), default="random")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--effect", type=float, default=1.0)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("pretest", help="permutation test of first-period balance")
    p.add_argument("panel")
    p.add_argument("--perms", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "table"), default="table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            out, code = cmd_estimate(args), EXIT_OK
        elif args.command == "simulate":
            out, code = cmd_simulate(args), EXIT_OK
        elif args.command == "oracle":
            out, code = cmd_oracle(args)
        else:
            out, code = cmd_pretest(args), EXIT_OK
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
