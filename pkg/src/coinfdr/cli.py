"""Command-line interface.

Exit codes: 0 success, 1 runtime / input error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import asdict

from .calibration import RngStream
from .conformity import WorkingPriorConfig
from .core import run_coin
from .io import (
    InputError,
    MissingNuError,
    RunReport,
    format_table,
    read_raw_matrix,
    read_summary_table,
    write_report,
    write_results_table,
)
from .npmle import NpmleConfig
from .simulation import ConfigurationError, ScenarioSpec, run_experiment
from .splitting import run_coin_fs, run_coin_ss

log = logging.getLogger("coinfdr")

SIM_COLUMNS = ("method", "pi", "fdr", "tpr", "se_fdr", "se_tpr")
SCENARIOS = {"s1": "scenario1", "s2": "scenario2", "intro1": "intro1", "intro2": "intro2"}


class UsageError(Exception):
    pass


def _default_seed() -> int:
    env = os.environ.get("COIN_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"COIN_SEED={env!r} is not an integer") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=0.1, help="target FDR level (default 0.1)")
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="master random seed (default: $COIN_SEED, else 0)",
    )
    p.add_argument("--report", metavar="PATH", help="write a JSON-lines run report")
    p.add_argument("--timing", action="store_true", help="record wall time in the report")
    p.add_argument("-v", "--verbose", action="store_true")


def _fit_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("model fitting")
    g.add_argument("--n-atoms", type=int, default=50, help="NPMLE grid size (default 50)")
    g.add_argument("--npmle-iters", type=int, default=1000)
    g.add_argument("--k1", type=int, default=30, help="location components (default 30)")
    g.add_argument("--zeta2", type=float, default=1.0, help="location component variance")
    g.add_argument("--em-iters", type=int, default=2000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coinfdr",
        description="Conformalized empirical-Bayes testing of normal means.",
        epilog="The default seed can be set with the COIN_SEED environment variable.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fs", help="feature-splitting COIN on a summary table")
    p.add_argument("table", help="delimited file with header id,x,s2")
    p.add_argument("--nu", type=int, help="degrees of freedom (else '# nu=' line)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--c", type=float, default=0.9, help="fold level multiplier")
    p.add_argument("--no-randomize", action="store_true", help="plain eBH instead of U-eBH")
    _common(p)
    _fit_options(p)

    p = sub.add_parser("ss", help="sample-splitting COIN on a raw matrix")
    p.add_argument("matrix", help="delimited file: feature id then one column per sample")
    p.add_argument("--design", choices=("one-group", "two-group"), default="two-group")
    p.add_argument("--n1", type=int, help="number of group-A columns (two-group design)")
    _common(p)
    _fit_options(p)

    p = sub.add_parser("coin", help="COIN with an external training table")
    p.add_argument("table", help="test table (id,x,s2)")
    p.add_argument("--train", required=True, help="training table (id,x,s2)")
    p.add_argument("--nu", type=int, help="degrees of freedom of the test table")
    p.add_argument("--train-nu", type=int, help="degrees of freedom of the training table")
    p.add_argument("--refined", action="store_true", help="use the refined threshold")
    _common(p)
    _fit_options(p)

    p = sub.add_parser("simulate", help="replicated simulation study")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="s1")
    p.add_argument("--g", choices=("SIC", "PM", "TPD"), default="SIC")
    p.add_argument("--f", choices=("Unimodal", "SymBimodal", "AsymBimodal"), default="Unimodal")
    p.add_argument("--pi", type=float, nargs="+", default=[0.3])
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2", type=int, default=10)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument(
        "--methods",
        default="coin-fs,coin-ss",
        help="comma list of coin-fs, coin-ss, oracle-coin, oracle-fs",
    )
    p.add_argument("--paper-scale", action="store_true", help="m=20000, reps=200")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--out", metavar="CSV", help="write the results table")
    _common(p)

    p = sub.add_parser("oracle-check", help="finite-sample checks with the true prior")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--pi", type=float, default=0.3)
    p.add_argument("--parallel", type=int, default=1)
    _common(p)
    return parser


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise UsageError(f"--alpha must lie in (0, 1), got {alpha}")


def _configs(args):
    try:
        npmle = NpmleConfig(n_atoms=args.n_atoms, max_iters=args.npmle_iters)
        wp = WorkingPriorConfig(k1=args.k1, zeta2=args.zeta2, em_max_iters=args.em_iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return npmle, wp


def _resolved(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("verbose", "report")}
    cfg.update(extra)
    return cfg


def _read_table(path, nu):
    try:
        return read_summary_table(path, nu)
    except MissingNuError as exc:
        raise UsageError(str(exc)) from None


def cmd_fs(args) -> RunReport:
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    if not 0 < args.c * args.alpha < 1:
        raise UsageError("--c times --alpha must lie in (0, 1)")
    npmle_cfg, wp_cfg = _configs(args)
    table = _read_table(args.table, args.nu)
    data, fit_mask = table.prepared()
    if len(data) < args.folds:
        raise UsageError(f"{len(data)} hypotheses cannot fill {args.folds} folds")
    res = run_coin_fs(
        data,
        args.alpha,
        RngStream(args.seed),
        K=args.folds,
        c=args.c,
        use_u_ebh=not args.no_randomize,
        npmle_cfg=npmle_cfg,
        wp_cfg=wp_cfg,
        fit_mask=fit_mask,
    )
    records = [
        {
            "id": i,
            "x": float(x),
            "s2": float(s),
            "fold": res.folds.assignment[i],
            "evalue": float(e),
            "rejected": bool(r),
        }
        for i, x, s, e, r in zip(table.ids, table.x, table.s2, res.evalues, res.rejected)
    ]
    return RunReport(
        method="coin-fs",
        alpha=args.alpha,
        seed=args.seed,
        config=_resolved(args, nu=table.nu, npmle=asdict(npmle_cfg), working_prior=asdict(wp_cfg)),
        rejected_ids=[str(i) for i in res.rejected_ids],
        records=records,
        diagnostics={"U": res.u, "fold_tau": res.taus, "n_rejected": int(res.rejected.sum())},
        warnings={"zero_s2_rows": table.n_zero},
    )


def cmd_coin(args) -> RunReport:
    npmle_cfg, wp_cfg = _configs(args)
    test_t = _read_table(args.table, args.nu)
    train_t = _read_table(args.train, args.train_nu)
    test, _ = test_t.prepared()
    train, train_mask = train_t.prepared()
    res = run_coin(
        test,
        train,
        args.alpha,
        RngStream(args.seed),
        npmle_cfg=npmle_cfg,
        wp_cfg=wp_cfg,
        refined=args.refined,
        train_fit_mask=train_mask,
    )
    return _coin_report("coin", args, res, test_t.ids, test_t.x, test_t.s2,
                        npmle_cfg, wp_cfg, {"zero_s2_rows": test_t.n_zero + train_t.n_zero},
                        nu=test_t.nu, train_nu=train_t.nu)


def _coin_report(method, args, res, ids, x, s2, npmle_cfg, wp_cfg, warnings, **extra):
    records = []
    for k, (i, p, r) in enumerate(zip(ids, res.pairs, res.rejected)):
        rec = {"id": str(i), "u": float(p.u), "u_tilde": float(p.u_tilde), "rejected": bool(r)}
        if x is not None:
            rec.update(x=float(x[k]), s2=float(s2[k]))
        records.append(rec)
    return RunReport(
        method=method,
        alpha=args.alpha,
        seed=args.seed,
        config=_resolved(args, npmle=asdict(npmle_cfg), working_prior=asdict(wp_cfg), **extra),
        rejected_ids=[str(i) for i in res.rejected_ids],
        records=records,
        diagnostics={k: v for k, v in res.diagnostics.items()},
        warnings=warnings,
    )


def cmd_ss(args) -> RunReport:
    npmle_cfg, wp_cfg = _configs(args)
    if args.design == "two-group" and args.n1 is None:
        raise UsageError("--n1 is required for the two-group design")
    raw = read_raw_matrix(args.matrix, args.design, args.n1)
    try:
        res = run_coin_ss(raw, args.alpha, RngStream(args.seed), npmle_cfg=npmle_cfg, wp_cfg=wp_cfg)
    except ValueError as exc:
        if "sample splitting needs" in str(exc):
            raise UsageError(str(exc)) from None
        raise
    return _coin_report("coin-ss", args, res, raw.ids, None, None, npmle_cfg, wp_cfg, {})


def cmd_simulate(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    m, reps = (20000, 200) if args.paper_scale else (args.m, args.reps)
    rows, per_rep = [], []
    for pi in args.pi:
        spec = ScenarioSpec(SCENARIOS[args.scenario], args.g, args.f, pi, m, args.n1, args.n2)
        for method in methods:
            t0 = time.perf_counter()
            res = run_experiment(spec, method, args.alpha, reps, args.seed, args.parallel)
            log.info("%s pi=%g: %.1fs", method, pi, time.perf_counter() - t0)
            rows.append(res.row())
            per_rep += [
                {"method": method, "pi": pi, "rep": k, **asdict(r)} for k, r in enumerate(res.results)
            ]
    print(format_table(rows, SIM_COLUMNS))
    if args.out:
        write_results_table(rows, SIM_COLUMNS, args.out)
    return RunReport(
        method="simulate",
        alpha=args.alpha,
        seed=args.seed,
        config=_resolved(args, m=m, reps=reps, methods=methods),
        records=per_rep,
        diagnostics={"table": rows},
    )


def oracle_checks(m=500, reps=500, pi=0.3, alpha=0.1, seed=0, parallelism=1):
    """Finite-sample oracle properties; returns (name, value, bound, passed) rows."""
    spec = ScenarioSpec("scenario1", "PM", "Unimodal", pi, m)
    fdr = run_experiment(spec, "oracle-coin", alpha, reps, seed, parallelism)
    bound = alpha + 3 * fdr.se_fdr
    out = [("oracle-coin FDR", fdr.fdr, bound, fdr.fdr <= bound)]
    fs = run_experiment(spec, "oracle-fs", alpha, reps, seed, parallelism)
    mean, se = fs.extra_mean("null_evalue_mean")
    out.append(("oracle-fs null e-value mass / m", mean, 1 + 3 * se, mean <= 1 + 3 * se))
    return out


def cmd_oracle_check(args):
    rows = oracle_checks(args.m, args.reps, args.pi, args.alpha, args.seed, args.parallel)
    for name, value, bound, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.4f} <= {bound:.4f}")
    report = RunReport(
        method="oracle-check",
        alpha=args.alpha,
        seed=args.seed,
        config=_resolved(args),
        records=[{"check": n, "value": v, "bound": b, "passed": bool(ok)} for n, v, b, ok in rows],
    )
    return report, all(r[3] for r in rows)


def _summary_text(report: RunReport) -> str:
    lines = [f"{report.method}: {len(report.rejected_ids)} rejections at alpha={report.alpha}"]
    rej = [r for r in report.records if r.get("rejected")]
    if rej:
        cols = [c for c in ("id", "x", "s2", "u", "u_tilde", "evalue") if c in rej[0]]
        lines.append(format_table(rej, cols))
    if report.warnings.get("zero_s2_rows"):
        lines.append(f"warning: {report.warnings['zero_s2_rows']} rows with s2 = 0 were clamped")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    t0 = time.perf_counter()
    try:
        if args.seed is None:
            args.seed = _default_seed()
        _check_alpha(args.alpha)
        if args.command == "simulate":
            report = cmd_simulate(args)
            ok = True
        elif args.command == "oracle-check":
            report, ok = cmd_oracle_check(args)
        else:
            report = {"fs": cmd_fs, "ss": cmd_ss, "coin": cmd_coin}[args.command](args)
            print(_summary_text(report))
            ok = True
        if args.timing:
            report.timing = time.perf_counter() - t0
        if args.report:
            write_report(report, args.report)
    except (UsageError, ConfigurationError) as exc:
        print(f"coinfdr: error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"coinfdr: error: {exc}", file=sys.stderr)
        return 1
    log.info("done in %.2fs", time.perf_counter() - t0)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
