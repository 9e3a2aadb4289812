"""Command-line interface.

Subcommands
-----------
simulate   run a study end to end and write report files
fit        thresholded ridge fit of a design/response pair
tune       leave-one-out tuning of (C1, C2) over a grid
ratecheck  scaling experiments for the error-rate results
report     re-run the study recorded in a manifest

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

import argparse
import json
import sys

from ._version import __version__
from .errors import InputError, NumericalError
from .harness import (
    ALL_METHODS,
    RATE_SCENARIOS,
    emit_report,
    rate_check,
    rerun_manifest,
    run_study,
)
from .linalg import factorize, spectral_diagnostics
from .matrixio import FLOAT_FORMAT, load_vector_csv, save_vector_csv
from .ridge import fit_ridge
from .simgen import config_from_json_dict, load_design_csv
from .threshold import (
    GAUSSIAN,
    MOMENT,
    ScheduleParams,
    apply_threshold,
    regularization_value,
    threshold_value,
)
from .tuning import TuningGrid, default_grid, tune


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projridge",
        description="Projection-ridge estimation and simulation harness",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation study")
    sim.add_argument("--study", required=True,
                     choices=["I", "II", "III", "IV", "custom"])
    sim.add_argument("--config", required=True, help="JSON config file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--methods", default=",".join(ALL_METHODS),
                     help="comma-separated subset of: " + ",".join(ALL_METHODS))
    sim.add_argument("--fixtures", default="fixtures",
                     help="directory with design fixture CSV files")

    fit = sub.add_parser("fit", help="thresholded ridge fit")
    fit.add_argument("--design", required=True, help="design matrix CSV")
    fit.add_argument("--response", required=True, help="response vector CSV")
    fit.add_argument("--c1", type=float, required=True)
    fit.add_argument("--c2", type=float, required=True)
    fit.add_argument("--alpha", type=float, default=0.5)
    fit.add_argument("--regime", choices=[GAUSSIAN, MOMENT], default=GAUSSIAN)
    fit.add_argument("--l", type=float, default=1.0, help="moment regime only")
    fit.add_argument("--k", type=int, default=8, help="moment regime only")
    fit.add_argument("--t", type=float, default=1.0, help="moment regime only")
    fit.add_argument("--h", type=float, default=None,
                     help="explicit regularization (bypasses the schedule)")
    fit.add_argument("--out", default=None, help="directory for coefficient files")

    tun = sub.add_parser("tune", help="tune (C1, C2) by leave-one-out")
    tun.add_argument("--design", required=True)
    tun.add_argument("--response", required=True)
    tun.add_argument("--grid", default=None,
                     help="JSON file with c1_values, c2_values, alpha")
    tun.add_argument("--regime", choices=[GAUSSIAN, MOMENT], default=GAUSSIAN)

    rate = sub.add_parser("ratecheck", help="error-rate scaling experiment")
    rate.add_argument("--theorem", required=True, choices=["t1ii", "t3"])
    rate.add_argument("--scenario", required=True, choices=sorted(RATE_SCENARIOS))
    rate.add_argument("--n-values", default="100,200,400,800")
    rate.add_argument("--seed", type=int, default=0)
    rate.add_argument("--replications", type=int, default=500)
    rate.add_argument("--out", default=None)

    rep = sub.add_parser("report", help="re-run a recorded study")
    rep.add_argument("--manifest", required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--workers", type=int, default=1)

    return parser


def _fmt(x: float) -> str:
    return FLOAT_FORMAT % x


def _cmd_simulate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    cfg = config_from_json_dict(raw, study=args.study, fixtures_dir=args.fixtures)
    methods = tuple(m for m in args.methods.split(",") if m)
    report = run_study(cfg, methods=methods, workers=args.workers)
    paths = emit_report(report, args.out)
    for m in report.methods:
        print(f"{m}: mean l2 error {_fmt(report.mean_l2[m])}")
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return 0


def _cmd_fit(args) -> int:
    X = load_design_csv(args.design)
    y = load_vector_csv(args.response)
    F = factorize(X)
    sched = ScheduleParams(
        c1=args.c1, alpha=args.alpha, c2=args.c2, regime=args.regime,
        l=args.l, k=args.k, t=args.t,
    )
    a = threshold_value(F.n, sched)
    h = args.h if args.h is not None else regularization_value(F.n, F.p, sched)
    tfit = apply_threshold(fit_ridge(F, y, h), a)
    diag = spectral_diagnostics(F)
    print(f"n={F.n} p={F.p} rank={F.rank}")
    print(f"a_n={_fmt(a)} h_n={_fmt(h)}")
    print(f"selected {tfit.selected.size} of {F.p} components (0-based indices):")
    print(",".join(str(i) for i in tfit.selected))
    print(f"lambda_min_pos={_fmt(diag.lambda_min_pos)} "
          f"lambda_max={_fmt(diag.lambda_max)} "
          f"rank_tolerance={_fmt(diag.rank_tolerance)}")
    if args.out:
        from pathlib import Path

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_vector_csv(out / "theta_tilde.csv", tfit.theta_tilde)
        save_vector_csv(out / "theta_hat.csv", tfit.base.theta_hat)
        with open(out / "selected.csv", "w", encoding="utf-8") as fh:
            for i in tfit.selected:
                fh.write(f"{i}\n")
        print(f"wrote coefficients under {out}")
    return 0


def _cmd_tune(args) -> int:
    X = load_design_csv(args.design)
    y = load_vector_csv(args.response)
    F = factorize(X)
    if args.grid is None:
        grid = default_grid(y, F.n, F.p)
    else:
        with open(args.grid, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        grid = TuningGrid(
            c1_values=tuple(raw["c1_values"]),
            c2_values=tuple(raw["c2_values"]),
            alpha=float(raw.get("alpha", 0.5)),
        )
    result = tune(F, y, grid, regime=args.regime)
    print(f"best_c1={_fmt(result.best_c1)}")
    print(f"best_c2={_fmt(result.best_c2)}")
    print(f"best_psi_hat={_fmt(result.best_value)}")
    return 0


def _cmd_ratecheck(args) -> int:
    n_values = tuple(int(v) for v in args.n_values.split(","))
    report = rate_check(
        args.theorem,
        args.scenario,
        n_values=n_values,
        master_seed=args.seed,
        replications=args.replications,
    )
    for method, errs in report.errors.items():
        print(f"{method}: errors {[ _fmt(e) for e in errs ]} "
              f"slope {_fmt(report.slopes[method])}")
    print(f"prediction: {report.prediction}")
    if args.out:
        from pathlib import Path

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ratecheck.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {out / 'ratecheck.json'}")
    return 0


def _cmd_report(args) -> int:
    report = rerun_manifest(args.manifest, workers=args.workers)
    paths = emit_report(report, args.out)
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "tune": _cmd_tune,
    "ratecheck": _cmd_ratecheck,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entry() -> None:  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    entry()
