"""Command-line front end.

Subcommands: fit, select, bootstrap, simulate, sweep. Every command takes
--seed and writes a JSON report (stdout by default, --out for a file).
Exit codes: 0 success, 2 the optimizer did not converge (a partial report is
still written), 1 any other error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import fit as fit_mod
from . import simulate as sim_mod
from .copulas import FAMILIES
from .data import CovariateSchema, DataError, load_dataset
from .hazard import HazardError
from .margins import CENSORING_FAMILIES
from .weights import KernelConfig, WeightError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _parse_schema(text):
    """'x1:discrete,x2:continuous' -> CovariateSchema."""
    names, kinds = [], []
    if text:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" not in part:
                raise DataError(f"schema entry {part!r} must be name:kind")
            name, kind = part.split(":", 1)
            names.append(name.strip())
            kinds.append(kind.strip())
    return CovariateSchema(names=tuple(names), kinds=tuple(kinds))


def _jobs(args):
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("CCHR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"CCHR_THREADS={env!r} is not an integer") from None
    return 1


def _parse_h(text):
    vals = tuple(float(v) for v in str(text).split(","))
    return vals[0] if len(vals) == 1 else vals


def _kernel_config(args):
    """Fixed bandwidths when both are given; None means cross-validate."""
    if getattr(args, "cv_bandwidths", False):
        return None  # downstream code cross-validates
    if args.h1 is None and args.h2 is None:
        return None
    if args.h1 is None or args.h2 is None:
        raise ValueError("give both --h1 and --h2, or neither")
    return KernelConfig(h1=_parse_h(args.h1), h2=_parse_h(args.h2))


def _mc_kernel_config(args):
    """Monte Carlo commands: None defers to the simulation default bandwidths,
    the CV flag forces per-replicate cross-validation."""
    if getattr(args, "cv_bandwidths", False):
        return "cv"
    return _kernel_config(args)


def _optimizer_config(args):
    return fit_mod.DESK_OPTIMIZER if getattr(args, "desk", False) else None


def _emit(report, out_path):
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load(args):
    schema = _parse_schema(args.schema)
    return load_dataset(args.input, schema)


def cmd_fit(args):
    dataset = _load(args)
    res = fit_mod.fit_two_step(
        dataset,
        args.copula,
        args.censoring,
        kernel_config=_kernel_config(args),
        optimizer_config=_optimizer_config(args),
        seed=args.seed,
        weights_mode=args.weights,
    )
    report = {"command": "fit", "seed": args.seed, "weights": args.weights}
    report.update(res.to_report())
    _emit(report, args.out)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_select(args):
    dataset = _load(args)
    ranked, failures = fit_mod.select_model(
        dataset,
        kernel_config=_kernel_config(args),
        optimizer_config=_optimizer_config(args),
        seed=args.seed,
        weights_mode=args.weights,
    )
    table = [
        {
            "rank": i + 1,
            "copula_family": cop,
            "censoring_family": cens,
            "loglik": float(res.loglik),
            "converged": bool(res.converged),
        }
        for i, (cop, cens, res) in enumerate(ranked)
    ]
    report = {
        "command": "select",
        "seed": args.seed,
        "weights": args.weights,
        "table": table,
        "failures": [
            {"copula_family": c, "censoring_family": f, "error": msg} for c, f, msg in failures
        ],
        "best": ranked[0][2].to_report() if ranked else None,
    }
    _emit(report, args.out)
    if not ranked:
        return EXIT_ERROR
    return EXIT_OK if ranked[0][2].converged else EXIT_NOT_CONVERGED


def cmd_bootstrap(args):
    dataset = _load(args)
    res = fit_mod.bootstrap(
        dataset,
        args.copula,
        args.censoring,
        n_resamples=args.boot,
        seed=args.seed,
        kernel_config=_kernel_config(args),
        optimizer_config=_optimizer_config(args),
        weights_mode=args.weights,
    )
    report = {
        "command": "bootstrap",
        "seed": args.seed,
        "weights": args.weights,
        "n_resamples": res.n_resamples,
        "n_failed": res.n_failed,
        "standard_errors": res.standard_errors,
        "p_values": res.p_values,
        "degenerate": res.degenerate,
        "unreliable": res.unreliable,
        "estimates": {k: v.tolist() for k, v in res.estimates.items()},
    }
    _emit(report, args.out)
    return EXIT_OK


def _resolve_design(args):
    if args.design:
        with open(args.design) as fh:
            design = sim_mod.SimDesign.from_dict(json.load(fh))
    elif args.preset:
        design = sim_mod.make_preset(args.preset)
    else:
        raise ValueError("simulate/sweep needs --design or --preset")
    overrides = {}
    if args.n is not None:
        overrides["n"] = args.n
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.weights is not None:
        overrides["estimator"] = args.weights
    return dataclasses.replace(design, **overrides) if overrides else design


def cmd_simulate(args):
    design = _resolve_design(args)
    report_obj = sim_mod.run_mc(
        design,
        seed=args.seed,
        optimizer_config=_optimizer_config(args) or fit_mod.STUDY_OPTIMIZER,
        kernel_config=_mc_kernel_config(args),
        warp_speed=args.warp_speed,
        jobs=_jobs(args),
    )
    n_kept = design.replications - report_obj.n_failed
    report = {
        "command": "simulate",
        "seed": args.seed,
        "design": design.to_dict(),
        "metrics": report_obj.to_report(),
        "rows": report_obj.to_rows(),
        "replicate_estimates": {
            name: [float(v) for v in vals] for name, vals in report_obj.estimates.items()
        },
        "n_replicate_rows": n_kept,
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_sweep(args):
    design = _resolve_design(args)
    rows = sim_mod.sweep(
        design,
        axis=args.axis,
        values=[float(v) for v in args.values] if args.values else None,
        seed=args.seed,
        estimators=tuple(args.estimators.split(",")),
        optimizer_config=_optimizer_config(args) or fit_mod.STUDY_OPTIMIZER,
        kernel_config=_mc_kernel_config(args),
        jobs=_jobs(args),
    )
    report = {
        "command": "sweep",
        "seed": args.seed,
        "axis": args.axis,
        "design": design.to_dict(),
        "cells": [
            {
                "value": row["value"],
                "estimator": row["estimator"],
                "metrics": row["report"].to_report(),
            }
            for row in rows
        ],
    }
    _emit(report, args.out)
    return EXIT_OK


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (env CCHR_THREADS as fallback)")
    p.add_argument("--h1", default=None, help="fixed bandwidth(s) for the instrument propensity (comma-separated per coordinate)")
    p.add_argument("--h2", default=None, help="fixed bandwidth(s) for the stratified regressions (comma-separated per coordinate)")
    p.add_argument("--cv-bandwidths", action="store_true", help="select bandwidths by cross-validation (default for fit/select/bootstrap when no --h1/--h2)")
    p.add_argument("--desk", action="store_true", help="cheaper optimizer settings")


def _add_data(p):
    p.add_argument("--input", required=True, help="comma-separated data file")
    p.add_argument(
        "--schema",
        default="",
        help="covariate declaration, e.g. x1:discrete,x2:continuous",
    )
    p.add_argument("--weights", choices=("proposed", "naive", "oracle"), default="proposed")


def build_parser():
    parser = argparse.ArgumentParser(prog="cchr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="two-step estimate on one dataset")
    _add_data(p)
    p.add_argument("--copula", choices=FAMILIES, default="frank")
    p.add_argument("--censoring", choices=CENSORING_FAMILIES, default="weibull")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="rank all copula x censoring combinations")
    _add_data(p)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bootstrap", help="bootstrap standard errors and p-values")
    _add_data(p)
    p.add_argument("--copula", choices=FAMILIES, default="frank")
    p.add_argument("--censoring", choices=CENSORING_FAMILIES, default="weibull")
    p.add_argument("--boot", type=int, required=True, metavar="B", help="number of resamples")
    _add_common(p)
    p.set_defaults(func=cmd_bootstrap)

    for name, func in (("simulate", cmd_simulate), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help=f"Monte Carlo {name}")
        p.add_argument("--design", default=None, help="JSON design file")
        p.add_argument("--preset", default=None, choices=sim_mod.PRESET_NAMES)
        p.add_argument("--n", type=int, default=None, help="override sample size")
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--weights", choices=("proposed", "naive", "oracle"), default=None)
        if name == "simulate":
            p.add_argument("--warp-speed", action="store_true", help="one bootstrap per replicate for coverage")
        else:
            p.add_argument("--axis", choices=("complier_ratio", "sample_size"), required=True)
            p.add_argument("--values", nargs="*", default=None)
            p.add_argument("--estimators", default="naive,proposed,oracle")
        _add_common(p)
        p.set_defaults(func=func)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, WeightError, fit_mod.FitError, HazardError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
