"""Command-line entry point.

Exit codes: 0 success, 2 schema/parse error, 3 numerical non-convergence,
4 precondition violation (bad parameters, signaling input to capacity, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .behavior import Dims, normalize_counts, signaling_deficit
from .capacity import SIGNALING_LIMIT
from .exceptions import (
    BootstrapFailure,
    InvalidParameter,
    LpFailure,
    NonConvergence,
    NonlocalityError,
    ParseError,
    SchemaError,
)
from .io import behavior_to_dict, counts_to_dict, load_counts, write_json, write_results_csv
from .pipeline import (
    SweepConfig,
    bootstrap_uncertainty,
    measure_behavior,
    parse_measures,
    provenance,
    run_sweep,
    sample_counts,
    sweep_columns,
)
from .polytope import LP_TOL, enumerate_local_vertices
from .quantum import QutritModel, born_behavior

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_PRECONDITION = 4

log = logging.getLogger("nonlocality")


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    model = QutritModel(args.gamma, args.lam)
    p = born_behavior(model)
    if args.counts_per_block:
        rng = np.random.default_rng(args.seed)
        _emit(counts_to_dict(sample_counts(p, args.counts_per_block, rng)), args.out)
    else:
        _emit(behavior_to_dict(p), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    record = load_counts(args.path)
    measures = parse_measures(args.measures)
    p = normalize_counts(record)
    deficit = signaling_deficit(p)
    if "capacity" in measures and not args.project_ns and deficit > SIGNALING_LIMIT:
        log.error(
            "behavior is signaling (deficit %.3g); capacity needs --project-ns", deficit
        )
        return EXIT_PRECONDITION
    measured = measure_behavior(p, measures, args.tol)
    suffix = "_ns" if args.project_ns else "_raw"
    report = {"signaling_deficit": deficit, "projected": bool(args.project_ns), "measures": {}}
    for m in measures:
        if m in ("i3", "i2"):
            key = m + ("_ns" if args.project_ns else "")
            if key in measured:
                report["measures"][m] = measured[key]
        elif m == "dist_local":
            report["measures"][m] = measured["dist_local" + suffix]
            report["local"] = measured["dist_local" + suffix] <= args.lp_tol
        elif m == "dist_ns":
            report["measures"][m] = measured["dist_ns"]
        elif m == "capacity":
            report["measures"][m] = measured["capacity_ns"]
            report["capacity_gap"] = measured["capacity_gap"]
    if args.bootstrap:
        report["bootstrap"] = {"n": args.bootstrap, "seed": args.seed, "intervals": {}}
        for m in report["measures"]:
            interval = bootstrap_uncertainty(
                record, m, args.bootstrap, args.seed,
                project_ns=bool(args.project_ns) or m in ("capacity", "dist_ns"), tol=args.tol,
            )
            report["bootstrap"]["intervals"][m] = {
                "center": interval.center,
                "half_width": interval.half_width,
                "n_failed": interval.n_failed,
            }
    _emit(report, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.gamma_steps < 1:
        raise InvalidParameter("--gamma-steps must be >= 1")
    grid = np.linspace(args.gamma_start, args.gamma_stop, args.gamma_steps)
    cfg = SweepConfig(
        gamma_grid=tuple(float(g) for g in grid),
        lam=args.lam,
        tol=args.tol,
        n_bootstrap=args.bootstrap,
        seed=args.seed,
        measures=parse_measures(args.measures),
        counts_per_block=args.counts_per_block,
        n_jobs=args.jobs,
    )
    rows = run_sweep(cfg)
    out = Path(args.out)
    write_results_csv(rows, out, sweep_columns(cfg))
    sidecar = provenance(cfg)
    sidecar["lp_tol"] = args.lp_tol
    write_json(sidecar, out.with_suffix(out.suffix + ".json"))
    return EXIT_OK


def cmd_vertices(args) -> int:
    dims = Dims.parse(args.dims)
    vs = enumerate_local_vertices(dims)
    _emit(
        {
            "dims": dims.as_dict(),
            "count": len(vs),
            "vertices": [{"f": list(f), "g": list(g)} for f, g in vs.strategies],
        },
        args.out,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocality", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def tolerances(p):
        p.add_argument("--tol", type=float, default=1e-6, help="capacity certificate gap (bits)")
        p.add_argument("--lp-tol", type=float, default=LP_TOL, help="LP feasibility tolerance")

    p = sub.add_parser("simulate", help="Born-rule behavior (or Poisson counts) of the qutrit model")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--counts-per-block", type=float, default=None,
                   help="emit a counts file with this mean number of counts per setting pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="measures of a counts file")
    p.add_argument("path")
    p.add_argument("--measures", default="i3,dist_local")
    p.add_argument("--project-ns", action="store_true", help="report measures of the non-signaling projection")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    tolerances(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="measures of the model over a gamma grid (CSV + JSON sidecar)")
    p.add_argument("--gamma-start", type=float, required=True)
    p.add_argument("--gamma-stop", type=float, required=True)
    p.add_argument("--gamma-steps", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--bootstrap", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--counts-per-block", type=int, default=None,
                   help="analyze Poisson counts instead of the exact model behavior")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    tolerances(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("vertices", help="local deterministic strategies")
    p.add_argument("--dims", required=True, metavar="NX,NY,NA,NB")
    p.add_argument("--out")
    p.set_defaults(func=cmd_vertices)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, SchemaError) as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA
    except (NonConvergence, LpFailure, BootstrapFailure) as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except (InvalidParameter, NonlocalityError) as exc:
        log.error("%s", exc)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
