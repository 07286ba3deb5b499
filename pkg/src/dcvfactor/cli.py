"""Command-line interface: ``dcvfactor {select,simulate,empirical}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
"""
import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .criteria import ic1_curve
from .dcv import TRANSPOSE_POLICIES, dcv_curve
from .errors import NumericalError
from .harness import ExperimentSpec, export, load_spec, run_experiment, summary_csv_text, \
    summary_to_json
from .ingest import DEFAULT_MISSING_CODES, empirical_frequencies, load_returns_csv

THREADS_ENV = "DCVFACTOR_THREADS"

log = logging.getLogger("dcvfactor")


class UsageError(ValueError):
    pass


def _default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--output", default=None, help="output file")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="dcvfactor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sel = sub.add_parser("select", parents=[common], help="select d for one data matrix")
    sel.add_argument("--input", required=True, help="numeric CSV, one observation per row")
    sel.add_argument("--k", type=int, default=10, help="row folds (default 10)")
    sel.add_argument("--dmin", type=int, default=0)
    sel.add_argument("--dmax", type=int, default=8)
    sel.add_argument("--transpose", choices=TRANSPOSE_POLICIES, default="auto")
    sel.add_argument("--center", action="store_true", help="demean columns first")
    sel.add_argument("--standardize", action="store_true",
                     help="demean and scale columns to unit variance first")

    sim = sub.add_parser("simulate", parents=[common], help="run a Monte-Carlo experiment")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="experiment spec JSON file")
    src.add_argument("--preset", help="bundled preset name, e.g. paper-fig1-desk")
    sim.add_argument("--replications", type=int, default=None,
                     help="override the spec's replication count")
    sim.add_argument("--record-timing", action="store_true",
                     help="include wall and per-replication times in JSON output")

    emp = sub.add_parser("empirical", parents=[common], help="selection on return windows")
    emp.add_argument("--input", required=True, help="returns CSV with a leading date column")
    emp.add_argument("--years", type=int, choices=(1, 2, 3), default=1)
    emp.add_argument("--k", type=int, default=10)
    emp.add_argument("--dmin", type=int, default=0)
    emp.add_argument("--dmax", type=int, default=15)
    emp.add_argument("--methods", default="DCV1,DCV,IC1",
                     help="comma list of DCV1, DCV (uses --k), DCV<K>, IC1")
    emp.add_argument("--missing-codes", default=",".join(str(c) for c in DEFAULT_MISSING_CODES))
    emp.add_argument("--excess-over", default=None,
                     help="subtract this column (risk-free rate) from the others")
    return parser


def read_matrix(path):
    """Numeric CSV to a float matrix; a single non-numeric header row is skipped."""
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        X = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    return X


def _emit(text, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _print_config(cfg):
    print("config: " + json.dumps(cfg, sort_keys=True))


def cmd_select(args):
    X = read_matrix(args.input)
    if args.standardize:
        X = X - X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        X = X / np.where(sd > 0, sd, 1.0)
    elif args.center:
        X = X - X.mean(axis=0)
    n, p = X.shape
    transposed = args.transpose == "always" or (args.transpose == "auto" and n < p)
    p_eff = n if transposed else p
    if args.dmax >= min(n, p) or args.dmax >= p_eff:
        raise UsageError(f"d_max must be < p (d_max={args.dmax}, n={n}, p={p})")
    if args.dmin < 0 or args.dmin > args.dmax:
        raise UsageError("need 0 <= dmin <= dmax")
    _print_config({"command": "select", "input": str(args.input), "n": n, "p": p,
                   "k": args.k, "dmin": args.dmin, "dmax": args.dmax,
                   "transpose": args.transpose, "center": args.center,
                   "standardize": args.standardize, "seed": args.seed})
    with threadpool_limits(limits=1):
        curve = dcv_curve(X, K=args.k, d_min=args.dmin, d_max=args.dmax, seed=args.seed,
                          transpose_policy=args.transpose)
        ic = ic1_curve(X, d_min=args.dmin, d_max=args.dmax)
    rows = [{"d": int(d), "dcv": float(v), "ic1": float(c), "v": float(vv)}
            for d, v, c, vv in zip(curve.ds, curve.values, ic.ic_values, ic.v_values)]
    print(f"transposed: {str(curve.transposed).lower()}  folds: {curve.fold_plan.K}")
    print(f"{'d':>3} {'DCV(d)':>22} {'IC1(d)':>22} {'V(d)':>22}")
    for r in rows:
        print(f"{r['d']:>3} {r['dcv']:>22.15g} {r['ic1']:>22.15g} {r['v']:>22.15g}")
    print(f"DCV selects {curve.selected}; IC1 selects {ic.selected}")
    if args.output:
        if (args.format or Path(args.output).suffix.lstrip(".")) == "json":
            text = json.dumps({"dcv_selected": curve.selected, "ic1_selected": ic.selected,
                               "transposed": curve.transposed, "curve": rows}, indent=2) + "\n"
        else:
            text = "d,dcv,ic1,v\n" + "".join(
                f"{r['d']},{r['dcv']!r},{r['ic1']!r},{r['v']!r}\n" for r in rows)
        _emit(text, args.output)
    return 0


def _load_preset(name):
    ref = resources.files("dcvfactor") / "presets" / f"{name}.json"
    if not ref.is_file():
        raise UsageError(f"unknown preset {name!r}")
    return ExperimentSpec.from_dict(json.loads(ref.read_text()))


def cmd_simulate(args):
    if args.spec:
        if not Path(args.spec).is_file():
            raise UsageError(f"spec file not found: {args.spec}")
        spec = load_spec(args.spec)
    else:
        spec = _load_preset(args.preset)
    if args.replications is not None:
        spec.replications = args.replications
        spec.validate()
    threads = args.threads or _default_threads()
    output = args.output or spec.output
    fmt = args.format or (Path(output).suffix.lstrip(".") if output else "csv")
    _print_config({"command": "simulate", "spec": spec.to_dict(), "output": output,
                   "format": fmt})
    summary = run_experiment(spec, threads=threads, record_timing=args.record_timing)
    for (method, n, p, theta, em), cs in summary.cells.items():
        failed = cs.counts.get("failed", 0)
        print(f"{method:>6} {em} n={n:<4} p={p:<4} theta={theta:<8g} "
              f"correct={cs.correct_frequency:.3f} failed={failed}")
    if output:
        export(summary, output, fmt=fmt, include_timing=args.record_timing)
    elif fmt == "json":
        print(json.dumps(summary_to_json(summary, args.record_timing), indent=2))
    else:
        sys.stdout.write(summary_csv_text(summary))
    return 0


def cmd_empirical(args):
    try:
        codes = [float(c) for c in args.missing_codes.split(",") if c.strip()]
    except ValueError:
        raise UsageError(f"bad --missing-codes {args.missing_codes!r}") from None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    panel = load_returns_csv(args.input, missing_codes=codes)
    if args.excess_over:
        panel = panel.excess_over(args.excess_over)
    p = panel.values.shape[1]
    if args.dmax >= p:
        raise UsageError(f"d_max must be < p (d_max={args.dmax}, p={p})")
    _print_config({"command": "empirical", "input": str(args.input), "years": args.years,
                   "k": args.k, "dmin": args.dmin, "dmax": args.dmax, "methods": methods,
                   "missing_codes": codes, "seed": args.seed, "portfolios": p,
                   "rows": len(panel.dates), "dropped_rows": panel.dropped_rows})
    summary = empirical_frequencies(panel, args.years, methods=methods, d_min=args.dmin,
                                    d_max=args.dmax, K=args.k, seed=args.seed)
    fmt = args.format or (Path(args.output).suffix.lstrip(".") if args.output else "csv")
    if args.output:
        export(summary, args.output, fmt=fmt)
    elif fmt == "json":
        print(json.dumps(summary_to_json(summary), indent=2))
    else:
        sys.stdout.write(summary_csv_text(summary))
    return 0


COMMANDS = {"select": cmd_select, "simulate": cmd_simulate, "empirical": cmd_empirical}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
