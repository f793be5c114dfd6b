"""Command-line interface: ``isoga run``, ``isoga verify``, ``isoga convergence``.

Exit codes: 0 success, 1 numerical failure, 2 input error. Human-readable
progress goes to stdout; results go to files only.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .cases import CASES, merged_params, run_case
from .config import load_config, parse_refine
from .errors import InputError, IOFailure, IsogaError, NumericalError
from .post import write_bundle, write_metrics

log = logging.getLogger("isoga")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2

THREADS_ENV = "ISOGA_NUM_THREADS"

# metric followed by the refinement study
CONVERGENCE_METRIC = {
    "poisson-1d": "l2_error",
    "poisson-1d-gradient": "l2_error",
    "plate-hole": "stress_l2_error",
    "griffith-modeI": "l2_error",
    "clamped-plate": "coefficient",
}


def _flag_overrides(args, name):
    """Command-line flags as case overrides (flags win over the config)."""
    out = {}
    if args.order is not None:
        default = merged_params(name).get("degree")
        out["degree"] = [args.order] * len(default) if isinstance(default, list) else args.order
    if args.refine:
        out["refine"] = parse_refine(args.refine)
    if args.quad is not None:
        out["quad"] = args.quad
    if args.bc_method is not None:
        out["bc_method"] = args.bc_method
    return out


def _vtk_ext(bundle, requested):
    if requested:
        return requested
    if bundle.nodes.shape[1] == 3 and bundle.shape is not None:
        return "vts"
    return "vtu"


def _makedirs(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {path}: {exc.strerror}") from exc


def _write_outputs(res, out_dir, output):
    _makedirs(out_dir)
    written = []
    ext = _vtk_ext(res.bundle, output.get("vtk"))
    if ext != "none":
        written.append(write_bundle(res.bundle, os.path.join(out_dir, f"{res.name}.{ext}")))
    metrics = output.get("metrics", "metrics.csv")
    written.append(write_metrics(os.path.join(out_dir, metrics), res.rows))
    return written


def cmd_run(args):
    if args.config:
        cfg = load_config(args.config)
        name, overrides, output = cfg.case, cfg.overrides, cfg.output
    elif args.case:
        name, overrides, output = args.case, {}, {}
    else:
        raise InputError("run needs a config file or --case")
    overrides.update(_flag_overrides(args, name))
    out_dir = args.out or output.get("dir") or "results"
    res = run_case(name, overrides)
    print(f"{res.name}: solved in {res.elapsed:.2f} s")
    for r in res.rows:
        ref = f" (ref {r['ref']:.6g})" if r["ref"] != "" else ""
        print(f"  {r['metric']} = {r['value']:.6g}{ref}")
    for path in _write_outputs(res, out_dir, output):
        print(f"  wrote {path}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_all

    numbers = [int(n) for n in args.criteria.split(",")] if args.criteria else None
    results = run_all(numbers, log=print)
    if args.report:
        try:
            with open(args.report, "w") as fh:
                json.dump([c.to_dict() for c in results], fh, indent=1)
        except OSError as exc:
            raise IOFailure(f"cannot write {args.report}: {exc.strerror}") from exc
    failed = [c.number for c in results if not c.passed]
    if failed:
        print("failed criteria: " + ", ".join(map(str, failed)))
        return EXIT_NUMERICAL
    print("all criteria passed")
    return EXIT_OK


def _scaled(value, k):
    """Element counts after ``k`` doublings; odd counts stay odd so a
    crack through the middle never lands on an element edge."""
    def one(n):
        for _ in range(k):
            n = 2 * n + n % 2
        return n

    return [one(v) for v in value] if isinstance(value, list) else one(value)


def convergence_rows(name, levels, overrides=None):
    """Run ``levels`` uniform refinements (element counts doubling).

    Returns
    -------
    list of dict
        Keys ``case, level, elements, dofs, metric, value, rate``; the rate
        is ``log2`` of successive error ratios (empty on the first level).
    """
    if name not in CONVERGENCE_METRIC:
        raise InputError(f"no convergence metric for {name!r}; choose one of {', '.join(CONVERGENCE_METRIC)}")
    if levels < 1:
        raise InputError("levels must be at least 1")
    base = merged_params(name, overrides)
    metric = CONVERGENCE_METRIC[name]
    rows, prev = [], None
    for k in range(levels):
        ov = dict(overrides or {})
        ov["elements"] = _scaled(base["elements"], k)
        res = run_case(name, ov)
        val = res.values[metric]
        if name == "clamped-plate":
            val = abs(val - base["reference"]) / base["reference"]
        rate = "" if prev is None or val <= 0 else float(np.log2(prev / val))
        rows.append({
            "case": name,
            "level": k,
            "elements": "x".join(map(str, np.atleast_1d(ov["elements"]))),
            "dofs": res.values.get("dofs", ""),
            "metric": metric,
            "value": val,
            "rate": rate,
        })
        prev = val
    return rows


def cmd_convergence(args):
    overrides = {}
    if args.order is not None or args.quad is not None or args.bc_method is not None or args.refine:
        overrides = _flag_overrides(args, args.case)
    rows = convergence_rows(args.case, args.levels, overrides)
    out_dir = args.out or "results"
    _makedirs(out_dir)
    path = os.path.join(out_dir, f"convergence_{args.case}.csv")
    keys = ["case", "level", "elements", "dofs", "metric", "value", "rate"]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: format(v, ".10g") if isinstance(v, float) else v for k, v in r.items()})
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from exc
    for r in rows:
        rate = f"  rate {r['rate']:.3f}" if r["rate"] != "" else ""
        print(f"level {r['level']}: {r['elements']} elements, {r['dofs']} dofs, {r['metric']} {r['value']:.4e}{rate}")
    print(f"wrote {path}")
    return EXIT_OK


def _add_common(p):
    p.add_argument("--order", type=int, help="basis degree (all directions)")
    p.add_argument("--refine", help="refinement directives, e.g. h:2 or p:1,h:1 or k:2")
    p.add_argument("--quad", type=int, help="Gauss points per direction")
    p.add_argument("--bc-method", choices=["direct", "penalty", "lagrange", "least-squares"])
    p.add_argument("--out", help="output directory (default: results)")


def build_parser():
    parser = argparse.ArgumentParser(prog="isoga", description="Isogeometric analysis cases and checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a case from a JSON config")
    run.add_argument("config", nargs="?", help="case configuration file")
    run.add_argument("--case", choices=sorted(CASES), help="run a catalog case with defaults")
    _add_common(run)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    ver.add_argument("--report", help="write a JSON report here")
    ver.set_defaults(func=cmd_verify)

    conv = sub.add_parser("convergence", help="uniform refinement study")
    conv.add_argument("case", choices=sorted(CONVERGENCE_METRIC))
    conv.add_argument("--levels", type=int, default=4)
    _add_common(conv)
    conv.set_defaults(func=cmd_convergence)
    return parser


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(int(n))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _limit_threads()
        return args.func(args)
    except (InputError, IOFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, IsogaError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
