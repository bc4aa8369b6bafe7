"""Command-line entry point.

Subcommands::

    run       --config PATH [--out DIR] [--threads N] [--seed S]
    validate  --config PATH [--horizon K]
    rate      CSV --field NAME [--from K] [--to K]
    gen       --config PATH [--out DIR] [--seed S]

Exit codes: 0 success, 1 validation failure, 2 config or input error,
3 a failed experiment cell, 4 too little data for a rate fit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .diagnostics import FIELDS, InsufficientData, IterationTrace, fit_rate
from .experiments import ConfigError, build_instance, build_schedule, run_experiment, validate_config
from .schedules import validate_epsilon_conditions
from .solvers import STEPS, validate_for

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CELL, EXIT_DATA = 0, 1, 2, 3, 4


def _err(msg):
    print(f"pdsplit: {msg}", file=sys.stderr)


def _load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    validate_config(doc)
    return doc


def cmd_run(args):
    try:
        config = _load_config(args.config)
        summary = run_experiment(config, output_dir=args.out, threads=args.threads, seed=args.seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    for cell in summary["cells"]:
        status = cell["status"]
        extra = cell.get("csv") if status == "ok" else cell.get("error")
        print(f"{cell['instance']} / {cell['label']}: {status} ({extra})")
    return EXIT_OK if summary["ok"] else EXIT_CELL


def cmd_validate(args):
    try:
        config = _load_config(args.config)
        seed = config.get("seed", 0) if args.seed is None else args.seed
        instances = [build_instance(doc, i, seed) for i, doc in enumerate(config.get("instances", []))]
        all_ok = True
        for j, alg in enumerate(config.get("algorithms", [])):
            if alg["name"] not in STEPS:
                continue
            horizon = args.horizon or max(alg["budget"]["max_iter"] + 1, 2)
            for name, p, extras in instances:
                if "instances" in alg and name not in alg["instances"]:
                    continue
                sched = build_schedule(alg["schedule"], p, extras, f"algorithms[{j}].schedule")
                rep = validate_for(alg["name"], p, sched, horizon)
                rep.merge(validate_epsilon_conditions(sched, horizon, alg.get("epsilon_mode", "rate")))
                all_ok = all_ok and rep.passed
                verdict = "pass" if rep.passed else "FAIL"
                print(f"== {alg.get('label', alg['name'])} on {name} (K={horizon}): {verdict}")
                print(rep)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_rate(args):
    try:
        trace = IterationTrace.read_csv(args.csv)
    except OSError as exc:
        _err(f"cannot read {args.csv!r}: {exc.strerror}")
        return EXIT_CONFIG
    except ValueError as exc:
        _err(f"{args.csv}: {exc}")
        return EXIT_CONFIG
    if len(trace) == 0:
        _err("trace has no rows")
        return EXIT_DATA
    k_lo = args.k_from if args.k_from is not None else int(trace.rows[0]["k"])
    k_hi = args.k_to if args.k_to is not None else int(trace.last["k"])
    try:
        fit = fit_rate(trace, args.field, (k_lo, k_hi))
    except InsufficientData as exc:
        _err(str(exc))
        return EXIT_DATA
    print(f"field={args.field} window=[{k_lo}, {k_hi}] rows={fit.n_used} "
          f"slope={fit.slope:.6g} r2={fit.r_squared:.6g}")
    return EXIT_OK


def cmd_gen(args):
    try:
        config = _load_config(args.config)
        seed = config.get("seed", 0) if args.seed is None else args.seed
        out = args.out or config.get("output_dir", "instances")
        os.makedirs(out, exist_ok=True)
        for i, doc in enumerate(config.get("instances", [])):
            name, p, _ = build_instance(doc, i, seed)
            path = os.path.join(out, f"{name}.json")
            with open(path, "w") as fh:
                fh.write(p.to_json())
            print(path)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="pdsplit", description="Time-scaled primal-dual solvers.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--threads", type=int, default=1, help="cells run concurrently")
    r.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check schedules against their assumptions")
    v.add_argument("--config", required=True)
    v.add_argument("--horizon", type=int, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("rate", help="fit a log-log rate to a trace column")
    t.add_argument("csv")
    t.add_argument("--field", required=True, choices=FIELDS[1:])
    t.add_argument("--from", dest="k_from", type=int, default=None)
    t.add_argument("--to", dest="k_to", type=int, default=None)
    t.set_defaults(func=cmd_rate)

    g = sub.add_parser("gen", help="write the config's instances as JSON documents")
    g.add_argument("--config", required=True)
    g.add_argument("--out", default=None)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_gen)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches EXIT_CONFIG
        return int(exc.code or 0)
    if args.command == "run" and args.threads < 1:
        _err("--threads must be at least 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
