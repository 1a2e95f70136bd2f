"""Command-line experiment runner: one subcommand per experiment.

Usage examples:

    beurlinglab density --out runs/density
    beurlinglab random-example --seed 3 --out runs/rx --threads 2
    beurlinglab counterexample --config cfg.json

A JSON config (--config) overrides the experiment defaults field by field;
--seed overrides the config seed.  The default output directory comes from
the BEURLINGLAB_OUT environment variable, falling back to the working
directory.  Exit codes: 0 ok, 1 config schema violation, 2 assertion
failure, 3 capacity error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import CapacityError, SchemaError
from .experiments import EXPERIMENTS, run


def _parser():
    p = argparse.ArgumentParser(prog="beurlinglab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name.lower().replace("_", "-"),
                            help=f"run the {name} experiment")
        sp.add_argument("--config", default=None, help="JSON config path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for seed sweeps")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    config["experiment"] = args.experiment.upper().replace("-", "_")
    try:
        result = run(config, out_dir=args.out, threads=args.threads,
                     seed=args.seed)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    for path in result.files:
        print(path)
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
