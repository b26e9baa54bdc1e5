"""Command-line entry point: run scenarios, compare records, list scenarios."""

import argparse
import json
import sys
from pathlib import Path

from . import experiments, gridio


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wavecorr",
        description="Noisy wave-field correlation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the config JSON")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the seed")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker threads for heavy transforms")
    p_run.add_argument("--strict", action="store_true",
                       help="fail (exit 1) when the run emits warnings")

    p_cmp = sub.add_parser("compare", help="compare two correlation records")
    p_cmp.add_argument("records", nargs=2, help="CSV record files (test, reference)")
    p_cmp.add_argument("--window", nargs=2, type=float, required=True,
                       metavar=("LO", "HI"), help="|tau| comparison window")

    sub.add_parser("list-scenarios",
                   help="print scenario names with their default configs")

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        listing = {name: experiments.default_config(name)
                   for name in experiments.list_scenarios()}
        json.dump(listing, sys.stdout, indent=1, sort_keys=True, default=str)
        print()
        return 0

    if args.command == "compare":
        recs = [gridio.record_from_csv(p) for p in args.records]
        metrics = experiments.compare(recs, (args.window[0], args.window[1]))
        json.dump(metrics, sys.stdout, indent=1, sort_keys=True)
        print()
        return 0

    config = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    try:
        manifest = experiments.run(config, out_dir=args.out)
    except Exception as exc:  # schema violations, module guards
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"passed": manifest["passed"],
                      "warnings": manifest["warnings"],
                      "metrics": manifest["extra"]["metrics"]},
                     indent=1, sort_keys=True, default=str))
    if args.strict and manifest["warnings"]:
        return 1
    if manifest["passed"] is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
