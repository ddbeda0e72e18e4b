"""Command line driver: ``sccoding <verb> --config exp.yaml [--set key=value ...]``."""
import argparse
import json
import os
import sys

from .experiments import JOBS, RUNNERS, ExperimentConfig, ResultWriter, inspect


def build_parser():
    ap = argparse.ArgumentParser(prog="sccoding", description="Bit mapper optimization for coupled codes")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in JOBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value, dotted keys for nested sections")
        p.add_argument("--output", help="output directory (overrides the config)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.set) + [f"job={args.verb}"]
        if args.output:
            overrides.append(f"output={args.output}")
        if args.config:
            cfg = ExperimentConfig.from_file(args.config, overrides)
        else:
            cfg = ExperimentConfig.from_dict({}, overrides)
        if args.verb == "inspect":
            json.dump(inspect(cfg), sys.stdout, indent=2)
            sys.stdout.write("\n")
            return 0
        writer = ResultWriter(cfg["output"])
        with open(os.path.join(cfg["output"], "config.resolved.yaml"), "w") as fh:
            cfg.echo(fh)
        RUNNERS[args.verb](cfg, writer)
        writer.write_csv()
        for rec in writer.records:
            print(rec.to_json())
        return 0
    except Exception as exc:
        json.dump({"status": "error", "verb": args.verb, "type": type(exc).__name__, "message": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
