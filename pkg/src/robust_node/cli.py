"""Command line entry point: ``robust-node {run,compare,verify,export-grid}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig
from .estimator import METHODS
from .exceptions import ConfigError, NumericalAbort

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3
EXIT_CHECK_FAILED = 4

log = logging.getLogger("robust_node")


class _Parser(argparse.ArgumentParser):
    # usage errors are config errors; argparse's own status 2 would read as a numerical abort
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON); defaults are used if omitted")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--method", choices=sorted(METHODS), help="override the config method")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="robust-node", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="train one method and export all artifacts")
    sub.add_parser("compare", parents=[common], help="all four methods over the seed list")
    sub.add_parser("verify", parents=[common], help="run the numerical self-checks, write a JSON report")
    sub.add_parser("export-grid", parents=[common], help="write the level-set grid CSV")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config is None:
        cfg = ExperimentConfig(seed=0 if args.seed is None else args.seed)
    else:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}", str(args.config)) from exc
        if args.seed is not None:
            data = {**data, "seed": args.seed}
        cfg = ExperimentConfig.from_dict(data)
    if args.method is not None:
        cfg.method = args.method
        cfg.validate()
    return cfg


def _run(cfg, args):
    from .experiment import run_experiment

    _, metrics = run_experiment(cfg, args.out)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _compare(cfg, args):
    from .experiment import compare_methods

    _, means = compare_methods(cfg, args.out)
    for row in means:
        print(f"{row['method']:>11}  acc {row['test_accuracy']:.4f}  margin {row['margin_accuracy']:.4f}  "
              f"hcm {row['high_confidence_mistakes']:.4f}  J {row['robust_objective']:.4f}  [{row['status']}]")
    return EXIT_OK


def _verify(cfg, args):
    from .experiment import verification_report

    report = verification_report(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "verify.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, entry in report.items():
        if name != "all_passed":
            ok = entry["passed"] if "passed" in entry else all(v["passed"] for v in entry.values())
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if report["all_passed"] else EXIT_CHECK_FAILED


def _export_grid(cfg, args):
    from .evaluation import export_level_set_grid
    from .experiment import boundary_of, build_batch, load_controls, make_estimator, targets_of

    controls = args.out / "controls.json"
    if controls.exists():
        u = load_controls(controls)
        log.info("using controls from %s", controls)
    else:
        batch = build_batch(cfg)
        u = make_estimator(cfg).fit(batch.dataset.points, batch.labels,
                                    perturbations=batch.perturbations).controls_
    args.out.mkdir(parents=True, exist_ok=True)
    export_level_set_grid(u, targets_of(cfg), cfg.evaluation.grid_resolution, args.out / "level_set.csv",
                          boundary_of(cfg))
    print(args.out / "level_set.csv")
    return EXIT_OK


COMMANDS = {"run": _run, "compare": _compare, "verify": _verify, "export-grid": _export_grid}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
