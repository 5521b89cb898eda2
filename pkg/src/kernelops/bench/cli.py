"""Command-line entry point for the benchmark experiments.

Usage: ``kernelops <experiment> [--config FILE] [--seed INT] [--out DIR]``
with experiments cluster, mnist, ot, bachelier and conditional.  Exit
codes: 0 on success, 2 on a configuration problem, 3 on a data problem.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import (
    bachelier_benchmark,
    cluster_benchmark,
    conditional_demo,
    mnist_classify,
    ot_benchmark,
)
from .mnist import DataError

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelops",
        description="kernel regression / transport benchmark harness",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, helptext in (
        ("cluster", "clustering quality metrics on a blob mixture"),
        ("mnist", "digit classification accuracy"),
        ("ot", "transport map recovery error"),
        ("bachelier", "conditional expectation pricing error"),
        ("conditional", "conditioned sample generation sweep"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        if name == "mnist":
            p.add_argument(
                "--mnist-dir",
                default=None,
                help="directory holding the IDX files",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.experiment == "cluster":
            cluster_benchmark(cfg, args.seed, args.out)
        elif args.experiment == "mnist":
            result = mnist_classify(
                cfg, args.seed, args.out, mnist_dir=args.mnist_dir
            )
            for mode, cell in result["modes"].items():
                print(
                    f"{result['dataset']} {mode}: score {cell['score']:.4f} "
                    f"({cell['exec_time']:.1f}s)"
                )
        elif args.experiment == "ot":
            ot_benchmark(cfg, args.seed, args.out)
        elif args.experiment == "bachelier":
            bachelier_benchmark(cfg, args.seed, args.out)
        elif args.experiment == "conditional":
            conditional_demo(cfg, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
