#!/usr/bin/env python3
import argparse
import logging
import sys
from typing import Any, Optional, Sequence

from tools.runner import REWIRE_ALGORITHMS, RunConfig, run
from utils.config import get_logger_verbosity, load_experiment
from utils.errors import EXIT_INTERNAL, EXIT_OK, FairRewireError

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def _setup_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, str(get_logger_verbosity()).upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _add_common(parser: argparse.ArgumentParser, group: bool = True) -> None:
    parser.add_argument("--graph", required=True, help="edge list file: 'src dst [weight]' per line")
    if group:
        parser.add_argument("--group", required=True, help="group file: one node label per line")
        parser.add_argument("--phi", type=float, default=None, help="fairness threshold (default r(S))")
    parser.add_argument("--alpha", type=float, default=None, help="restart probability (default from config)")
    parser.add_argument("--symmetrize", action="store_true", help="read each line as an undirected edge")
    parser.add_argument("--seed", type=int, default=None, help="master seed (generated and logged when omitted)")
    parser.add_argument("--out", dest="output_dir", default="fairrewire_output", help="output directory")
    parser.add_argument("--dense-cap", type=int, default=None, help="largest n for the dense path")
    parser.add_argument("--workers", type=int, default=None, help="sampling threads (default FAIRREWIRE_WORKERS)")


def _add_sampling(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--psi", type=int, default=None, help="forests sampled per round")
    parser.add_argument("--eps", dest="epsilon", type=float, default=None, help="Hoeffding accuracy epsilon")
    parser.add_argument("--delta", type=float, default=None, help="Hoeffding confidence delta")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairrewire",
        description="Rewire edges to raise the PageRank mass of a disadvantaged group.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    rewire = commands.add_parser("rewire", help="plan b greedy (or random) rewirings")
    _add_common(rewire)
    _add_sampling(rewire)
    rewire.add_argument("--algo", dest="algorithm", choices=REWIRE_ALGORITHMS, required=True)
    rewire.add_argument("--budget", type=int, default=None, help="number of rewirings (default from config)")
    rewire.add_argument("--source", default=None, help="source node label for exactv/fastv")
    fairness = rewire.add_mutually_exclusive_group()
    fairness.add_argument(
        "--exact-fairness", dest="exact_fairness", action="store_true", default=None,
        help="always track pi(S) exactly in fast runs",
    )
    fairness.add_argument(
        "--sampled-fairness", dest="exact_fairness", action="store_false",
        help="estimate pi(S) from forests in fast runs",
    )
    rewire.add_argument("--dump-pi", action="store_true", help="write the initial Pi with sigma/eta to pi.csv")

    audit = commands.add_parser("audit", help="report PageRank and PPR fairness towards the group")
    _add_common(audit)
    audit.add_argument("--psi", type=int, default=None, help="forests for the sampling fallback above the dense cap")

    correlate = commands.add_parser("correlate", help="correlate exact gains with their tau-free scores")
    _add_common(correlate)
    correlate.add_argument("--sample-size", type=int, default=5000, help="legal rewirings to score")

    sample_debug = commands.add_parser("sample-debug", help="empirical root distribution of sampled forests")
    _add_common(sample_debug, group=False)
    sample_debug.add_argument("--samples", dest="sample_size", type=int, default=10000, help="forests to draw")

    ppr_eval = commands.add_parser("ppr-eval", help="per-round W1 between group PPR distributions")
    _add_common(ppr_eval)
    _add_sampling(ppr_eval)
    ppr_eval.add_argument("--algo", dest="ppr_algorithm", choices=("exactv", "fastv"), default="exactv")
    ppr_eval.add_argument("--budget", type=int, default=None, help="rewirings per source")
    ppr_eval.add_argument("--fraction", dest="source_fraction", type=float, default=0.1, help="share of nodes used as sources")

    experiment = commands.add_parser("experiment", help="run the [run] table of a TOML experiment file")
    experiment.add_argument("path", help="experiment file")
    experiment.add_argument("--out", dest="output_dir", default=None, help="override the output directory")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Turn parsed arguments into a RunConfig; unset options keep the config defaults."""
    if args.command == "experiment":
        table = load_experiment(args.path)
        if args.output_dir is not None:
            table["output_dir"] = args.output_dir
        return RunConfig.from_manifest(table)

    values: dict[str, Any] = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "verbose") and value is not None
    }
    if args.command == "audit":
        values["algorithm"] = "audit"
    elif args.command == "correlate":
        values["algorithm"] = "correlate"
    elif args.command == "sample-debug":
        values["algorithm"] = "sample-debug"
    elif args.command == "ppr-eval":
        values["algorithm"] = "ppr-eval"
    return RunConfig(**values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        result = run(config_from_args(args))
    except FairRewireError as e:
        print(f"error[{e.category}]: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        print(f"error[internal]: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    for name, path in sorted(result.artifacts.items()):
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
