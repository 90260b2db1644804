"""``koopman-lyap <mode> --config <path> [--out <dir>] [--seed <u64>]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(ill-conditioning, divergence), 4 spectral-radius guard tripped.
Set ``KOOPMAN_LYAP_NUM_THREADS`` to cap BLAS/LAPACK threads.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from numpy.linalg import LinAlgError
from threadpoolctl import threadpool_limits

from .config import MODES, load_config
from .exceptions import (ConfigError, IllConditionedError, InstabilityError,
                         IntegrationDivergenceError)
from .experiments import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INSTABILITY = 4
THREADS_ENV = "KOOPMAN_LYAP_NUM_THREADS"

logger = logging.getLogger("koopman_lyap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="koopman-lyap",
                                     description="Koopman-based Lyapunov function experiments")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="YAML experiment configuration")
    parser.add_argument("--out", help="output directory (overrides config 'outputs')")
    parser.add_argument("--seed", type=int, help="sampling seed (overrides config 'seed')")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        config.mode = args.mode
        if args.out is not None:
            config.outputs = args.out
        if args.seed is not None:
            config.seed = args.seed
        with threadpool_limits(limits=_threads()):
            summary = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (IllConditionedError, IntegrationDivergenceError, LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key, value in summary.items():
        print(f"{key}={value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
