"""Command-line entry point: ``ffgmix verify`` and ``ffgmix vad``.

Exit codes: 0 success, 2 bad arguments, 3 inference or input-data error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import FFGError
from .experiments import (
    METHODS,
    VadConfig,
    VerificationConfig,
    format_results,
    run_vad,
    run_verification,
    write_results,
)

EXIT_OK, EXIT_USAGE, EXIT_INFERENCE, EXIT_IO = 0, 2, 3, 4


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffgmix", description="Mixture-node model comparison experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="three-component mixture verification experiment")
    v.add_argument("--method", choices=METHODS, required=True)
    v.add_argument("--n", type=_positive_int, default=1000, help="number of observations (default 1000)")
    v.add_argument("--noise-var", type=float, default=5.0, help="observation noise variance (default 5)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--alpha", type=float, default=None,
                   help="Dirichlet prior concentration for bmc methods (default 10 online, 1 variational)")
    v.add_argument("--reduce-to", type=float, default=1.0,
                   help="concentration after model reduction for bmc-online (default 1)")
    v.add_argument("--out", required=True, help="output file, or - for stdout")
    v.add_argument("--format", choices=("csv", "json"), default="csv")

    d = sub.add_parser("vad", help="voice activity detection by switching between speech and silence models")
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV signal, one sample per line")
    src.add_argument("--synthetic", metavar="SEGSPEC",
                     help="simulate segments, e.g. speech:2000,silence:2000")
    d.add_argument("--seed", type=int, default=0, help="seed for --synthetic")
    d.add_argument("--rho", type=float, default=0.95,
                   help="speech AR(1) coefficient (default 0.95; our choice, not a published value)")
    d.add_argument("--process-var", type=float, default=1.0,
                   help="speech AR(1) process variance (default 1; our choice, not a published value)")
    d.add_argument("--out", required=True, help="output file, or - for stdout")
    d.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _table(args):
    if args.command == "verify":
        config = VerificationConfig(
            n=args.n,
            noise_variance=args.noise_var,
            method=args.method,
            seed=args.seed,
            alpha=args.alpha,
            reduce_to=args.reduce_to,
        )
        return run_verification(config)
    config = VadConfig(
        rho=args.rho,
        process_variance=args.process_var,
        input_path=args.input,
        segments=args.synthetic,
        seed=args.seed,
    )
    return run_vad(config)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        table = _table(args)
    except FFGError as exc:
        print(f"ffgmix: inference error: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except OSError as exc:
        print(f"ffgmix: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"ffgmix: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.out == "-":
            sys.stdout.write(format_results(table, args.format))
        else:
            write_results(table, args.out, args.format)
    except OSError as exc:
        print(f"ffgmix: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
