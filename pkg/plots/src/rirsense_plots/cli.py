"""Command-line entry: plot <kind> --in <csv> --out <png/svg>."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .csvio import SchemaError
from .render import DEFAULT_SPLIT_THRESHOLD, KINDS, PlotJob, render

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rirsense-plot", description=__doc__)
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input CSV (repeatable for coherence overlays)")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--title", default=None)
    parser.add_argument("--split-threshold", type=float, default=DEFAULT_SPLIT_THRESHOLD,
                        help="linear/log boundary of the sensitivity scatter (default 0.01)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        options = {"split_threshold": args.split_threshold}
        if args.title is not None:
            options["title"] = args.title
        job = PlotJob(inputs=tuple(args.inputs), kind=args.kind, output=args.out, options=options)
        tables = render(job)
        for table in tables:
            for warning in table.warnings:
                print(f"warning: {warning}", file=sys.stderr)
        print(f"wrote {args.out}")
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
