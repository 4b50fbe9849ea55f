"""figpipe command line: render figures from wvtomo sweep CSVs.

`render --spec spec.json` drives an explicit FigureSpec; the fig1..fig5
subcommands wrap the canonical upstream filenames. Exit codes: 0 success,
1 usage/missing input, 2 schema mismatch (the column diff is printed).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FigureSpec, render
from .schema import SchemaError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCHEMA = 2

# subcommand -> (kind, canonical input filenames, default labels)
_FIGURES = {
    "fig1": ("wv_sweep", ["fig1_tm005.csv", "fig1_tm05.csv"], []),
    "fig2": ("wv_sweep", ["fig2_eta100.csv", "fig2_eta080.csv"],
             ["eta = 1.0", "eta = 0.8"]),
    "fig3": ("fidelity_sweep", ["fig2_eta100.csv", "fig2_eta080.csv"],
             ["eta = 1.0", "eta = 0.8"]),
    "fig4": ("tomogram", ["fig4.csv"], []),
    "fig5": ("wv_sweep", ["fig5_time_resolved.csv", "fig5_stationary.csv"],
             ["time-resolved factors", "stationary factors"]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="figpipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a single figure from a JSON spec")
    p.add_argument("--spec", required=True, type=Path)

    for name, (kind, inputs, _) in _FIGURES.items():
        p = sub.add_parser(name, help=f"{kind} from {', '.join(inputs)}")
        p.add_argument("--in-dir", type=Path, default=Path("out"),
                       help="directory holding the harness CSVs")
        p.add_argument("--csv", nargs="+", type=Path,
                       help="explicit CSV paths (override --in-dir defaults)")
        p.add_argument("--out-dir", type=Path, default=Path("figs"))
        p.add_argument("--title", default="")
    return parser


def cli_entry(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "render":
            spec = FigureSpec.from_json(args.spec)
            written = render(spec)
        else:
            kind, names, labels = _FIGURES[args.command]
            csvs = args.csv if args.csv else [args.in_dir / n for n in names]
            if args.command == "fig1":
                # one two-panel figure per measurement time
                written = []
                for path in csvs:
                    spec = FigureSpec(
                        kind=kind, input_csv=[str(path)],
                        output=str(args.out_dir / Path(path).stem),
                        title=args.title or Path(path).stem,
                    )
                    written.extend(render(spec))
            else:
                spec = FigureSpec(
                    kind=kind, input_csv=[str(p) for p in csvs],
                    output=str(args.out_dir / args.command),
                    title=args.title, labels=labels,
                )
                written = render(spec)
        for path in written:
            print(path)
        return EXIT_OK
    except SchemaError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    raise SystemExit(cli_entry())


if __name__ == "__main__":
    main()
