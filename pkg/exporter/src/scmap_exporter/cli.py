"""`scmap-export`: turn an image directory into engine-ready tensor fixtures.

    scmap-export export --images photos/ --out fixtures/ --seed 7
    scmap-export check --manifest fixtures/manifest.jsonl
"""

import argparse
import sys

from .errors import ExporterError
from .export import cross_check, export_dataset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scmap-export",
        description="Export vision-transformer fixtures in the scmap tensor format.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    exp = subs.add_parser("export", help="run a backbone over images and write tensors")
    exp.add_argument("--images", required=True, help="directory of input images")
    exp.add_argument("--out", required=True, help="output directory")
    exp.add_argument("--model", default="mini-vit", help="backbone name (default mini-vit)")
    exp.add_argument("--seed", type=int, default=0, help="weight seed (default 0)")
    exp.add_argument("--classes", type=int, default=8, help="conv head channels (default 8)")

    chk = subs.add_parser("check", help="verify an export through the engine's reader")
    chk.add_argument("--manifest", required=True, help="manifest.jsonl from an export")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            manifest = export_dataset(
                args.images, args.out, model_name=args.model, seed=args.seed, classes=args.classes
            )
            report = cross_check(manifest)
            print(report.render())
            print(f"export complete -> {manifest}")
            return 0 if report.passed else 1
        report = cross_check(args.manifest)
        print(report.render())
        return 0 if report.passed else 1
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
