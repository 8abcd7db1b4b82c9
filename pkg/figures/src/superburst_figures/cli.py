"""Command line entry point: superburst-figures render."""

from __future__ import annotations

import argparse
import sys

from .io import BundleError
from .render import RENDERERS, render_preset


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="superburst-figures",
        description="render superburst experiment bundles")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one preset bundle")
    p_render.add_argument("--preset", required=True,
                          help=f"one of: {', '.join(sorted(RENDERERS))}")
    p_render.add_argument("--manifest", required=True,
                          help="path to the bundle's manifest.json")
    p_render.add_argument("--out", required=True,
                          help="image file to write (png, pdf, svg, ...)")
    args = parser.parse_args(argv)
    try:
        out = render_preset(args.preset, args.manifest, args.out)
    except BundleError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
