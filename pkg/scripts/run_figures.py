#!/usr/bin/env python3
"""Regenerate the data grids behind all bundled figures.

Writes one CSV per figure into the output directory using the same code
path as `qlink reproduce`, so the files carry the usual metadata header.

    python scripts/run_figures.py --out-dir results/ [--figures fig5 fig7]
"""

import argparse
import json
import pathlib
import sys

from qlink.cli import main as qlink_main
from qlink.config import FIGURES


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="figures-out")
    parser.add_argument("--figures", nargs="*", default=list(FIGURES),
                        choices=list(FIGURES))
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for figure in args.figures:
        config_path = out_dir / f"{figure}.json"
        config_path.write_text(json.dumps(
            {"schema_version": 1, "mode": "reproduce", "figure": figure},
            indent=2) + "\n")
        out_path = out_dir / f"{figure}.csv"
        code = qlink_main(["reproduce", "--config", str(config_path),
                           "--out", str(out_path)])
        if code != 0:
            print(f"reproduce failed for {figure} (exit {code})", file=sys.stderr)
            return code
        print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
