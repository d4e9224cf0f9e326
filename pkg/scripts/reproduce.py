#!/usr/bin/env python3
"""Run all four studies with the baked-in protocol and write CSV + SVG output.

    python scripts/reproduce.py --out results --jobs 4
"""

import argparse
import sys
import time
from pathlib import Path

from toolselect.cli import STUDIES, cmd_experiment
from toolselect.config import RunConfig


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", choices=STUDIES, action="append", help="restrict to one study (repeatable)")
    args = ap.parse_args(argv)

    cfg = RunConfig.load(seed=args.seed, out=str(args.out), jobs=args.jobs)
    for study in args.only or STUDIES:
        start = time.perf_counter()
        code = cmd_experiment(cfg, study)
        print(f"[{study}] {time.perf_counter() - start:.1f}s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
