#!/usr/bin/env python3
"""Run the sum-rate-versus-BS-power sweep (10 users) and print scheme ratios."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sfma.cli import cli_main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "sweep_power.cfg"

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(CONFIG))
    parser.add_argument("--output", default=None)
    args = parser.parse_args()
    argv = ["sweep", "--config", args.config]
    if args.output:
        argv += ["--output", args.output]
    raise SystemExit(cli_main(argv))
