#!/usr/bin/env python3
"""Regenerate the bundled default interference-factor table.

The bundled table is a hand-digitized qualitative reproduction of the
measured decoder-separation surface: the factor sits near its plateau at low
link SNR / low group power and decays toward a small residual floor at high
SNR. Values are rounded to three decimals, as digitized.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sfma.semantic_rate import InterferenceProfile, save_rho_table

POWER_AXIS_DBW = np.arange(-10.0, 40.0 + 1e-9, 5.0)
SNR_AXIS_DB = np.arange(-10.0, 40.0 + 1e-9, 5.0)

PLATEAU = 0.94
FLOOR = 0.002
SNR_SLOPE = 0.45
SNR_MID_DB = 2.0
POWER_SLOPE = 0.012
POWER_MID_DBW = 10.0


def build_profile() -> InterferenceProfile:
    snr, power = np.meshgrid(SNR_AXIS_DB, POWER_AXIS_DBW)
    expo = SNR_SLOPE * (snr - SNR_MID_DB) + POWER_SLOPE * (power - POWER_MID_DBW)
    values = FLOOR + PLATEAU / (1.0 + np.exp(expo))
    values = np.clip(np.round(values, 3), 0.0, 1.0)
    return InterferenceProfile.from_table(POWER_AXIS_DBW, SNR_AXIS_DB, values)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--output",
        default=str(Path(__file__).resolve().parents[1] / "src" / "sfma" / "data" / "rho_default.csv"),
    )
    args = parser.parse_args()
    save_rho_table(build_profile(), args.output)
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
