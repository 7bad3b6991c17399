"""Occupancy of the TD, FD and DAFT channel matrices for the reference EVA realization.

Usage: python demos/occupancy.py [threshold_db]
"""

import sys

from fafdm.channel import (
    EVA,
    channel_from_speeds,
    daft_channel_matrix,
    fd_channel_matrix,
    matrix_occupancy,
    occupied_halfwidth,
    td_channel_matrix,
)
from fafdm.validation import REFERENCE_POWERS_DB, REFERENCE_SPEEDS_KMH
from fafdm.waveform import FrameConfig, PulseConfig


def main(threshold=-30.0):
    cfg = FrameConfig()
    pc = PulseConfig(symbol_period=cfg.T_s)
    ch = channel_from_speeds(EVA.tap_delays_s, REFERENCE_POWERS_DB, REFERENCE_SPEEDS_KMH, 6e9, cfg)
    for name, build in (("TD", td_channel_matrix), ("FD", fd_channel_matrix), ("DAFT", daft_channel_matrix)):
        occ = matrix_occupancy(build(ch, cfg, pc), threshold)
        print(f"{name:5s} {len(occ):7d} entries above {threshold:g} dB, half-width {occupied_halfwidth(occ, cfg.N)}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else -30.0)
