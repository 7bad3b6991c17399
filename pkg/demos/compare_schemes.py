"""Compare the equalizers on the same frames at one Es/N0.

Usage: python demos/compare_schemes.py [frames] [esn0_db]
"""

import sys

from fafdm.sim import SimConfig, SweepConfig, run_point

SCHEMES = [
    ("fd-two-stage beta=7", {"scheme": "fd-two-stage", "beta": 7}),
    ("fd-two-stage beta=3", {"scheme": "fd-two-stage", "beta": 3}),
    ("banded-lmmse-only beta=7", {"scheme": "banded-lmmse-only", "beta": 7}),
    ("td-two-stage alpha=7", {"scheme": "td-two-stage", "alpha": 7}),
    ("ofdm-fd beta=7", {"scheme": "ofdm-fd", "beta": 7}),
]


def main(frames=200, esn0=25.0):
    base = SimConfig(seed=1, sweep=SweepConfig(esn0_db=(esn0,), max_frames=frames, target_bit_errors=10**9))
    print(f"{frames} frames at Es/N0 = {esn0} dB")
    for label, eq in SCHEMES:
        rec = run_point(base.replace(equalizer=eq), esn0)
        print(f"{label:26s} BER {rec.ber:.3e}  errors {rec.bit_errors:5d}  mean CM {rec.mean_cm:10.0f}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(int(args[0]) if args else 200, float(args[1]) if len(args) > 1 else 25.0)
