"""Detection error versus antenna count, single cell.

For a configuration near the phase boundary, the equal-error probability of
the coordinate-descent detector falls as the number of antennas M grows
(the sample covariance concentrates around the true covariance). The
ideal-covariance mode shows the M -> infinity floor.

Run:  python3 demos/error_vs_antennas.py
"""

import numpy as np

from covdetect import cli
from covdetect.model import SystemConfig

M_VALUES = [1, 2, 4, 8, 16, 64]
TRIALS = 40


def main():
    cfg = dict(SystemConfig(B=1, N=64, K=8, L=8).__dict__)
    print(f"single cell, N=64, K=8, L=8, {TRIALS} trials per point")
    for M in M_VALUES:
        cfg_m = {**cfg, "M": M}
        pes = [cli._pe_trial_single((cfg_m, 0, M, t, False, "single_known"))
               for t in range(TRIALS)]
        stderr = np.std(pes, ddof=1) / np.sqrt(TRIALS)
        print(f"M={M:4d}  pe={np.mean(pes):.4f} +/- {stderr:.4f}")
    pes = [cli._pe_trial_single((cfg, 0, len(M_VALUES), t, True, "single_known"))
           for t in range(TRIALS)]
    print(f"ideal   pe={np.mean(pes):.4f}  (exact covariance, M -> infinity)")


if __name__ == "__main__":
    main()
