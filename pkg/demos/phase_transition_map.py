"""Phase-transition map of the consistency condition, single cell.

Sweeps the (L^2/N, K/N) plane at a small desk scale, prints the
satisfaction-frequency grids for known and unknown large-scale fading side
by side, and writes both as CSV. The known-fading map is symmetric about
K/N = 0.5; the unknown-fading feasible region is a strict subset that
collapses for K/N > 0.5.

Run:  python3 demos/phase_transition_map.py [out_dir]
"""

import sys

from covdetect.model import SystemConfig
from covdetect.phase import (phase_sweep, sweep_to_csv, boundary_50,
                             REGIME_SINGLE_KNOWN, REGIME_SINGLE_UNKNOWN)

N = 64
L_VALUES = [3, 4, 5, 6, 7]
K_VALUES = [4, 8, 16, 24, 32, 40, 48, 56, 60]
TRIALS = 20


def main(out_dir="."):
    maps = {}
    for regime in (REGIME_SINGLE_KNOWN, REGIME_SINGLE_UNKNOWN):
        cfg = SystemConfig(B=1, N=N, K=K_VALUES[0], L=L_VALUES[0])
        cells = phase_sweep(cfg, L_VALUES, K_VALUES, TRIALS, regime, seed=0)
        maps[regime] = cells
        path = f"{out_dir}/phase_{regime}.csv"
        sweep_to_csv(cells, path)
        print(f"\n{regime}  (N={N}, {TRIALS} trials/cell) -> {path}")
        print("L^2/N \\ K/N " + " ".join(f"{k / N:5.2f}" for k in K_VALUES))
        by = {(c.L, c.K): c.freq for c in cells}
        for L in L_VALUES:
            row = " ".join(f"{by[(L, k)]:5.2f}" for k in K_VALUES)
            print(f"   {L * L / N:5.2f}    {row}")
        crossings = boundary_50(cells)
        if crossings:
            txt = ", ".join(f"L={L}: K~{k:.1f}" for L, k in sorted(crossings.items()))
            print(f"50% boundary: {txt}")
    return maps


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
