"""Fit the per-window dephasing probability that reproduces a target cycle error.

The shipped value ``DEFAULT_WINDOW_DEPHASING`` came from running this script
once.  For each candidate window probability the timing table is rescaled so
the circuit-averaged twirled dephasing at the coherent rate equals the
candidate, then the incoherent model is run through zero- and one-cycle
memory experiments.  A straight line through the points gives the value that
hits the target.

    python3 demos/calibrate_dephasing.py --shots 20000
"""

import argparse

import numpy as np

from ftqec.noise import NoiseModel, calibrate_timing
from ftqec.pipeline import cycle_error
from ftqec.protocol import reference_cycle_circuit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", type=float, default=1.80e-2)
    ap.add_argument("--shots", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--grid", default="1.4e-4,1.8e-4,2.2e-4")
    args = ap.parse_args()

    coherent = NoiseModel(dephasing_mode="coherent")
    circ = reference_cycle_circuit()
    xs, ys, ws = [], [], []
    for q in (float(v) for v in args.grid.split(",")):
        timing = calibrate_timing(coherent, q, circ)
        p, s = cycle_error(NoiseModel(), args.shots, args.seed, timing=timing)
        print(f"window dephasing {q:.2e}: p_cycle = {p:.4e} +- {s:.1e}")
        xs.append(q)
        ys.append(p)
        ws.append(1.0 / max(s, 1e-6))
    slope, icept = np.polyfit(xs, ys, 1, w=ws)
    print(f"p_cycle ~ {icept:.3e} + {slope:.1f} * q")
    print(f"q for p_cycle = {args.target:.3e}: {(args.target - icept) / slope:.3e}")


if __name__ == "__main__":
    main()
