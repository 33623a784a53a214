"""Mean phase-difference variance after each click for |n>|n> inputs."""

import argparse
import math

import numpy as np

from laserstate import twolaser as tl
from laserstate.hilbert import ModeSpace, fock_state


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 20])
    ap.add_argument("--events", type=int, default=6)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--grid", type=int, default=512)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args(argv)
    print(f"uniform: {math.pi**2 / 3:.4f}   one click: {math.pi**2 / 3 - 2:.4f}")
    for n in args.n:
        state = tl.TwoCavityState.product(fock_state(n, ModeSpace("a", n)), fock_state(n, ModeSpace("b", n)))
        events = min(args.events, 2 * n)
        runs = tl.run_seeds(state, 0.0, events, range(args.seeds), args.grid, args.workers)
        trace = np.mean([r.phase_variance_trace for r in runs], axis=0)
        print(f"n={n:3d}: " + " ".join(f"{v:.3f}" for v in trace))


if __name__ == "__main__":
    main()
