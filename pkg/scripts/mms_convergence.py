#!/usr/bin/env python3
"""Manufactured-solution convergence sweep for the 1D two-fluid solver.

Prints L2 errors and observed orders for the partial masses and the
velocity across a sequence of grid doublings.
"""

import argparse

from bifluid.config import SimConfig
from bifluid.verify import convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=128, help="coarsest cell count")
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--t-end", type=float, default=0.05)
    ap.add_argument("--mu", type=float, default=0.02)
    args = ap.parse_args()

    cfg = SimConfig(
        n=args.n,
        gamma_plus=3.0,
        gamma_minus=1.5,
        mu=args.mu,
        t_end=args.t_end,
        n_snapshots=2,
        mms_enabled=True,
    )
    rep = convergence_study(cfg, args.levels)
    header = f"{'n':>6s}" + "".join(f"{'err_' + v:>14s}{'order':>8s}" for v in rep.errors)
    print(header)
    for i, n in enumerate(rep.ns):
        row = f"{n:>6d}"
        for v in rep.errors:
            row += f"{rep.errors[v][i]:>14.4e}"
            row += f"{rep.orders[v][i - 1]:>8.3f}" if i > 0 else f"{'':>8s}"
        print(row)
    print(f"min observed order: {rep.min_order():.3f}")


if __name__ == "__main__":
    main()
