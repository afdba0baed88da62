#!/usr/bin/env python3
"""Reproduce the frame constants of the bump steerable bank.

The reference configuration (side 128, J = 5, Q = 16) gives
A_W ~= 2.0 and B_W ~= 4.6.
"""

import argparse
import time

from phasecov.wavelets import build_bump_bank, frame_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--side", type=int, default=128)
    ap.add_argument("--J", type=int, default=5)
    ap.add_argument("--Q", type=int, default=16)
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()

    t0 = time.time()
    bank = build_bump_bank(args.side, args.J, args.Q)
    a, b = frame_bounds(bank, tol=args.tol)
    print(f"side={args.side} J={args.J} Q={args.Q}: "
          f"A_W = {a:.4f}  B_W = {b:.4f}  ({time.time() - t0:.1f}s)")
    print(f"coefficients: {bank.coefficient_count()} "
          f"({bank.coefficient_count() / bank.d:.2f} x d)")


if __name__ == "__main__":
    main()
