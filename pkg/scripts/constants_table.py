"""Print the K_1 and J_1 laws at a = 1 next to Monte Carlo frequencies.

    python3 scripts/constants_table.py --reps 200000 --kmax 10
"""
import argparse

import numpy as np

from sbperm.asymptotics import (j1_moments, j1_pmf, k1_partial_expectation, k1_pmf, limit_j_prefix, limit_k1,
                                prob_last_pick_is_min)
from sbperm.rng import named_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--reps", type=int, default=200_000)
    ap.add_argument("--kmax", type=int, default=10)
    ap.add_argument("--eps", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    J, _ = limit_j_prefix(1.0, 1, args.eps, args.reps, named_stream(args.seed, "script.j1"))
    K = limit_k1(1.0, args.eps, args.reps, named_stream(args.seed, "script.k1"), cap=args.kmax)
    j1 = J[:, 0]
    print(f"P(last pick is the minimum) = {prob_last_pick_is_min():.10f}")
    mass, mean = j1_moments()
    print(f"E J_1 = {mean:.8f} (mass {mass:.10f}); MC mean {j1.mean():.4f}")
    for n in (10**2, 10**3, 10**4, 10**5, 10**6):
        print(f"sum_(k<={n:>7}) k P(K_1=k) = {k1_partial_expectation(n):.4f}")
    print(f"{'k':>3} {'P(K1=k)':>12} {'MC':>10} {'P(J1=k)':>12} {'MC':>10}")
    for k in range(1, args.kmax + 1):
        print(f"{k:>3} {k1_pmf(k):12.8f} {np.mean(K == k):10.6f} {j1_pmf(k):12.8f} {np.mean(j1 == k):10.6f}")


if __name__ == "__main__":
    main()
