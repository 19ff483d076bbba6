"""How fast the finite-n last pick approaches its limit.

For gamma(a, 1) sources and growing n, prints the two-sample KS distance
between n^{1/a} X_n^rev[1] and xi^rev[1], and the total variation distance
between the law of J_{n,1} and the limit J_1 (a = 1 only).

    python3 scripts/finite_n_convergence.py --a 1 --reps 50000
"""
import argparse

import numpy as np
from scipy import stats

from sbperm.asymptotics import finite_last_pick, j1_pmf, limit_sbp_sample
from sbperm.dist_models import GammaModel
from sbperm.rng import named_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--reps", type=int, default=50_000)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 100, 1000, 10_000])
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    a = args.a
    xi = limit_sbp_sample(a, 1.0, 1, named_stream(args.seed, "script.xi"), size=args.reps).xi_sbp[:, 0]
    pmf = np.array([j1_pmf(k) for k in range(1, 31)]) if a == 1 else None
    print("n,ks_distance,ks_pvalue,tv_J1")
    for n in args.sizes:
        x, j = finite_last_pick(GammaModel(a, 1.0), n, args.reps, named_stream(args.seed, f"script.finite.{n}"))
        res = stats.ks_2samp(n ** (1.0 / a) * x, xi)
        tv = ""
        if pmf is not None:
            freq = np.bincount(np.minimum(j, 31), minlength=32)[1:31] / args.reps
            tv = f"{0.5 * (np.abs(freq - pmf).sum() + abs((1 - freq.sum()) - (1 - pmf.sum()))):.5f}"
        print(f"{n},{res.statistic:.5f},{res.pvalue:.4g},{tv}")


if __name__ == "__main__":
    main()
