"""Tabulate the densities of X_n[k] for a source law as plot-ready CSV.

    python3 scripts/marginal_density_table.py --model gamma:a=1,rate=1 --n 5 > dens.csv
"""
import argparse

import numpy as np

from sbperm.dist_models import parse_model
from sbperm.exact_laws import marginal_density


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="gamma:a=1,rate=1")
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--x-max", type=float, default=6.0)
    ap.add_argument("--points", type=int, default=121)
    args = ap.parse_args()

    model = parse_model(args.model)
    xs = np.linspace(args.x_max / args.points, args.x_max, args.points)
    print("x," + ",".join(f"k{k}" for k in range(1, args.n + 1)) + ",source")
    for x in xs:
        row = [marginal_density(model, args.n, k, x) for k in range(1, args.n + 1)]
        print(f"{x:.17g}," + ",".join(f"{v:.17g}" for v in row) + f",{float(model.density(x)):.17g}")


if __name__ == "__main__":
    main()
