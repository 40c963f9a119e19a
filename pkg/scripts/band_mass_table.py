"""Print the per-band mass distribution of the Gaussian wave packet.

Usage: python scripts/band_mass_table.py [--eps 1/32] [--lattice mathieu]
"""

import argparse
from fractions import Fraction

import numpy as np

from blochstep import (
    band_masses,
    build_grid,
    lattice_from_spec,
    sample_gaussian,
    solve_bands,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", default="1/32")
    ap.add_argument("--lattice", default="mathieu")
    ap.add_argument("--R", type=int, default=32)
    ap.add_argument("--M", type=int, default=8)
    args = ap.parse_args()
    eps = float(Fraction(args.eps))
    grid = build_grid(eps, args.R)
    Lambda = max(args.R, 32)
    tab = solve_bands(lattice_from_spec(args.lattice, Lambda), grid, Lambda,
                      args.M)
    masses = band_masses(sample_gaussian(grid), tab)
    print(f"lattice = {args.lattice}, eps = {args.eps}")
    print("band    norm        norm^2")
    for m, v in enumerate(masses, start=1):
        print(f"{m:4d}  {v:.5e}  {v * v:.5e}")
    print(f"sum of squared norms: {np.sum(masses ** 2):.6f}")


if __name__ == "__main__":
    main()
