"""Locate the caustic onset of the band-2 Hamilton-Jacobi phase.

Initial phase -cos x under the harmonic external potential; reports the
detected onset time at two grid resolutions.
"""

import numpy as np

from blochstep import (
    build_grid,
    external_from_spec,
    hj_solve,
    kronig_penney,
    solve_bands,
)


def main():
    grid = build_grid(1 / 32, 64)
    tab = solve_bands(kronig_penney(64), grid, 64, 8)
    U = external_from_spec("harmonic")
    for nx in (1024, 2048):
        _, rep = hj_solve(tab, 2, U, lambda x: -np.cos(x), 0.4, nx)
        status = f"t_c = {rep.t_c:.4f} at x = {rep.x_c:.3f}" \
            if rep.detected else "no caustic in window"
        print(f"nx = {nx}: {status}")


if __name__ == "__main__":
    main()
