"""Large-scale (epsilon = 1/1024) scheme comparison; several minutes of runtime.

Equivalent to running the extended acceptance tier:
    BLOCHSTEP_EXTENDED=1 pytest tests/test_acceptance.py -k extended
"""

import time

import numpy as np

from blochstep import (
    StepperConfig,
    WaveField,
    build_grid,
    discrete_norms,
    evolve,
    external_from_spec,
    mathieu,
    sample_gaussian,
    solve_bands,
)
from blochstep.grid import field_difference


def main():
    eps = 1.0 / 1024
    T = 1.0
    U = external_from_spec("harmonic")
    V = mathieu(64)
    grid = build_grid(eps, 32)
    tab = solve_bands(V, grid, 32, 8)
    psi0 = sample_gaussian(grid)

    tic = time.time()
    grid_ref = build_grid(eps, 64)
    tab_ref = solve_bands(V, grid_ref, 64, 8)
    ref = evolve(sample_gaussian(grid_ref),
                 StepperConfig("bd", "strang", T / 8000, bands=tab_ref,
                               external=U), T, 8000).final
    ref_c = WaveField(grid, ref.values[:, ::2])
    print(f"reference built in {time.time() - tic:.0f}s")

    for scheme, Ns in (("ts", (1000, 2000, 4000)), ("bd", (100, 200, 400))):
        errs = []
        for N in Ns:
            if scheme == "bd":
                cfg = StepperConfig("bd", "strang", T / N, bands=tab,
                                    external=U)
            else:
                cfg = StepperConfig("ts", "strang", T / N, lattice=V,
                                    external=U)
            out = evolve(psi0, cfg, T, N).final
            errs.append(discrete_norms(field_difference(out, ref_c))[0])
        orders = [np.log2(a / b) for a, b in zip(errs, errs[1:])]
        print(f"{scheme}: errors",
              " ".join(f"{e:.3e}" for e in errs),
              "| orders", " ".join(f"{o:.2f}" for o in orders))


if __name__ == "__main__":
    main()
