"""Bloch-decomposition and time-splitting spectral solvers for the 1D
semiclassical Schrodinger equation with a periodic lattice potential."""

from .bands import (
    BandTable,
    assemble_hk,
    berry_connection,
    effective_mass,
    eval_band,
    eval_band_deriv,
    eval_band_second_deriv,
    eval_chi,
    fold_k,
    solve_bands,
)
from .grid import (
    CellField,
    SimulationGrid,
    WaveField,
    build_grid,
    discrete_norms,
    sample_gaussian,
)
from .potential import (
    ExternalPotential,
    PeriodicPotential,
    eval_external,
    external_from_spec,
    from_samples,
    kronig_penney,
    lattice_from_spec,
    mathieu,
)
from .steppers import (
    StepperConfig,
    bd_periodic_flow,
    bd_step,
    evolve,
    external_phase,
    ts_step,
)
from .wkb import (
    AmplitudeTrajectory,
    CausticReport,
    ChiInterpolator,
    PhaseTrajectory,
    WkbComparison,
    bicharacteristics,
    build_wkb_initial,
    hj_solve,
    reconstruct_sc,
    transport_solve,
    wkb_compare,
    wkb_pipeline,
)
from .transform import (
    BlochCoeffs,
    band_mass,
    band_masses,
    band_project,
    band_reconstruct,
    cell_forward,
    cell_inverse,
)

__version__ = "0.1.0"
