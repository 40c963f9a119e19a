import numpy as np
import pytest

import blochstep.wkb as wkb_mod
from blochstep import (
    ChiInterpolator,
    bicharacteristics,
    build_grid,
    build_wkb_initial,
    eval_band,
    eval_band_deriv,
    external_from_spec,
    from_samples,
    hj_solve,
    kronig_penney,
    mathieu,
    reconstruct_sc,
    solve_bands,
    transport_solve,
    wkb_compare,
    wkb_pipeline,
)
from blochstep.errors import (
    BandGapTooSmall,
    CFLViolation,
    NonSmoothForce,
)

NONE = external_from_spec("none")
HARMONIC = external_from_spec("harmonic")
STEP = external_from_spec("step")

@pytest.fixture(scope="module")
def kp_table():
    grid = build_grid(1.0 / 32, 64)
    return solve_bands(kronig_penney(64), grid, 64, 8)


def gauss(x):
    return np.exp(-5.0 * (x - np.pi) ** 2)


def zero_phase(x):
    return 0.0 * x


def neg_cos(x):
    return -np.cos(x)


def test_hj_constant_phase_exact(baseline_mathieu):
    traj, rep = hj_solve(baseline_mathieu, 1, NONE, zero_phase, 0.5, 128)
    E0 = float(eval_band(baseline_mathieu, 1, 0.0))
    assert not rep.detected
    assert np.max(np.abs(traj.phi[-1] - (-E0 * traj.times[-1]))) < 1e-8
    assert np.max(np.abs(traj.p[-1])) < 1e-10


def test_hj_short_time_taylor(baseline_mathieu):
    t = 0.01
    traj, _ = hj_solve(baseline_mathieu, 1, HARMONIC, zero_phase, t, 256,
                       dt=t / 50)
    E0 = float(eval_band(baseline_mathieu, 1, 0.0))
    predicted = -(E0 + HARMONIC(traj.x)) * t
    assert np.max(np.abs(traj.phi[-1] - predicted)) < 10 * t ** 2


def test_hj_rejects_cfl_violation(kp_table):
    with pytest.raises(CFLViolation):
        hj_solve(kp_table, 2, HARMONIC, neg_cos, 0.1, 64, dt=1.0)


def test_transport_zero_velocity_identity(baseline_mathieu):
    traj, _ = hj_solve(baseline_mathieu, 1, NONE, zero_phase, 0.3, 128)
    amp = transport_solve(baseline_mathieu, 1, NONE, traj, gauss)
    assert np.max(np.abs(amp.a[-1] - amp.a[0])) < 1e-12


def test_transport_mass_conserved_and_self_converges(baseline_mathieu):
    # smooth periodic setup: the non-periodic harmonic force would put a
    # genuine seam jump into p, whose Gibbs ringing does not refine away
    def run(nx, steps):
        traj, _ = hj_solve(baseline_mathieu, 1, NONE, neg_cos, 0.2, nx,
                           dt=0.2 / steps)
        amp = transport_solve(baseline_mathieu, 1, NONE, traj, gauss)
        mass0 = np.sum(np.abs(amp.a[0]) ** 2) / nx
        mass1 = np.sum(np.abs(amp.a[-1]) ** 2) / nx
        return amp, abs(mass1 - mass0) / mass0
    coarse, drift_c = run(64, 100)
    fine, drift_f = run(128, 200)
    finest, _ = run(256, 400)
    assert drift_c < 1e-3
    assert drift_f < drift_c
    # Richardson: self-convergence error shrinks by roughly the scheme order
    e_c = np.max(np.abs(coarse.a[-1] - finest.a[-1][::4]))
    e_f = np.max(np.abs(fine.a[-1] - finest.a[-1][::2]))
    assert e_f < e_c / 2.0


def test_build_initial_zero_amplitude(baseline_mathieu):
    psi = build_wkb_initial(baseline_mathieu, 1, lambda x: 0.0 * x, zero_phase,
                            baseline_mathieu.grid)
    assert np.max(np.abs(psi.values)) == 0.0


def test_reconstruct_matches_initial_at_t0(baseline_mathieu):
    grid = baseline_mathieu.grid
    # macroscopic grid chosen to coincide with the fine two-scale nodes so
    # the periodic-spline resampling collocates exactly
    traj, amp, rep = wkb_pipeline(baseline_mathieu, 1, HARMONIC, gauss,
                                  zero_phase, 0.05, grid.L * grid.R)
    direct = build_wkb_initial(baseline_mathieu, 1, gauss, zero_phase, grid)
    recon = reconstruct_sc(traj, amp, baseline_mathieu, 1, grid, 0.0)
    assert np.max(np.abs(recon.values - direct.values)) < 1e-12


def test_chi_interpolator_refuses_degenerate_band():
    grid = build_grid(1.0 / 8, 16)
    free = solve_bands(from_samples(np.zeros(128), 16), grid, 16, 2)
    chi = ChiInterpolator(free, 1)
    with pytest.raises(BandGapTooSmall):
        chi.coeffs(0.5)  # free bands touch at the zone edge


def test_bicharacteristics_free_motion(baseline_mathieu):
    grid = build_grid(1.0 / 16, 16)
    free = solve_bands(from_samples(np.zeros(128), 16), grid, 16, 2)
    ts, X, Xi = bicharacteristics(free, 1, NONE, 1.0, 0.2, 1.0, 1e-3)
    assert np.max(np.abs(Xi - 0.2)) < 1e-12
    v = float(eval_band_deriv(free, 1, 0.2))
    assert np.max(np.abs(X - (1.0 + v * ts))) < 1e-8


def test_bicharacteristics_conserve_interpolant_hamiltonian():
    grid = build_grid(1.0 / 16, 16)
    free = solve_bands(from_samples(np.zeros(128), 16), grid, 16, 2)
    ts, X, Xi = bicharacteristics(free, 1, HARMONIC, np.pi + 0.3, 0.1,
                                  2.0, 1e-3)
    from blochstep.bands import fold_k
    H = np.array([float(eval_band(free, 1, float(fold_k(xi)))) + (x - np.pi) ** 2
                  for x, xi in zip(X, Xi)])
    assert np.max(np.abs(H - H[0])) < 1e-8
    # the classical energy differs from the interpolant Hamiltonian only by
    # the periodization kink of the free dispersion: a much looser bound
    E = 0.5 * Xi ** 2 + (X - np.pi) ** 2
    assert np.max(np.abs(E - E[0])) < 1e-2


def test_bicharacteristics_reject_step_potential(baseline_mathieu):
    with pytest.raises(NonSmoothForce):
        bicharacteristics(baseline_mathieu, 1, STEP, 1.0, 0.1, 0.5, 1e-3)


def test_caustic_detection_and_fold_bracket(kp_table):
    traj, rep = hj_solve(kp_table, 2, HARMONIC, neg_cos, 0.4, 1024)
    assert rep.detected
    assert 0.19 <= rep.t_c <= 0.29
    # family-of-characteristics oracle: the interior fold of the flow map
    # bounds the detector's onset time from above (the detector reacts to
    # the seam shear of the periodized external force first)
    x0s = np.linspace(0.8, 2 * np.pi - 0.8, 100)
    Xs = []
    for x0 in x0s:
        ts, X, _ = bicharacteristics(kp_table, 2, HARMONIC, float(x0),
                                     float(np.sin(x0)), 0.65, 5e-3)
        Xs.append(X)
    Xs = np.array(Xs)
    J = np.diff(Xs, axis=0)
    fold = None
    for it in range(Xs.shape[1]):
        if np.min(J[:, it]) <= 0:
            fold = ts[it]
            break
    assert fold is not None
    assert rep.t_c <= fold + 0.05


def test_pipeline_continues_past_unsupported_trigger(kp_table):
    traj, amp, rep = wkb_pipeline(kp_table, 2, HARMONIC, gauss, neg_cos,
                                  0.3, 512)
    assert rep.detected  # the seam trigger is reported ...
    assert abs(traj.times[-1] - 0.3) < 1e-12  # ... but integration completes


def test_wkb_epsilon_scaling():
    sups = []
    for eps_inv in (32, 64):
        grid = build_grid(1.0 / eps_inv, 32)
        tab = solve_bands(mathieu(32), grid, 32, 8)
        cmp = wkb_compare(tab, 1, HARMONIC, gauss, zero_phase, grid,
                          0.5, 256, 500, n_samples=6)
        sups.append(cmp.sup_band_l2)
    assert sups[1] < sups[0]


def test_kp_comparison_within_tolerance(kp_table):
    cmp = wkb_compare(kp_table, 2, HARMONIC, gauss, zero_phase,
                      kp_table.grid, 0.1, 256, 200, n_samples=6)
    # in-band sup error stays below 3x the reference tabulated value; the
    # lower side is not enforced (a more accurate asymptotic solve is fine)
    assert cmp.sup_band_l2 <= 3.5e-2
    assert not cmp.caustic.detected


def test_zero_berry_term_does_not_improve(baseline_mathieu, monkeypatch):
    def run():
        cmp = wkb_compare(baseline_mathieu, 1, HARMONIC, gauss, zero_phase,
                          baseline_mathieu.grid, 0.3, 128, 300, n_samples=4)
        return cmp.sup_band_l2
    with_beta = run()
    monkeypatch.setattr(wkb_mod, "_berry_interpolator",
                        lambda bands, m: (lambda k: 0.0))
    without_beta = run()
    # for this real, even lattice the geometric term is ~0, so dropping it
    # must not make the comparison better (it cannot strictly worsen it)
    assert without_beta >= with_beta - 1e-6
