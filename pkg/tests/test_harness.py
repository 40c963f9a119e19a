import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochstep import WaveField, build_grid, sample_gaussian
from blochstep.errors import ReferenceTooCoarse, ShapeMismatch
from blochstep.harness import (
    ErrorReport,
    ExperimentConfig,
    compare_solutions,
    config_hash,
    emit_report,
    observed_orders,
    parse_config_file,
    run_convergence_study,
    selftest,
    write_manifest,
)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.25, 8.0), st.floats(0.1, 6.0))
def test_order_computation_exact_on_synthetic(C, p):
    hs = [0.5 ** i for i in range(5)]
    errors = [C * h ** p for h in hs]
    for order in observed_orders(errors):
        assert abs(order - p) < 1e-10


def test_compare_solutions_trivial_cases(rng):
    grid = build_grid(1.0 / 8, 16)
    psi = sample_gaussian(grid)
    assert compare_solutions(psi, psi) == (0.0, 0.0)
    c = 0.37
    shifted = WaveField(grid, psi.values + c)
    l2, linf = compare_solutions(shifted, psi)
    assert abs(l2 - c * np.sqrt(2 * np.pi)) < 1e-12
    assert abs(linf - c) < 1e-14
    other = sample_gaussian(build_grid(1.0 / 4, 16))
    with pytest.raises(ShapeMismatch):
        compare_solutions(psi, other)


def test_spatial_study_spectral_decay():
    cfg = ExperimentConfig(scenario="spatial", epsilon=1 / 8, R=16, M=6,
                           Lambda=16, dt=0.005, T=0.05, schemes=("bd",))
    report = run_convergence_study(cfg)[0]
    assert report.label == "dx/eps"
    assert all(a > b for a, b in zip(report.l2, report.l2[1:]))
    assert report.orders[-1] > 6
    assert len(report.wall_clock) == len(report.levels)


def test_temporal_study_runs_both_schemes():
    cfg = ExperimentConfig(scenario="temporal", epsilon=1 / 8, R=16, M=12,
                           Lambda=16, dt_list=(0.02, 0.01, 0.005), T=0.1,
                           schemes=("bd", "ts"), external="harmonic")
    reports = run_convergence_study(cfg)
    assert [r.scheme for r in reports] == ["bd", "ts"]
    assert all(len(r.orders) == 2 for r in reports)


def test_single_level_study_has_empty_orders(tmp_path):
    cfg = ExperimentConfig(scenario="spatial", epsilon=1 / 8, R=4, M=2,
                           Lambda=8, dt=0.01, T=0.02, schemes=("bd",))
    report = run_convergence_study(cfg)[0]
    assert report.orders == []
    path = emit_report(report, "csv", tmp_path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[3] == ""  # blank order cell


def test_reference_too_coarse_rejected():
    cfg = ExperimentConfig(scenario="spatial", epsilon=1 / 8, R=8, M=2,
                           Lambda=16, dt=0.01, T=0.02, schemes=("bd",),
                           reference_spatial_factor=1)
    with pytest.raises(ReferenceTooCoarse):
        run_convergence_study(cfg)


def test_reports_byte_deterministic(tmp_path):
    report = ErrorReport(scheme="bd", label="dt",
                         levels=[0.1, 0.05, 0.025],
                         l2=[1e-2, 2.5e-3, 6.26e-4],
                         linf=[2e-2, 5e-3, 1.2e-3],
                         orders=[2.0, 1.9978],
                         wall_clock=[0.5, 1.0, 2.0],
                         mass_drift=[1e-9, 1e-9, 1e-9])
    for fmt in ("csv", "markdown-table", "svg-lineplot"):
        p1 = emit_report(report, fmt, tmp_path)
        first = p1.read_bytes()
        p2 = emit_report(report, fmt, tmp_path)
        assert p2 == p1
        assert p2.read_bytes() == first
    svg = (tmp_path / "bd_dt.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_manifest_lists_files_and_hash(tmp_path):
    cfg = ExperimentConfig()
    files = [tmp_path / "a.csv", tmp_path / "b.svg"]
    path = write_manifest(tmp_path, cfg, files)
    import json
    manifest = json.loads(path.read_text())
    assert manifest["files"] == ["a.csv", "b.svg"]
    assert manifest["config_hash"] == config_hash(cfg)


def test_config_file_roundtrip(tmp_path):
    text = """
# temporal study at coarse scale
scenario = temporal
epsilon = 0.125
R = 16
M = 6
lattice = mathieu
external = harmonic
schemes = bd,ts
dt_list = 0.02,0.01,0.005
T = 0.1
"""
    path = tmp_path / "study.cfg"
    path.write_text(text)
    cfg = parse_config_file(path)
    assert cfg.scenario == "temporal"
    assert cfg.epsilon == 0.125
    assert cfg.schemes == ("bd", "ts")
    assert cfg.dt_list == (0.02, 0.01, 0.005)


def test_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("scenario = spatial\nwavelength = 3\n")
    with pytest.raises(ValueError, match="unknown key"):
        parse_config_file(path)


def test_config_rejects_nondecreasing_dt_list():
    with pytest.raises(ValueError, match="decreasing"):
        ExperimentConfig(scenario="temporal", dt_list=(0.01, 0.02))


def test_selftest_passes():
    import time
    tic = time.time()
    assert selftest(verbose=False)
    assert time.time() - tic < 60
