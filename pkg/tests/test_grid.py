import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochstep import build_grid, discrete_norms, sample_gaussian, WaveField
from blochstep.errors import NonIntegerCellCount, ResolutionTooSmall, ShapeMismatch
from blochstep.grid import field_difference, load_wavefield_binary, save_wavefield_binary


def test_small_grid_nodes():
    grid = build_grid(0.5, 8)
    assert grid.L == 2
    np.testing.assert_allclose(grid.k_nodes, [-0.5, 0.0])
    np.testing.assert_allclose(grid.y_nodes, np.arange(8) * np.pi / 4)


def test_cell_start_coordinates():
    grid = build_grid(1.0 / 32, 16)
    assert grid.L == 32
    assert abs(grid.x_nodes[1, 0] - 2 * np.pi / 32) < 1e-14


def test_three_cell_grid_against_scalar_loop():
    grid = build_grid(1.0 / 3, 8)
    assert grid.L == 3
    for l in range(3):
        for r in range(8):
            x = (1.0 / 3) * (2 * np.pi * l + 2 * np.pi * r / 8)
            assert abs(grid.x_nodes[l, r] - x) < 1e-14
    assert grid.x_nodes[2, 7] < 2 * np.pi


def test_grid_rejects_bad_epsilon_and_resolution():
    with pytest.raises(NonIntegerCellCount):
        build_grid(0.3, 8)
    with pytest.raises(ResolutionTooSmall):
        build_grid(0.5, 2)


def test_grid_maps_bijective():
    grid = build_grid(1.0 / 8, 16)
    flat = grid.x_nodes.reshape(-1)
    assert np.unique(flat).size == flat.size
    spacing = np.diff(np.sort(flat))
    np.testing.assert_allclose(spacing, 2 * np.pi / (8 * 16), atol=1e-13)


def test_gaussian_peak_and_tail():
    grid = build_grid(1.0 / 32, 32)
    psi = sample_gaussian(grid)
    peak = (10 / np.pi) ** 0.25
    i = np.argmin(np.abs(grid.x_nodes.reshape(-1) - np.pi))
    assert abs(psi.values.reshape(-1)[i] - peak) < 1e-3
    assert abs(psi.values[0, 0]) < 1e-21


def test_gaussian_unit_mass():
    grid = build_grid(1.0 / 32, 32)
    l2, _ = discrete_norms(sample_gaussian(grid))
    assert abs(l2 - 1.0) < 1e-6


def test_norms_of_simple_fields():
    grid = build_grid(1.0 / 4, 16)
    zero = WaveField(grid, np.zeros((4, 16), dtype=complex))
    assert discrete_norms(zero) == (0.0, 0.0)
    one = WaveField(grid, np.ones((4, 16), dtype=complex))
    l2, linf = discrete_norms(one)
    assert abs(l2 - np.sqrt(2 * np.pi)) < 1e-12
    assert linf == 1.0


def test_field_difference_requires_matching_grids():
    a = WaveField(build_grid(1.0 / 4, 16), np.zeros((4, 16)))
    b = WaveField(build_grid(1.0 / 8, 16), np.zeros((8, 16)))
    with pytest.raises(ShapeMismatch):
        field_difference(a, b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1),
       st.floats(0.1, 10.0), st.floats(-np.pi, np.pi))
def test_norm_homogeneity_and_triangle(seed, mag, arg):
    rng = np.random.default_rng(seed)
    grid = build_grid(1.0 / 4, 8)
    f = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    g = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    alpha = mag * np.exp(1j * arg)
    fa = WaveField(grid, alpha * f)
    assert abs(discrete_norms(fa)[0]
               - abs(alpha) * discrete_norms(WaveField(grid, f))[0]) < 1e-10
    lhs = discrete_norms(WaveField(grid, f + g))[0]
    rhs = discrete_norms(WaveField(grid, f))[0] + discrete_norms(WaveField(grid, g))[0]
    assert lhs <= rhs + 1e-12


def test_binary_roundtrip(tmp_path, rng):
    grid = build_grid(1.0 / 4, 8)
    psi = WaveField(grid, rng.standard_normal((4, 8))
                    + 1j * rng.standard_normal((4, 8)))
    path = tmp_path / "field.bin"
    save_wavefield_binary(psi, path)
    back = load_wavefield_binary(path, grid.epsilon)
    np.testing.assert_allclose(back.values, psi.values, atol=0)
