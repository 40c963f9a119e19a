"""Two-scale grid, complex field containers, and discrete norms.

The computational domain is [0, 2*pi] with periodic boundary conditions.
It holds L lattice cells of period 2*pi*eps, each resolved with R points,
so that the x-samples x_{l,r} = eps*(2*pi*(l-1) + y_r) form a uniform grid
of L*R points.  Quasi-momenta k_l live in the Brillouin zone [-1/2, 1/2).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import IoFailure, NonIntegerCellCount, ResolutionTooSmall, ShapeMismatch

_WAVEFIELD_MAGIC = b"BDWF"


@dataclass(frozen=True)
class SimulationGrid:
    """Immutable two-scale discretization of [0, 2*pi].

    Attributes:
        epsilon: scale ratio, a reciprocal of an integer.
        L: number of lattice cells, L = 1/epsilon.
        R: grid points per cell (power of two).
        k_nodes: (L,) quasi-momenta -1/2 + (l-1)/L.
        y_nodes: (R,) fast coordinates 2*pi*(r-1)/R.
        x_nodes: (L, R) physical coordinates eps*(2*pi*(l-1) + y_r).
    """

    epsilon: float
    L: int
    R: int
    k_nodes: np.ndarray
    y_nodes: np.ndarray
    x_nodes: np.ndarray

    @property
    def n_points(self) -> int:
        return self.L * self.R

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / (self.L * self.R)


def build_grid(epsilon: float, R: int) -> SimulationGrid:
    """Build the two-scale grid for the given scale ratio and cell resolution."""
    inv = 1.0 / epsilon
    L = int(round(inv))
    if abs(inv - L) > 1e-9 or L < 1:
        raise NonIntegerCellCount(f"1/epsilon = {inv} is not an integer")
    if abs(L * epsilon - 1.0) > 1e-12:
        raise NonIntegerCellCount(f"L*epsilon = {L * epsilon} differs from 1")
    if R < 4:
        raise ResolutionTooSmall(f"R = {R} < 4")
    if R & (R - 1) != 0:
        raise ResolutionTooSmall(f"R = {R} is not a power of two")

    ell = np.arange(1, L + 1)
    k_nodes = -0.5 + (ell - 1) / L
    y_nodes = 2.0 * np.pi * np.arange(R) / R
    x_nodes = epsilon * (2.0 * np.pi * (ell[:, None] - 1) + y_nodes[None, :])
    return SimulationGrid(
        epsilon=float(epsilon), L=L, R=R,
        k_nodes=k_nodes, y_nodes=y_nodes, x_nodes=x_nodes,
    )


@dataclass
class WaveField:
    """Complex samples psi_{l,r} on the physical two-scale grid."""

    grid: SimulationGrid
    values: np.ndarray  # (L, R) complex

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.L, self.grid.R):
            raise ShapeMismatch(
                f"values shape {self.values.shape} != {(self.grid.L, self.grid.R)}")

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy())


@dataclass
class CellField:
    """Mixed (k_l, y_r) representation of a wave field."""

    grid: SimulationGrid
    values: np.ndarray  # (L, R) complex

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.L, self.grid.R):
            raise ShapeMismatch(
                f"values shape {self.values.shape} != {(self.grid.L, self.grid.R)}")


def sample_gaussian(grid: SimulationGrid) -> WaveField:
    """Normalized Gaussian wave packet centered at x = pi."""
    x = grid.x_nodes
    values = (10.0 / np.pi) ** 0.25 * np.exp(-5.0 * (x - np.pi) ** 2)
    return WaveField(grid, values.astype(complex))


def discrete_norms(f) -> tuple[float, float]:
    """Discrete (l2, linf) norms with uniform quadrature weight dx.

    Accepts a WaveField, a CellField on the physical grid, or a bare array
    sampled on a uniform periodic grid over [0, 2*pi].
    """
    if isinstance(f, (WaveField, CellField)):
        values = f.values
        dx = f.grid.dx
    else:
        values = np.asarray(f)
        dx = 2.0 * np.pi / values.size
    if not np.all(np.isfinite(values)):
        raise ShapeMismatch("non-finite samples in norm computation")
    absval = np.abs(values)
    linf = float(absval.max()) if absval.size else 0.0
    l2 = float(np.sqrt(dx * np.sum(absval ** 2)))
    return l2, linf


def field_difference(a: WaveField, b: WaveField) -> WaveField:
    """Pointwise difference a - b on a shared grid."""
    if a.grid.L != b.grid.L or a.grid.R != b.grid.R or a.grid.epsilon != b.grid.epsilon:
        raise ShapeMismatch("fields live on different grids")
    return WaveField(a.grid, a.values - b.values)


def save_wavefield_csv(psi: WaveField, path) -> None:
    """Write (l, r, x, Re psi, Im psi) rows."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["l", "r", "x", "re", "im"])
            for l in range(psi.grid.L):
                for r in range(psi.grid.R):
                    v = psi.values[l, r]
                    writer.writerow([
                        l + 1, r + 1,
                        f"{psi.grid.x_nodes[l, r]:.12g}",
                        f"{v.real:.12g}", f"{v.imag:.12g}",
                    ])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def save_wavefield_binary(psi: WaveField, path) -> None:
    """Binary dump: 16-byte header (magic, u32 L, u32 R, u32 pad), f64 pairs."""
    header = _WAVEFIELD_MAGIC + struct.pack("<III", psi.grid.L, psi.grid.R, 0)
    interleaved = np.empty((psi.grid.L, psi.grid.R, 2))
    interleaved[..., 0] = psi.values.real
    interleaved[..., 1] = psi.values.imag
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(interleaved.astype("<f8").tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_wavefield_binary(path, epsilon: float) -> WaveField:
    """Read a field written by save_wavefield_binary; grid is rebuilt from epsilon."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != _WAVEFIELD_MAGIC:
            raise IoFailure(f"{path}: bad wavefield header")
        L, R, _ = struct.unpack("<III", header[4:])
        raw = np.frombuffer(fh.read(), dtype="<f8").reshape(L, R, 2)
    grid = build_grid(epsilon, R)
    if grid.L != L:
        raise ShapeMismatch(f"file has L={L} but 1/epsilon={grid.L}")
    return WaveField(grid, raw[..., 0] + 1j * raw[..., 1])
