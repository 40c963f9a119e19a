"""Truncated Bloch eigenproblem: assembly, solve, gauge fixing, and band queries.

The shifted Hamiltonian acts on the 2*Lambda lowest Fourier modes of the
periodic eigenfunction part; its matrix entry (i, j) (1-based) is
V-hat(i - j) + delta_ij * (1/2) * (k - Lambda + i - 1)^2.  Eigenvectors are
stored with unit Euclidean norm in coefficient space and a parallel-transport
gauge along the k-grid.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    BandCountExceedsTruncation,
    BandGapTooSmall,
    BandIndexOutOfRange,
    DegenerateCurvature,
    EigensolverFailure,
    IoFailure,
    TruncationTooSmall,
)
from .grid import SimulationGrid
from .potential import PeriodicPotential

_CACHE_MAGIC = b"BDBT"


def assemble_hk(V: PeriodicPotential, k: float, Lambda: int) -> np.ndarray:
    """Dense Hermitian 2*Lambda x 2*Lambda matrix of the shifted Hamiltonian."""
    if Lambda < 1:
        raise ValueError("Lambda must be >= 1")
    if V.Lambda < Lambda:
        raise TruncationTooSmall(
            f"potential stores |lam| < {2 * V.Lambda}, need up to {2 * Lambda - 1}")
    n = 2 * Lambda
    i = np.arange(1, n + 1)
    H = V.vhat(i[:, None] - i[None, :])
    H[np.diag_indices(n)] += 0.5 * (k - Lambda + i - 1) ** 2
    herm_defect = np.max(np.abs(H - H.conj().T))
    if herm_defect > 1e-14 * max(1.0, np.max(np.abs(H))):
        raise EigensolverFailure(f"assembled matrix not Hermitian ({herm_defect:g})")
    return H


def _anchor_phase(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude coefficient real positive."""
    j = int(np.argmax(np.abs(v)))
    phase = v[j] / abs(v[j]) if abs(v[j]) > 0 else 1.0
    return v / phase


@dataclass
class BandTable:
    """Energies and gauge-aligned eigenvector coefficients per (band, k-node).

    energies[m, l] = E_{m+1}(k_l); vectors[m, l, :] are the 2*Lambda Fourier
    coefficients of chi_{m+1}(., k_l) for lam in {-Lambda, ..., Lambda-1},
    normalized to unit coefficient norm.
    """

    grid: SimulationGrid
    M: int
    Lambda: int
    energies: np.ndarray  # (M, L)
    vectors: np.ndarray   # (M, L, 2*Lambda) complex
    potential: PeriodicPotential
    gauge_tag: str = "parallel-transport, anchor: largest coefficient real positive"

    @property
    def k_nodes(self) -> np.ndarray:
        return self.grid.k_nodes

    def check_band(self, m: int) -> None:
        if not 1 <= m <= self.M:
            raise BandIndexOutOfRange(f"band {m} not in 1..{self.M}")


def solve_bands(V: PeriodicPotential, grid: SimulationGrid, Lambda: int,
                M: int) -> BandTable:
    """Solve the truncated eigenproblem at every k-node and fix the gauge.

    The M lowest eigenpairs per node come from a dense Hermitian solve
    (LAPACK tridiagonalization path); eigenvectors are aligned along k by
    parallel transport, with the phase anchor applied at the first node.
    """
    if M > 2 * Lambda:
        raise BandCountExceedsTruncation(f"M = {M} > 2*Lambda = {2 * Lambda}")
    if 2 * Lambda <= grid.R:
        raise TruncationTooSmall(
            f"need Lambda > R/2 (Lambda={Lambda}, R={grid.R})")
    L = grid.L
    energies = np.empty((M, L))
    vectors = np.empty((M, L, 2 * Lambda), dtype=complex)
    for l, k in enumerate(grid.k_nodes):
        H = assemble_hk(V, k, Lambda)
        try:
            vals, vecs = scipy.linalg.eigh(H, subset_by_index=[0, M - 1])
        except scipy.linalg.LinAlgError as exc:
            raise EigensolverFailure(f"eigh failed at k = {k}: {exc}") from exc
        energies[:, l] = vals
        vectors[:, l, :] = (vecs / np.linalg.norm(vecs, axis=0)).T
    for m in range(M):
        vectors[m, 0] = _anchor_phase(vectors[m, 0])
        for l in range(1, L):
            overlap = np.vdot(vectors[m, l - 1], vectors[m, l])
            if abs(overlap) > 1e-12:
                vectors[m, l] *= np.conj(overlap) / abs(overlap)
            else:
                vectors[m, l] = _anchor_phase(vectors[m, l])
    return BandTable(grid=grid, M=M, Lambda=Lambda, energies=energies,
                     vectors=vectors, potential=V)


def fold_k(k) -> np.ndarray:
    """Fold quasi-momenta into [-1/2, 1/2) by periodicity of the dual lattice."""
    return np.mod(np.asarray(k, dtype=float) + 0.5, 1.0) - 0.5


def _trig_modes(L: int) -> np.ndarray:
    return np.fft.fftfreq(L, d=1.0 / L)  # integer mode numbers


def eval_band(table: BandTable, m: int, k) -> np.ndarray:
    """Band energy at arbitrary k via trigonometric interpolation of period 1.

    Collocates the stored values at the k-nodes; the Nyquist mode is
    symmetrized so the interpolant is real.
    """
    table.check_band(m)
    L = table.grid.L
    vals = table.energies[m - 1]
    coeff = np.fft.fft(vals) / L
    modes = _trig_modes(L)
    k = np.asarray(k, dtype=float)
    # phase relative to the first node k_1 = -1/2
    theta = 2.0 * np.pi * np.multiply.outer(k + 0.5, modes)
    basis = np.exp(1j * theta)
    if L % 2 == 0:
        basis[..., L // 2] = np.cos(theta[..., L // 2])
    return np.tensordot(basis, coeff, axes=1).real


def eval_band_deriv(table: BandTable, m: int, k) -> np.ndarray:
    """dE_m/dk of the trigonometric interpolant."""
    table.check_band(m)
    L = table.grid.L
    vals = table.energies[m - 1]
    coeff = np.fft.fft(vals) / L
    modes = _trig_modes(L)
    k = np.asarray(k, dtype=float)
    theta = 2.0 * np.pi * np.multiply.outer(k + 0.5, modes)
    dbasis = 2.0 * np.pi * modes * 1j * np.exp(1j * theta)
    if L % 2 == 0:
        dbasis[..., L // 2] = -2.0 * np.pi * modes[L // 2] * np.sin(theta[..., L // 2])
    return np.tensordot(dbasis, coeff, axes=1).real


def eval_band_second_deriv(table: BandTable, m: int, k) -> np.ndarray:
    """d2E_m/dk2 of the trigonometric interpolant."""
    table.check_band(m)
    L = table.grid.L
    vals = table.energies[m - 1]
    coeff = np.fft.fft(vals) / L
    modes = _trig_modes(L)
    k = np.asarray(k, dtype=float)
    theta = 2.0 * np.pi * np.multiply.outer(k + 0.5, modes)
    w = 2.0 * np.pi * modes
    d2basis = -(w ** 2) * np.exp(1j * theta)
    if L % 2 == 0:
        d2basis[..., L // 2] = -(w[L // 2] ** 2) * np.cos(theta[..., L // 2])
    return np.tensordot(d2basis, coeff, axes=1).real


def eval_chi(table: BandTable, m: int, k_index: int, y) -> np.ndarray:
    """chi_m(y, k_l) = sum_lam chi-hat(lam, k_l) exp(i*lam*y)."""
    table.check_band(m)
    if not 0 <= k_index < table.grid.L:
        raise BandIndexOutOfRange(f"k index {k_index} not in 0..{table.grid.L - 1}")
    lam = np.arange(-table.Lambda, table.Lambda)
    y = np.asarray(y, dtype=float)
    return np.tensordot(np.exp(1j * np.multiply.outer(y, lam)),
                        table.vectors[m - 1, k_index], axes=1)


def _neighbor_vector(table: BandTable, m: int, l: int) -> np.ndarray:
    """Eigenvector at node index l, periodically wrapped.

    Crossing the zone edge shifts the Fourier index by one:
    chi-hat(lam, k+1) = chi-hat(lam+1, k), so the wrapped vector is a
    one-slot shift of the stored one (the spilled coefficient is dropped).
    """
    L = table.grid.L
    v = table.vectors[m - 1, l % L]
    shift = l // L
    if shift == 0:
        return v
    out = np.zeros_like(v)
    # k -> k + 1 maps chi-hat(lam) -> chi-hat(lam + 1)
    if shift > 0:
        out[:-shift] = v[shift:]
    else:
        out[-shift:] = v[:shift]
    return out


def band_gap(table: BandTable, m: int, k_index: int) -> float:
    """Distance of E_m(k_l) to its nearest neighboring band."""
    E = table.energies[:, k_index]
    gaps = []
    if m >= 2:
        gaps.append(abs(E[m - 1] - E[m - 2]))
    if m < table.M:
        gaps.append(abs(E[m] - E[m - 1]))
    return min(gaps) if gaps else np.inf


def berry_connection(table: BandTable, m: int, k_index: int) -> complex:
    """<chi_m, d_k chi_m> by centered differences of gauge-aligned vectors.

    The inner product is taken in coefficient space, consistent with the
    unit coefficient norm of the stored eigenvectors; the result is purely
    imaginary up to the finite-difference error.
    """
    table.check_band(m)
    if band_gap(table, m, k_index) <= 1e-8:
        raise BandGapTooSmall(f"band {m} nearly degenerate at node {k_index}")
    L = table.grid.L
    dk = 1.0 / L
    v0 = table.vectors[m - 1, k_index]
    vp = _neighbor_vector(table, m, k_index + 1)
    vm = _neighbor_vector(table, m, k_index - 1)

    def aligned(v):
        ov = np.vdot(v0, v)
        return v * np.conj(ov) / abs(ov)

    beta = np.vdot(v0, (aligned(vp) - aligned(vm)) / (2.0 * dk))
    return complex(beta)


def effective_mass(table: BandTable, m: int, k0: float,
                   h: float | None = None) -> float:
    """1 / E_m''(k0) from a central second difference on the interpolant.

    The stencil width defaults to the k-grid spacing so that a node-centered
    stencil collocates exact table values (the interpolant's own curvature is
    unreliable for bands with a periodization kink, e.g. the free particle).
    """
    table.check_band(m)
    if h is None:
        h = 1.0 / table.grid.L
    e = eval_band(table, m, np.array([k0 - h, k0, k0 + h]))
    curv = (e[0] - 2.0 * e[1] + e[2]) / h ** 2
    if abs(curv) < 1e-10:
        raise DegenerateCurvature(f"|E''({k0})| = {abs(curv):g} < 1e-10")
    return 1.0 / curv


def save_band_cache(table: BandTable, path) -> None:
    """Binary cache: magic, u32 L/M/Lambda, f64 epsilon, u64 potential hash,
    u64 payload checksum, then energies (f64) and coefficients (f64 pairs)
    in (m, l, lam) order."""
    inter = np.empty(table.vectors.shape + (2,))
    inter[..., 0] = table.vectors.real
    inter[..., 1] = table.vectors.imag
    payload = table.energies.astype("<f8").tobytes() + inter.astype("<f8").tobytes()
    digest = int.from_bytes(
        hashlib.sha256(payload).digest()[:8], "little")
    header = _CACHE_MAGIC + struct.pack(
        "<IIIdQQ", table.grid.L, table.M, table.Lambda,
        table.grid.epsilon, table.potential.content_hash(), digest)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_band_cache(path, grid: SimulationGrid,
                    V: PeriodicPotential) -> BandTable:
    """Load a cache written by save_band_cache, verifying the potential hash
    and payload checksum."""
    with open(path, "rb") as fh:
        head = fh.read(4 + struct.calcsize("<IIIdQQ"))
        if head[:4] != _CACHE_MAGIC:
            raise IoFailure(f"{path}: bad band cache header")
        L, M, Lambda, epsilon, vhash, digest = struct.unpack("<IIIdQQ", head[4:])
        if L != grid.L or abs(epsilon - grid.epsilon) > 1e-15:
            raise IoFailure(f"{path}: cache grid (L={L}, eps={epsilon}) mismatch")
        if vhash != V.content_hash():
            raise IoFailure(f"{path}: potential hash mismatch")
        payload = fh.read()
        if int.from_bytes(hashlib.sha256(payload).digest()[:8],
                          "little") != digest:
            raise IoFailure(f"{path}: band cache payload checksum mismatch")
        energies = np.frombuffer(payload[:M * L * 8],
                                 dtype="<f8").reshape(M, L).copy()
        raw = np.frombuffer(payload[M * L * 8:],
                            dtype="<f8").reshape(M, L, 2 * Lambda, 2)
        vectors = raw[..., 0] + 1j * raw[..., 1]
    return BandTable(grid=grid, M=M, Lambda=Lambda, energies=energies,
                     vectors=vectors, potential=V)
