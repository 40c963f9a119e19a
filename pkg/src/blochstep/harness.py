"""Experiment orchestration: convergence studies, scheme comparisons,
deterministic report emission (CSV / markdown / SVG), config parsing,
and a fast self-test of the library invariants."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .bands import solve_bands
from .errors import IoFailure, ReferenceTooCoarse, ShapeMismatch
from .grid import (
    WaveField,
    build_grid,
    discrete_norms,
    field_difference,
    sample_gaussian,
)
from .potential import external_from_spec, lattice_from_spec
from .steppers import StepperConfig, evolve


@dataclass
class ExperimentConfig:
    """Settings for one convergence study or comparison run."""

    scenario: str = "spatial"        # "spatial" | "temporal"
    epsilon: float = 1.0 / 32
    R: int = 32                      # finest per-cell resolution (spatial study
    #                                  sweeps up to R; temporal study holds R)
    M: int = 8
    Lambda: int = 32
    lattice: str = "mathieu"
    external: str = "none"
    schemes: tuple = ("bd",)
    dt_list: tuple = ()              # strictly decreasing for temporal studies
    dt: float = 0.01                 # step for spatial studies
    T: float = 0.1
    reference_spatial_factor: int = 2
    reference_temporal_factor: int = 10
    out_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in ("spatial", "temporal"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.dt_list and not all(
                a > b for a, b in zip(self.dt_list, self.dt_list[1:])):
            raise ValueError("dt list must be strictly decreasing")


@dataclass
class ErrorReport:
    """Errors per refinement level plus observed orders between levels."""

    scheme: str
    label: str                       # refined quantity ("dx/eps" or "dt")
    levels: list                     # refinement parameter per row
    l2: list
    linf: list
    orders: list                     # len(levels) - 1 entries, log2 ratios
    wall_clock: list                 # seconds per run
    mass_drift: list                 # |mass(T) - mass(0)| per run


def compare_solutions(a: WaveField, b: WaveField) -> tuple[float, float]:
    """(l2, linf) norms of a - b on a common grid."""
    return discrete_norms(field_difference(a, b))


def observed_orders(errors) -> list:
    """log2(e_i / e_{i+1}) between adjacent refinement levels."""
    out = []
    for e0, e1 in zip(errors, errors[1:]):
        if e0 > 0 and e1 > 0:
            out.append(float(np.log2(e0 / e1)))
        else:
            out.append(float("nan"))
    return out


def _restrict(psi: WaveField, grid) -> WaveField:
    """Pointwise restriction from a finer nested grid (same L, larger R)."""
    step = psi.grid.R // grid.R
    if step * grid.R != psi.grid.R or psi.grid.L != grid.L:
        raise ShapeMismatch("reference grid is not a nested refinement")
    return WaveField(grid, psi.values[:, ::step])


def _run_once(config: ExperimentConfig, scheme: str, R: int, dt: float,
              lattice, U):
    grid = build_grid(config.epsilon, R)
    Lambda = max(config.Lambda, R // 2 + 1, config.M)
    psi0 = sample_gaussian(grid)
    N = max(1, int(round(config.T / dt)))
    tic = time.perf_counter()
    if scheme == "bd":
        tab = solve_bands(lattice, grid, Lambda, config.M)
        cfg = StepperConfig("bd", "strang", config.T / N, bands=tab, external=U)
    else:
        cfg = StepperConfig("ts", "strang", config.T / N, lattice=lattice,
                            external=U)
    out = evolve(psi0, cfg, config.T, N)
    wall = time.perf_counter() - tic
    drift = float(abs(out.mass_history[-1] - out.mass_history[0]))
    return out.final, wall, drift


def _reference_solution(config: ExperimentConfig, R_finest: int, dt_finest,
                        lattice, U) -> WaveField:
    """BD reference at boosted spatial and temporal resolution."""
    R_ref = config.reference_spatial_factor * R_finest
    if R_ref <= R_finest:
        raise ReferenceTooCoarse(
            f"reference R = {R_ref} <= finest test R = {R_finest}")
    dt_ref = dt_finest / config.reference_temporal_factor
    ref, _, _ = _run_once(config, "bd", R_ref, dt_ref, lattice, U)
    return ref


def run_convergence_study(config: ExperimentConfig) -> list[ErrorReport]:
    """One ErrorReport per scheme; levels follow the configured scenario."""
    n_fourier = max(config.Lambda,
                    config.reference_spatial_factor * config.R)
    lattice = lattice_from_spec(config.lattice, n_fourier)
    U = external_from_spec(config.external)
    reports = []
    if config.scenario == "spatial":
        Rs = []
        R = 4
        while R <= config.R:
            Rs.append(R)
            R *= 2
        ref = _reference_solution(config, Rs[-1], config.dt, lattice, U)
        for scheme in config.schemes:
            rows = []
            for R in Rs:
                psi, wall, drift = _run_once(config, scheme, R, config.dt,
                                             lattice, U)
                target = _restrict(ref, psi.grid)
                l2, linf = compare_solutions(psi, target)
                rows.append((1.0 / R, l2, linf, wall, drift))
            reports.append(ErrorReport(
                scheme=scheme, label="dx/eps",
                levels=[r[0] for r in rows], l2=[r[1] for r in rows],
                linf=[r[2] for r in rows],
                orders=observed_orders([r[1] for r in rows]),
                wall_clock=[r[3] for r in rows],
                mass_drift=[r[4] for r in rows]))
    else:
        dts = list(config.dt_list) or [config.dt]
        ref = _reference_solution(config, config.R, dts[-1], lattice, U)
        target = None
        for scheme in config.schemes:
            rows = []
            for dt in dts:
                psi, wall, drift = _run_once(config, scheme, config.R, dt,
                                             lattice, U)
                if target is None or target.grid is not psi.grid:
                    target = _restrict(ref, psi.grid)
                l2, linf = compare_solutions(psi, target)
                rows.append((dt, l2, linf, wall, drift))
            reports.append(ErrorReport(
                scheme=scheme, label="dt",
                levels=[r[0] for r in rows], l2=[r[1] for r in rows],
                linf=[r[2] for r in rows],
                orders=observed_orders([r[1] for r in rows]),
                wall_clock=[r[3] for r in rows],
                mass_drift=[r[4] for r in rows]))
    return reports


def _fmt(x) -> str:
    if isinstance(x, float):
        if x != x:  # nan
            return ""
        return f"{x:.6g}"
    return str(x)


def emit_report(report: ErrorReport, fmt: str, out_dir) -> Path:
    """Write one report file; byte-deterministic for identical input."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.scheme}_{report.label.replace('/', '_')}"
    try:
        if fmt == "csv":
            path = out_dir / f"{stem}.csv"
            lines = [f"{report.label},l2,linf,order,wall_clock,mass_drift"]
            for i, lev in enumerate(report.levels):
                order = report.orders[i - 1] if i >= 1 else float("nan")
                lines.append(",".join([
                    _fmt(lev), _fmt(report.l2[i]), _fmt(report.linf[i]),
                    _fmt(order), _fmt(report.wall_clock[i]),
                    _fmt(report.mass_drift[i])]))
            path.write_text("\n".join(lines) + "\n")
        elif fmt == "markdown-table":
            path = out_dir / f"{stem}.md"
            head = f"| {report.label} | l2 | linf | order |"
            sep = "|---|---|---|---|"
            lines = [head, sep]
            for i, lev in enumerate(report.levels):
                order = report.orders[i - 1] if i >= 1 else float("nan")
                lines.append(f"| {_fmt(lev)} | {_fmt(report.l2[i])} | "
                             f"{_fmt(report.linf[i])} | {_fmt(order)} |")
            path.write_text("\n".join(lines) + "\n")
        elif fmt == "svg-lineplot":
            path = out_dir / f"{stem}.svg"
            path.write_text(_svg_loglog(report))
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def _svg_loglog(report: ErrorReport) -> str:
    """Minimal log-log error plot, 400x300, no external dependencies."""
    W, H, pad = 400, 300, 40
    xs = np.log10(np.asarray(report.levels, dtype=float))
    ys = np.log10(np.maximum(np.asarray(report.l2, dtype=float), 1e-300))
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    xspan = (x1 - x0) or 1.0
    yspan = (y1 - y0) or 1.0

    def px(x):
        return pad + (x - x0) / xspan * (W - 2 * pad)

    def py(y):
        return H - pad - (y - y0) / yspan * (H - 2 * pad)

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">\n'
        f'<rect width="{W}" height="{H}" fill="white"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="black"/>\n'
        + "".join(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                  f'fill="black"/>\n' for x, y in zip(xs, ys))
        + f'<text x="{W // 2}" y="{H - 8}" text-anchor="middle" '
        f'font-size="12">log10 {report.label}</text>\n'
        f'<text x="12" y="{H // 2}" font-size="12" '
        f'transform="rotate(-90 12 {H // 2})" '
        f'text-anchor="middle">log10 l2 error</text>\n'
        "</svg>\n"
    )


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_manifest(out_dir, config: ExperimentConfig, files) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": config_hash(config),
        "config": asdict(config),
        "files": sorted(str(Path(f).name) for f in files),
    }
    path = out_dir / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                   default=str) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


_CONFIG_CASTS = {
    "epsilon": float, "R": int, "M": int, "Lambda": int, "dt": float,
    "T": float, "seed": int, "reference_spatial_factor": int,
    "reference_temporal_factor": int,
    "schemes": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
    "dt_list": lambda s: tuple(float(x) for x in s.split(",") if x.strip()),
}


def parse_config_file(path) -> ExperimentConfig:
    """Flat key=value text; '#' starts a comment; keys mirror ExperimentConfig."""
    kwargs = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ExperimentConfig.__dataclass_fields__:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        kwargs[key] = _CONFIG_CASTS.get(key, str)(value)
    return ExperimentConfig(**kwargs)


def selftest(verbose: bool = True) -> bool:
    """Small-size invariant sweep across the library; returns overall pass."""
    from . import transform
    from .bands import berry_connection, eval_band, fold_k
    from .potential import from_samples, mathieu
    from .steppers import bd_step
    from .transform import (
        BlochCoeffs,
        band_project,
        band_reconstruct,
        cell_forward,
        cell_inverse,
    )

    rng = np.random.default_rng(0)
    checks = []

    def check(module, name, fn):
        tic = time.perf_counter()
        try:
            fn()
            ok, msg = True, ""
        except Exception as exc:  # noqa: BLE001 - report, do not crash
            ok, msg = False, f"{type(exc).__name__}: {exc}"
        checks.append((module, name, ok, msg, time.perf_counter() - tic))

    def grid_roundtrip():
        grid = build_grid(1.0 / 8, 16)
        psi = WaveField(grid, rng.standard_normal((8, 16))
                        + 1j * rng.standard_normal((8, 16)))
        back = cell_inverse(cell_forward(psi))
        assert np.max(np.abs(back.values - psi.values)) < 1e-12

    def projection_identity():
        grid = build_grid(1.0 / 8, 16)
        tab = solve_bands(mathieu(16), grid, 16, 4)
        C = BlochCoeffs(tab, rng.standard_normal((4, 8))
                        + 1j * rng.standard_normal((4, 8)))
        C2 = band_project(band_reconstruct(C), tab)
        assert np.max(np.abs(C2.values - C.values)) < 1e-10

    def gauge_invariance():
        grid = build_grid(1.0 / 8, 16)
        tab = solve_bands(mathieu(16), grid, 16, 4)
        psi = sample_gaussian(grid)
        cfg = StepperConfig("bd", "strang", 0.01, bands=tab)
        ref = bd_step(psi, cfg)
        phases = np.exp(2j * np.pi * rng.random((4, 8)))
        twisted = type(tab)(grid=tab.grid, M=tab.M, Lambda=tab.Lambda,
                            energies=tab.energies,
                            vectors=tab.vectors * phases[:, :, None],
                            potential=tab.potential, gauge_tag="random")
        cfg2 = StepperConfig("bd", "strang", 0.01, bands=twisted)
        out = bd_step(psi, cfg2)
        assert np.max(np.abs(out.values - ref.values)) < 1e-12

    def cache_integrity():
        import tempfile

        from .bands import load_band_cache, save_band_cache
        grid = build_grid(1.0 / 4, 8)
        tab = solve_bands(mathieu(8), grid, 8, 3)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bands.bin"
            save_band_cache(tab, path)
            data = bytearray(path.read_bytes())
            data[len(data) // 2] ^= 0xFF
            path.write_bytes(bytes(data))
            try:
                load_band_cache(path, grid, tab.potential)
            except Exception:
                return
            raise AssertionError("corrupted cache not detected")

    def band_symmetry():
        grid = build_grid(1.0 / 8, 16)
        tab = solve_bands(mathieu(16), grid, 16, 4)
        for m in range(1, 5):
            e = eval_band(tab, m, np.array([0.21, -0.21]))
            assert abs(e[0] - e[1]) < 1e-9

    check("grid", "cell transform round trip", grid_roundtrip)
    check("blochxform", "projection idempotency", projection_identity)
    check("steppers", "gauge invariance of BD step", gauge_invariance)
    check("band", "cache corruption detected", cache_integrity)
    check("band", "E(-k) = E(k) for a real potential", band_symmetry)

    ok = all(c[2] for c in checks)
    if verbose:
        for module, name, passed, msg, secs in checks:
            status = "PASS" if passed else "FAIL"
            extra = f"  ({msg})" if msg else ""
            print(f"[{status}] {module}: {name} [{secs:.2f}s]{extra}")
        print("selftest:", "all invariants hold" if ok
              else "first failure shown above", f"(seed=0)")
    return ok
