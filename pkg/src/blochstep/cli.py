"""Command-line entry point: band tables, time evolution, scheme comparison,
asymptotic (WKB) runs, convergence studies, and the library self-test."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .bands import save_band_cache, solve_bands
from .grid import (
    WaveField,
    build_grid,
    discrete_norms,
    field_difference,
    sample_gaussian,
    save_wavefield_binary,
    save_wavefield_csv,
)
from .potential import external_from_spec, lattice_from_spec
from .steppers import StepperConfig, evolve
from .wkb import wkb_compare, wkb_pipeline


def _apply_thread_cap() -> None:
    """Honor BLOCHDEC_THREADS by capping BLAS/FFT worker pools."""
    cap = os.environ.get("BLOCHDEC_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        print(f"warning: ignoring non-integer BLOCHDEC_THREADS={cap!r}",
              file=sys.stderr)
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _add_problem_flags(p: argparse.ArgumentParser, external_default="none"):
    p.add_argument("--eps", type=float, default=1 / 32,
                   help="semiclassical parameter (1/eps must be an integer)")
    p.add_argument("--R", type=int, default=32, help="grid points per cell")
    p.add_argument("--M", type=int, default=8, help="number of bands")
    p.add_argument("--Lambda", type=int, default=32,
                   help="Fourier truncation of the cell eigenproblem")
    p.add_argument("--lattice", default="mathieu",
                   help="mathieu | kronig_penney | file:<path>")
    p.add_argument("--external", default=external_default,
                   help="none | harmonic | step | linear:<E>")


def _write_manifest(out_dir: Path, args: argparse.Namespace, files) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    import hashlib
    blob = json.dumps(cfg, sort_keys=True, default=str)
    manifest = {
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "config": cfg,
        "files": sorted(str(Path(f).name) for f in files),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _band_setup(args):
    grid = build_grid(args.eps, args.R)
    Lambda = max(args.Lambda, args.R // 2 + 1, args.M)
    lattice = lattice_from_spec(args.lattice, max(2 * Lambda, 64))
    table = solve_bands(lattice, grid, Lambda, args.M)
    return grid, lattice, table


def cmd_bands(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, _, table = _band_setup(args)
    cache = out / "bands.bin"
    save_band_cache(table, cache)
    csv_path = out / "bands.csv"
    with open(csv_path, "w") as fh:
        fh.write("k," + ",".join(f"E_{m}" for m in range(1, args.M + 1)) + "\n")
        order = np.argsort(grid.k_nodes)
        for l in order:
            row = [f"{grid.k_nodes[l]:.6g}"] + [
                f"{table.energies[m, l]:.6g}" for m in range(args.M)]
            fh.write(",".join(row) + "\n")
    _write_manifest(out, args, [cache, csv_path])
    print(f"wrote {cache} and {csv_path}")
    return 0


def cmd_evolve(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, lattice, table = _band_setup(args)
    U = external_from_spec(args.external)
    psi0 = sample_gaussian(grid)
    if args.scheme == "bd":
        cfg = StepperConfig("bd", args.order, args.T / args.steps,
                            bands=table, external=U)
    else:
        cfg = StepperConfig("ts", args.order, args.T / args.steps,
                            lattice=lattice, external=U)
    traj = evolve(psi0, cfg, args.T, args.steps,
                  snapshot_every=args.snapshot_every,
                  track_band_masses=args.scheme == "bd")
    files = []
    for t, snap in zip(traj.times, traj.snapshots or [traj.final]):
        stem = f"psi_t{t:.6g}".replace(".", "p")
        save_wavefield_csv(snap, out / f"{stem}.csv")
        save_wavefield_binary(snap, out / f"{stem}.bin")
        files += [out / f"{stem}.csv", out / f"{stem}.bin"]
    drift = abs(traj.mass_history[-1] - traj.mass_history[0])
    print(f"final mass {traj.mass_history[-1]:.9f} (drift {drift:.3e})")
    if traj.band_mass_history is not None:
        masses = traj.band_mass_history[-1]
        print("band masses:",
              " ".join(f"{v:.5f}" for v in masses))
    _write_manifest(out, args, files)
    return 0


def cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, lattice, table = _band_setup(args)
    U = external_from_spec(args.external)
    psi0 = sample_gaussian(grid)
    bd_cfg = StepperConfig("bd", "strang", args.T / args.bd_steps,
                           bands=table, external=U)
    ts_cfg = StepperConfig("ts", "strang", args.T / args.ts_steps,
                           lattice=lattice, external=U)
    bd = evolve(psi0, bd_cfg, args.T, args.bd_steps).final
    ts = evolve(psi0, ts_cfg, args.T, args.ts_steps).final
    ref_steps = 10 * max(args.bd_steps, args.ts_steps)
    ref = evolve(psi0, StepperConfig("bd", "strang", args.T / ref_steps,
                                     bands=table, external=U),
                 args.T, ref_steps).final
    rows = [("bd", *harness.compare_solutions(bd, ref)),
            ("ts", *harness.compare_solutions(ts, ref))]
    path = out / "compare.csv"
    with open(path, "w") as fh:
        fh.write("scheme,l2,linf\n")
        for scheme, l2, linf in rows:
            fh.write(f"{scheme},{l2:.6g},{linf:.6g}\n")
            print(f"{scheme}: l2 = {l2:.6g}, linf = {linf:.6g}")
    _write_manifest(out, args, [path])
    return 0


_F0 = {"gaussian": lambda x: np.exp(-5.0 * (x - np.pi) ** 2)}
_PHI0 = {"zero": lambda x: 0.0 * x, "neg-cos": lambda x: -np.cos(x)}


def cmd_wkb(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, _, table = _band_setup(args)
    U = external_from_spec(args.external)
    f = _F0[args.f0]
    phi0 = _PHI0[args.phi0]
    files = []
    if args.compare:
        cmp = wkb_compare(table, args.band, U, f, phi0, grid,
                          args.t_end, args.nx, args.steps)
        path = out / "wkb_compare.csv"
        with open(path, "w") as fh:
            fh.write("t,l2,linf,band_l2\n")
            for t, a, b, c in zip(cmp.times, cmp.l2, cmp.linf, cmp.band_l2):
                fh.write(f"{t:.6g},{a:.6g},{b:.6g},{c:.6g}\n")
        files.append(path)
        print(f"sup l2 = {cmp.sup_l2:.6g}, sup linf = {cmp.sup_linf:.6g}, "
              f"sup in-band l2 = {cmp.sup_band_l2:.6g}")
        rep = cmp.caustic
    else:
        traj, amp, rep = wkb_pipeline(table, args.band, U, f, phi0,
                                      args.t_end, args.nx)
        path = out / "wkb_phase.csv"
        with open(path, "w") as fh:
            fh.write("x,phi,p,a_re,a_im\n")
            for x, phi, p, a in zip(traj.x, traj.phi[-1], traj.p[-1],
                                    amp.a[-1]):
                fh.write(f"{x:.6g},{phi:.6g},{p:.6g},"
                         f"{a.real:.6g},{a.imag:.6g}\n")
        files.append(path)
        print(f"phase/amplitude advanced to t = {traj.times[-1]:.6g}")
    if rep.detected:
        print(f"caustic trigger at t ~= {rep.t_c:.4f} (x ~= {rep.x_c:.4f})")
    _write_manifest(out, args, files)
    return 0


def cmd_convergence(args) -> int:
    if args.config:
        config = harness.parse_config_file(args.config)
        if args.out:
            config.out_dir = args.out
    else:
        config = harness.ExperimentConfig(
            scenario=args.scenario, epsilon=args.eps, R=args.R, M=args.M,
            Lambda=args.Lambda, lattice=args.lattice, external=args.external,
            schemes=tuple(args.schemes.split(",")), dt=args.dt,
            dt_list=tuple(float(s) for s in args.dt_list.split(","))
            if args.dt_list else (),
            T=args.T, out_dir=args.out or "out")
    out = Path(config.out_dir)
    reports = harness.run_convergence_study(config)
    files = []
    for report in reports:
        for fmt in ("csv", "markdown-table", "svg-lineplot"):
            files.append(harness.emit_report(report, fmt, out))
        print(f"{report.scheme}: l2 errors",
              " ".join(f"{e:.3e}" for e in report.l2),
              "orders", " ".join(f"{o:.2f}" for o in report.orders))
    harness.write_manifest(out, config, files)
    return 0


def cmd_selftest(args) -> int:
    return 0 if harness.selftest() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blochstep",
        description="Bloch-decomposition solvers for the semiclassical "
                    "Schrodinger equation with a periodic lattice")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", help="solve and cache a band table")
    _add_problem_flags(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("evolve", help="time-evolve a Gaussian wave packet")
    p.add_argument("--scheme", choices=("bd", "ts"), default="bd")
    p.add_argument("--order", choices=("lie", "strang"), default="strang")
    _add_problem_flags(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("compare", help="BD vs TS errors against a fine reference")
    _add_problem_flags(p, external_default="harmonic")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--bd-steps", type=int, default=100)
    p.add_argument("--ts-steps", type=int, default=1000)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("wkb", help="asymptotic phase/amplitude evolution")
    p.add_argument("--band", type=int, default=1)
    p.add_argument("--phi0", choices=tuple(_PHI0), default="zero")
    p.add_argument("--f0", choices=tuple(_F0), default="gaussian")
    _add_problem_flags(p, external_default="harmonic")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--steps", type=int, default=1000,
                   help="BD steps when --compare is set")
    p.add_argument("--compare", action="store_true",
                   help="run the full solver alongside and emit differences")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_wkb)

    p = sub.add_parser("convergence", help="spatial or temporal error study")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--scenario", choices=("spatial", "temporal"),
                   default="spatial")
    _add_problem_flags(p)
    p.add_argument("--schemes", default="bd")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--dt-list", default="",
                   help="comma-separated decreasing steps (temporal)")
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("selftest", help="fast invariant sweep of all modules")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
