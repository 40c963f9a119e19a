"""Run the headline spatial and temporal convergence studies and emit reports.

Usage: python scripts/convergence_study.py [--out out/convergence]
"""

import argparse

from blochstep import harness


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args()

    spatial = harness.ExperimentConfig(
        scenario="spatial", epsilon=1 / 32, R=32, M=8, Lambda=40,
        dt=0.01, T=0.1, schemes=("bd",), external="none",
        out_dir=args.out)
    temporal = harness.ExperimentConfig(
        scenario="temporal", epsilon=1 / 32, R=32, M=8, Lambda=40,
        dt_list=(1 / 20, 1 / 40, 1 / 80, 1 / 160, 1 / 320), T=1.0,
        schemes=("bd", "ts"), external="harmonic", out_dir=args.out)

    files = []
    for config in (spatial, temporal):
        for report in harness.run_convergence_study(config):
            for fmt in ("csv", "markdown-table", "svg-lineplot"):
                files.append(harness.emit_report(report, fmt, args.out))
            print(f"{config.scenario}/{report.scheme}:",
                  " ".join(f"{e:.3e}" for e in report.l2),
                  "| orders", " ".join(f"{o:.2f}" for o in report.orders))
    harness.write_manifest(args.out, temporal, files)
    print(f"reports written under {args.out}")


if __name__ == "__main__":
    main()
