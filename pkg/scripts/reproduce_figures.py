"""Run the three reference sampling grids and write their CSVs.

Usage:
    python scripts/reproduce_figures.py [--samples N] [--workers W] [--out DIR]

Each grid comes from configs/*.cfg; pass --samples to override the
100000-sample default for a quick look.  The Poisson grid is run once per
observable (X1 + X2, X1*X2, X1^3).
"""

import argparse
import pathlib
import sys
import time

from ncck.sampling import FigureConfig, reports_to_csv, run_figure

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--grids", nargs="*",
                        default=["figure1", "figure2", "poisson"])
    args = parser.parse_args(argv)

    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    for name in args.grids:
        config = FigureConfig.parse((ROOT / "configs" / f"{name}.cfg").read_text())
        if name == "poisson":
            for observable, tag in [("X1 + X2", "sum"), ("X1*X2", "product"),
                                    ("X1^3", "cube")]:
                variant = FigureConfig(**{**config.__dict__,
                                          "observable": observable})
                jobs.append((f"{name}_{tag}", variant))
        else:
            jobs.append((name, config))

    for name, config in jobs:
        if args.samples:
            config.samples = args.samples
        config.workers = args.workers
        started = time.time()
        reports = run_figure(config)
        path = out_dir / f"{name}.csv"
        path.write_text(reports_to_csv(reports))
        print(f"{name}: {len(reports)} grid points -> {path} "
              f"({time.time() - started:.1f}s)")


if __name__ == "__main__":
    sys.exit(main())
