"""End-to-end demo: synthesize a longitudinal dataset and run the full
analysis pipeline (isotropy report, size-model fit, alignment experiment,
verification, small-gallery identification, plots) into ./experiments_out.

Usage: python scripts/run_experiments.py [--seed N] [--out DIR]
"""
import argparse
import pathlib
import sys

from fingergrowth.cli import main as cli


def run(argv):
    print("+ fingergrowth " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="experiments_out")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = str(out / "dataset.json")

    run(["synth", "--seed", str(args.seed), "--out", d])
    run(["isotropy", "--dataset", d, "--out", str(out / "isotropy.csv")])
    run(["fit-growth", "--dataset", d, "--out", str(out / "fit.csv")])
    run(["align", "--dataset", d, "--out", str(out / "align.csv")])
    for mode in ("unscaled", "rescaled", "multi-factor"):
        run(["verify", "--dataset", d, "--mode", mode,
             "--out", str(out / f"verify_{mode}.csv")])
    for mode in ("unscaled", "rescaled"):
        run(["identify", "--dataset", d, "--mode", mode, "--gallery-size", "1000",
             "--seed", str(args.seed), "--out", str(out / f"identify_{mode}.csv")])
    run(["plot", "--csv", str(out / "align.csv"), "--kind", "scatter",
         "--out", str(out / "align_scatter.svg")])
    run(["plot", "--csv", str(out / "fit_residuals.csv"), "--kind", "scatter",
         "--out", str(out / "residuals_scatter.svg")])
    print(f"\nall outputs in {out}/")


if __name__ == "__main__":
    main()
