"""Run the named hash-fraction sweeps and check analytic-vs-simulated alignment.

    python scripts/run_figures.py --figs 2a 2b 2c --step 0.05 --out results/
"""
import argparse
import json
import time
from pathlib import Path

from sybilshard import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--figs", nargs="+", default=["2a", "2b", "2c"], choices=sorted(ex.FIGURES))
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--rho-max", type=float, default=0.9)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20190527)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--slack", type=float, default=0.02)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    summary = {}
    for fig in args.figs:
        t0 = time.perf_counter()
        spec = ex.figure_spec(fig, rhos=ex.rho_grid(args.rho_max, args.step), trials=args.trials,
                              seed=args.seed, workers=args.workers)
        result = ex.run_sweep(spec)
        ex.write_csv(result.rows, out / f"{spec.name}.csv")
        rep = ex.validate_alignment(result.rows, args.slack)
        summary[fig] = {"rows": len(result.rows), "skipped": len(result.skipped), "max_gap": rep.max_gap,
                        "passed": rep.passed, "seconds": round(time.perf_counter() - t0, 1)}
        print(fig, json.dumps(summary[fig]), flush=True)
    (out / "figures_summary.json").write_text(json.dumps(summary, indent=2) + "\n")


if __name__ == "__main__":
    main()
