"""Evaluate the design-table regimes over the (s, c) grid and print one line per row.

    python scripts/table2.py --trials 100000 --out results/table2.json
"""
import argparse
import json
from pathlib import Path

from sybilshard.experiments import table2_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20190527)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/table2.json")
    args = ap.parse_args()

    rep = table2_report(args.trials, args.seed, args.workers)
    for row in rep["rows"]:
        pb = [c["p_bcp"] for c in row["cells"]]
        pg = [c["p_gft"] for c in row["cells"]]
        print(f"{row['label']:>12}  P_B in [{min(pb):.3g}, {max(pb):.3g}] want {row['P_B']:<7}"
              f" P_G in [{min(pg):.3g}, {max(pg):.3g}] want {row['P_G']} ({row['quantifier']})"
              f"  {'ok' if row['passed'] else 'MISS'}")
    print(f"max P_G at rho 0.45: {rep['low_power_gft_max']:.3g}")
    near = rep["closest_to_0_2"]
    print(f"P_B at rho 0.25 closest to 0.2: s={near['s']} c={near['c']} P_B={near['p_bcp']:.3f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(rep, indent=2) + "\n")


if __name__ == "__main__":
    main()
