"""Robustness landscape of the two-car scenario over the two agent control points.

Writes a CSV matrix (rows follow the second control point) and prints a coarse
text rendering. The mode level is fixed by ``--mu``.
"""

import argparse
import json

import numpy as np

from falsify_two_car import campaign
from stlf.optimize import robustness_heatmap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gains", default="{}")
    ap.add_argument("--grid", type=int, default=20)
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--out", default="two_car_heatmap.csv")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    c = campaign(json.loads(args.gains))
    hm = robustness_heatmap(c.space, c.objective(), (args.grid, args.grid), {"mu": args.mu}, jobs=args.jobs)
    np.savetxt(args.out, hm.values, delimiter=",", fmt="%.10g")
    print(f"x = {hm.x_name}, y = {hm.y_name}; min {np.nanmin(hm.values):.3f}, max {np.nanmax(hm.values):.3f}")
    print(f"counterexample cells: {int(hm.counterexamples.sum())}/{hm.values.size}")
    for row in hm.values[::-1]:
        print("".join("#" if v < 0 else ("+" if v < 5 else ".") for v in row))


if __name__ == "__main__":
    main()
