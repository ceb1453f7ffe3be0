"""Two-car falsification with simulated annealing, checked against a grid oracle.

The grid oracle sweeps both control points of the agent's acceleration input
and both mode levels. SA is then run over 20 seeds at budget 100. Pass
``--gains`` to try a different ego controller, e.g. the sluggish
``'{"kp": 0.02, "kd": 0.05, "headway": 0.5}'`` where collisions are reachable.
"""

import argparse
import json
import time

import numpy as np

from stlf.campaign import Campaign
from stlf.optimize import SAConfig, falsify_sa, uniform_random_search


def campaign(gains: dict) -> Campaign:
    return Campaign.from_json(
        {
            "scenario": {
                "kind": "two_car",
                "T": 10,
                "x0": {"z_ego": 0, "v_ego": 20, "z_agent": 40, "v_agent": 20},
                "gains": gains,
            },
            "requirement": {"formula": "[](z_agent - z_ego > 0)"},
            "search": {
                "inputs": [{"channel": "xi", "points": 2, "lo": -1, "hi": 1}],
                "discrete": [{"name": "mu", "levels": [1, 2]}],
            },
            "method": {"name": "sa", "budget": 100},
        }
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gains", default="{}", help="JSON overrides for the ACC gains")
    ap.add_argument("--grid", type=int, default=21)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--budget", type=int, default=100)
    args = ap.parse_args()

    c = campaign(json.loads(args.gains))
    obj = c.objective()
    axis = np.linspace(-1, 1, args.grid)
    t0 = time.perf_counter()
    cells = np.array([obj({"xi[0]": a, "xi[1]": b, "mu": m}) for a in axis for b in axis for m in (1, 2)])
    print(f"grid oracle: {(cells < 0).sum()}/{cells.size} falsifying cells, min robustness {cells.min():.4f}")

    sa = [falsify_sa(c.space, obj, SAConfig(budget=args.budget, seed=s)) for s in range(args.seeds)]
    rnd = [uniform_random_search(c.space, obj, args.budget, seed=s) for s in range(args.seeds)]
    print(f"SA falsified {sum(r.falsified for r in sa)}/{args.seeds}")
    print(f"uniform random falsified {sum(r.falsified for r in rnd)}/{args.seeds}")
    best = min((r.best for r in sa), key=lambda e: e.robustness)
    print(f"best SA point {best.point} robustness {best.robustness:.4f}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
