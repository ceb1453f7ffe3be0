"""Covering array plus SA versus uniform random search on the needle benchmark."""

import argparse

from stlf.benchmarks import Needle
from stlf.covering import generate_ca
from stlf.optimize import ca_then_falsify, uniform_random_search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=int, default=100)
    ap.add_argument("--per-seed", type=int, default=50)
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()

    needle = Needle()
    ca = generate_ca(needle.ca_spec(), seed=0)
    extra = args.budget - len(ca)
    print(f"covering array: {len(ca)} rows, {extra} evaluations left for SA")
    print(f"analytic P(random hit within budget) = {needle.random_success_probability(args.budget):.3f}")
    pipe = [ca_then_falsify(ca, needle.space(), needle, args.per_seed, extra, seed=s) for s in range(args.seeds)]
    rnd = [uniform_random_search(needle.space(), needle, args.budget, seed=s) for s in range(args.seeds)]
    print(f"CA+SA falsified {sum(r.falsified for r in pipe)}/{args.seeds}")
    print(f"random falsified {sum(r.falsified for r in rnd)}/{args.seeds}")
    first = [next(k for k, e in enumerate(r.evaluations, 1) if e.robustness < 0) for r in pipe if r.falsified]
    if first:
        print(f"CA+SA evaluations to first counterexample: median {sorted(first)[len(first) // 2]}")


if __name__ == "__main__":
    main()
