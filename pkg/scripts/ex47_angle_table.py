"""Computed slant angle of ex4_7 against arccos|sin(alpha - beta)| over a parameter grid."""

import argparse
import math

import numpy as np

from sublab.classify import Sampler, classify
from sublab.fixtures import get_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=6)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    fx = get_fixture("ex4_7")
    grid = np.linspace(0.1, 1.4, args.steps)
    print(f"{'alpha':>7} {'beta':>7} {'verdict':>17} {'theta':>18} {'|error|':>9}")
    worst = 0.0
    for a in grid:
        for b in grid:
            rep = classify(fx.map, None, {"alpha": a, "beta": b}, Sampler(n=args.n, seed=args.seed))
            want = math.acos(abs(math.sin(a - b)))
            err = abs(rep.theta - want)
            worst = max(worst, err)
            print(f"{a:7.3f} {b:7.3f} {rep.verdict:>17} {rep.theta:18.15f} {err:9.1e}")
    print(f"max |error| = {worst:.2e}")


if __name__ == "__main__":
    main()
