"""Gap against data size, with log-log slopes.

With a geometric initial distribution some start states are rare, so
BC's gap falls like 1/N over a wide range.  With a uniform one it falls
geometrically once every state has been seen.

    python3 demos/rate_sweep.py [--trials 200]
"""

import argparse

from suppil.harness import estimate_gap, rate_fit
from suppil.instances import standard_imitation

parser = argparse.ArgumentParser()
parser.add_argument("--trials", type=int, default=200)
args = parser.parse_args()

sizes = (25, 50, 100, 200, 400)
for initial in ("geometric", "uniform"):
    mdp, expert, behavior = standard_imitation(20, initial=initial)
    gaps = [estimate_gap(mdp, expert, behavior, "BC", 1.0, n, args.trials, seed=0).mean_gap
            for n in sizes]
    print(f"\n{initial} initial distribution")
    for n, g in zip(sizes, gaps):
        print(f"  N = {n:4d}  gap {g:.3e}")
    fit = rate_fit([(n, max(g, 1e-6)) for n, g in zip(sizes, gaps)])
    print(f"  slope {fit.slope:.3f} (r^2 {fit.r_squared:.3f})")
