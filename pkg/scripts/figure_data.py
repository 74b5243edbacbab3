"""Curves behind the robustness and power figures: IF2 and PIF over y, contiguous power over
Delta, and simulated power at a fixed alternative as the contamination moves away."""

import argparse

import numpy as np

from sdtest.models import NormalKnownVarModel
from sdtest.robustness import if2_test, pif
from sdtest.simulation import Alternative, SimulationConfig, Table, empirical_power
from sdtest.testing import contiguous_power

BETAS = (0.0, 0.1, 0.3, 0.5, 0.7, 1.0)


def influence_curves(y_max=10.0, points=401):
    m = NormalKnownVarModel(1.0)
    y = np.linspace(-y_max, y_max, points)
    rows = []
    for b in BETAS:
        v2 = if2_test(y, m, [0.0], b, b)
        vp = pif(y, m, [0.0], [1.0], b, b, 0.05)
        rows += [[b, yi, a, p] for yi, a, p in zip(y, v2, vp)]
    return Table("influence_curves", ("beta", "y", "if2", "pif"), rows, {"theta0": 0.0, "Delta": 1.0, "alpha": 0.05})


def power_curves(deltas=np.linspace(0.0, 5.0, 51)):
    m = NormalKnownVarModel(1.0)
    rows = [[b, d, contiguous_power(m, 0.0, d, b, b, 0.05)] for b in BETAS for d in deltas]
    return Table("contiguous_power_curves", ("beta", "Delta", "power"), rows, {"alpha": 0.05})


def contaminated_power_curves(reps, seed, workers, locations=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0)):
    rows = []
    for k, loc in enumerate(locations):
        cfg = SimulationConfig(n=50, reps=reps, seed=seed + k, betas=BETAS, lams=(0.0,),
                               alternative=Alternative("fixed", 1.0), epsilon=0.1,
                               contamination_mean=loc, workers=workers)
        rows += [[c.beta, loc, c.rate, c.se] for c in empirical_power(cfg).cells]
    return Table("contaminated_power", ("beta", "contamination_mean", "rate", "se"), rows,
                 {"n": 50, "theta": 1.0, "epsilon": 0.1, "reps": reps, "seed": seed})


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    for t in (influence_curves(), power_curves(), contaminated_power_curves(args.reps, args.seed, args.workers)):
        for path in t.write(args.out_dir):
            print(path)


if __name__ == "__main__":
    main()
