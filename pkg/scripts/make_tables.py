"""Regenerate the contiguous power, inflation ratio and empirical size tables as CSV and JSON."""

import argparse

from sdtest.simulation import table_generator


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    tables = [
        table_generator("contiguous_power"),
        table_generator("inflation_ratios"),
        table_generator("empirical_size", reps=args.reps, seed=args.seed, workers=args.workers),
    ]
    for t in tables:
        for path in t.write(args.out_dir):
            print(path)


if __name__ == "__main__":
    main()
