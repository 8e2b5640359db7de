"""Regenerate the frozen 256-pair descriptor sampling pattern.

The shipped file is the output of this script with the default seed; it
only needs re-running if the pattern is deliberately changed.

    python scripts/make_pattern.py [--seed 2024] [--out src/gmsransac/data/brief_pattern.txt]
"""
import argparse
from pathlib import Path

import numpy as np

PATCH = 31
RADIUS = 15


def make_pattern(seed: int, n_pairs: int = 256) -> np.ndarray:
    rng = np.random.default_rng(seed)
    sigma = PATCH / 5.0
    rows = []
    while len(rows) < n_pairs:
        p, q = np.rint(rng.normal(0.0, sigma, size=(2, 2))).astype(int)
        # keep both points inside the disc so any rotation stays in the patch
        if p @ p > RADIUS * RADIUS or q @ q > RADIUS * RADIUS or np.array_equal(p, q):
            continue
        rows.append((p[0], p[1], q[0], q[1]))
    return np.array(rows, dtype=int)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/gmsransac/data/brief_pattern.txt"))
    args = ap.parse_args()
    pattern = make_pattern(args.seed)
    with open(args.out, "w") as fh:
        for row in pattern:
            fh.write("%d %d %d %d\n" % tuple(row))
    print(f"wrote {len(pattern)} pairs to {args.out}")


if __name__ == "__main__":
    main()
