"""Matches and RANSAC time over the grouping ratio grid, for several presets."""
import statistics

from common import parser, save

from gmsransac.bench import DEFAULT_RATIOS, Scenario, WarpSource, sweep_ratios
from gmsransac.config import format_ratio

PRESETS = [1000, 2000, 3000, 4000, 5000]


def main():
    args = parser(__doc__).parse_args()
    base = Scenario(WarpSource(outlier_rate=0.5), name="ratios", repeats=args.repeats,
                    hardware=args.hardware)
    records = sweep_ratios(base, DEFAULT_RATIOS, PRESETS, args.workers)
    save(args.out_dir, "ratio_sweep", records)
    ratios = [format_ratio(r) for r in DEFAULT_RATIOS]
    print("preset " + " ".join(f"{r:>12}" for r in ratios))
    for p in PRESETS:
        cells = []
        for r in ratios:
            rows = [x for x in records if x.preset == p and x.ratio == r and x.ok]
            m = statistics.median(x.matches_final for x in rows) if rows else 0
            t = statistics.median(x.t_ransac_ms for x in rows) if rows else 0.0
            cells.append(f"{m:>5g}/{t:6.2f}ms")
        print(f"{p:>6} " + " ".join(cells))


if __name__ == "__main__":
    main()
