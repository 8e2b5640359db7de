"""Matches and time against the feature-count preset on warped corner-rich images."""
from common import parser, save

from gmsransac.bench import Scenario, WarpSource, sweep_presets

PRESETS = [1000, 2000, 3000, 4000, 5000, 8000, 10000]


def main():
    args = parser(__doc__).parse_args()
    base = Scenario(WarpSource(outlier_rate=0.5), name="presets", repeats=args.repeats,
                    hardware=args.hardware)
    sweep = sweep_presets(base, PRESETS, args.workers)
    save(args.out_dir, "preset_sweep", sweep.records, sweep.summary())
    for p, m in sweep.median_matches.items():
        print(f"preset {p:>6}: median matches_final {m}")
    print("non-decreasing:", sweep.non_decreasing)


if __name__ == "__main__":
    main()
