"""Uniform versus prioritized sampling on the full warp pipeline, per preset."""
import json

from common import parser, save

from gmsransac.bench import Scenario, WarpSource, compare_methods

PRESETS = [1000, 2000, 3000, 4000, 5000]


def main():
    args = parser(__doc__).parse_args()
    base = Scenario(WarpSource(outlier_rate=0.5), name="compare", repeats=args.repeats,
                    hardware=args.hardware)
    cmp = compare_methods(base, presets=PRESETS, workers=args.workers)
    save(args.out_dir, "compare", cmp.records, cmp.summary())
    print(json.dumps(cmp.summary(), indent=2, default=str))


if __name__ == "__main__":
    main()
