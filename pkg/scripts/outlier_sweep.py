"""RANSAC iterations and time against the outlier rate reaching the sampler.

GMS runs in score-only mode so every synthetic outlier reaches RANSAC with
its neighbourhood confidence attached.
"""
import statistics
from dataclasses import replace

from common import parser, save

from gmsransac.bench import Scenario, SyntheticSource, run_many
from gmsransac.gms import GmsConfig

RATES = [0.1, 0.3, 0.5, 0.6, 0.7]


def main():
    args = parser(__doc__).parse_args()
    records = []
    for rate in RATES:
        n_out = round(2000 * rate)
        base = Scenario(SyntheticSource(2000 - n_out, n_out), name=f"rate{int(rate * 100)}",
                        gms=GmsConfig(filter_enabled=False), repeats=args.repeats, hardware=args.hardware)
        rows = run_many([replace(base, method=m) for m in ("gms_ransac_uniform", "gms_ransac_prioritized")],
                        args.workers)
        records += rows
        med = {m: (statistics.median(r.iterations_used for r in rows if r.method == m),
                   statistics.median(r.t_ransac_ms for r in rows if r.method == m))
               for m in ("gms_ransac_uniform", "gms_ransac_prioritized")}
        (iu, tu), (ip, tp) = med["gms_ransac_uniform"], med["gms_ransac_prioritized"]
        print(f"outliers {rate:.0%}: iterations {iu:g} -> {ip:g}, ransac {tu:.2f} -> {tp:.2f} ms")
    save(args.out_dir, "outlier_sweep", records)


if __name__ == "__main__":
    main()
