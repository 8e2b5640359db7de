import io
import json
import statistics
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from gmsransac import bench, imageio
from gmsransac.bench import (COLUMNS, DEFAULT_RATIOS, ImagePairSource, RunRecord, Scenario,
                             SyntheticSource, WarpSource, compare_methods, read_csv, read_jsonl,
                             records_to_text, run_many, run_scenario, scenario_from_config,
                             summarize, sweep_presets, sweep_ratios, write_csv)
from gmsransac.errors import ConfigError
from gmsransac.gms import GmsConfig
from gmsransac.imageio import corner_rich_image, save_image

FIXTURES = Path(__file__).parent / "fixtures"
H_TRUE = np.array([[1.03, 0.04, 12.0], [-0.02, 0.97, -7.0], [2e-5, -1e-5, 1.0]])


def det_rows(records):
    return [r.deterministic_view() for r in records]


def synth(n_in=300, n_out=300, **kw):
    return Scenario(SyntheticSource(n_in, n_out), **kw)


# scenario plumbing --------------------------------------------------------

def test_scenario_validation():
    with pytest.raises(ConfigError):
        synth(repeats=0)
    with pytest.raises(ConfigError):
        synth(method="magic")
    with pytest.raises(ConfigError):
        synth(seeds=[1], repeats=2)
    with pytest.raises(ConfigError):
        synth(ratio=1.5)
    assert synth(seeds=[9, 4, 7], repeats=2).seed_list() == [9, 4]
    assert synth(base_seed=10, repeats=3).seed_list() == [10, 11, 12]


def test_scenario_from_config():
    s = scenario_from_config({"source": "warp", "outlier_rate": 0.3, "ratio": 0.25, "repeats": 2,
                              "gms_filter": False, "alpha": 4.0})
    assert isinstance(s.source, WarpSource) and s.ratio == 0.25 and s.repeats == 2
    assert s.gms == GmsConfig(alpha=4.0, filter_enabled=False)
    pair = scenario_from_config({"source": "image_pair", "image_a": "a", "image_b": "b"})
    assert pair.ransac.kernel == "fundamental"
    for bad in ({"source": "lidar"}, {"source": "image_pair"}, {"alpha": -1.0},
                {"source": "warp", "outlier_rate": 1.0}, {"kernel": "affine"}):
        with pytest.raises(ConfigError):
            scenario_from_config(bad)


# run_scenario examples ----------------------------------------------------

@pytest.mark.parametrize("method", list(bench.METHODS))
def test_identity_fifty_inliers(method):
    # 50 points are far too sparse for a 20x20 grid at alpha 6; a 2x2 grid gives GMS enough support.
    s = Scenario(SyntheticSource(50, 0, 0.0, homography=np.eye(3)), method=method,
                 gms=GmsConfig(2, 2), repeats=10)
    for r in run_scenario(s):
        assert r.ok and r.precision == 100.0 and r.recall >= 95.0


def test_identity_fifty_inliers_default_grid_is_too_sparse():
    s = Scenario(SyntheticSource(50, 0, 0.0, homography=np.eye(3)))
    (r,) = run_scenario(s)
    assert r.status == "failed" and r.reason.startswith("TooFewMatches")
    assert r.matches_gms == 0


def test_identical_image_pair(tmp_path):
    img = corner_rich_image(320, 240, seed=5)
    save_image(img, tmp_path / "a.pgm")
    save_image(img, tmp_path / "b.pgm")
    s = Scenario(ImagePairSource(str(tmp_path / "a.pgm"), str(tmp_path / "b.pgm"), np.eye(3)), preset=1000)
    (r,) = run_scenario(s)
    assert r.ok and r.matches_final > 0 and r.precision == 100.0 and not r.pseudo_labeled


def test_image_pair_pseudo_labels(tmp_path):
    img = corner_rich_image(320, 240, seed=6)
    save_image(img, tmp_path / "a.pgm")
    save_image(imageio.warp_image(img, np.array([[1, 0, 3.0], [0, 1, 2.0], [0, 0, 1]]), 128), tmp_path / "b.pgm")
    s = Scenario(ImagePairSource(str(tmp_path / "a.pgm"), str(tmp_path / "b.pgm")), preset=800)
    (r,) = run_scenario(s)
    assert r.ok and r.pseudo_labeled and r.matches_final > 0


def test_missing_image_is_a_failed_row(tmp_path):
    s = Scenario(ImagePairSource(str(tmp_path / "nope.pgm"), str(tmp_path / "nope.pgm")), repeats=2)
    rows = run_scenario(s)
    assert [r.status for r in rows] == ["failed", "failed"]
    assert rows[0].reason.startswith("ImageLoadError")


def test_warp_scenario_runs_whole_pipeline():
    s = Scenario(WarpSource(320, 240, outlier_rate=0.5, scene_seed=3), preset=800)
    (r,) = run_scenario(s)
    assert r.ok
    assert r.t_extract_ms > 0 and r.t_describe_ms > 0 and r.t_match_ms > 0
    assert r.matches_raw >= r.matches_gms >= r.matches_final > 0
    assert r.precision >= 90.0


def test_prioritized_total_time_lower():
    base = Scenario(SyntheticSource(1000, 1000), gms=GmsConfig(filter_enabled=False), repeats=100)
    uni = run_scenario(replace(base, method="gms_ransac_uniform"))
    pri = run_scenario(replace(base, method="gms_ransac_prioritized"))
    assert statistics.median(r.t_total_ms for r in pri) < statistics.median(r.t_total_ms for r in uni)


def test_load_delay_excluded_from_total(tmp_path, monkeypatch):
    img = corner_rich_image(96, 96, seed=1)
    save_image(img, tmp_path / "a.pgm")
    s = Scenario(ImagePairSource(str(tmp_path / "a.pgm"), str(tmp_path / "a.pgm"), np.eye(3)), preset=200)
    (fast,) = run_scenario(s)
    real = imageio.load_image

    def slow(path):
        time.sleep(0.1)
        return real(path)

    monkeypatch.setattr(imageio, "load_image", slow)
    t0 = time.perf_counter()
    (delayed,) = run_scenario(s)
    wall = (time.perf_counter() - t0) * 1e3
    assert wall >= 200
    assert delayed.t_total_ms < 100
    assert abs(delayed.t_total_ms - fast.t_total_ms) < 50
    assert delayed.deterministic_view() == fast.deterministic_view()
    parts = sum(getattr(delayed, c) for c in bench.TIME_COLUMNS if c != "t_total_ms")
    assert delayed.t_total_ms == pytest.approx(parts, abs=1e-3)


# sweeps and comparisons -------------------------------------------------------

def test_sweep_presets_trend_and_degenerate_case():
    base = Scenario(WarpSource(320, 240, outlier_rate=0.3, scene_seed=11))
    sw = sweep_presets(base, [300, 600, 1200])
    assert sw.non_decreasing
    assert sw.summary()["median_matches_final"] == sw.median_matches
    one = sweep_presets(base, [600])
    assert det_rows(one.records) == det_rows(run_scenario(replace(base, preset=600)))
    with pytest.raises(ConfigError):
        sweep_presets(base, [600, 300])


def test_sweep_ratios_grid_and_rho_one():
    base = synth(repeats=2)
    recs = sweep_ratios(base, presets=[1000, 2000])
    assert len(recs) == 2 * len(DEFAULT_RATIOS) * 2
    assert all(r.method == "gms_ransac_prioritized" for r in recs)
    ones = sweep_ratios(base, [1.0])
    uni = run_scenario(replace(base, method="gms_ransac_uniform", ratio=1.0))
    skip = {"scenario", "method"}
    strip = lambda rows: [{k: v for k, v in r.items() if k not in skip} for r in det_rows(rows)]
    assert strip(ones) == strip(uni)
    with pytest.raises(ConfigError):
        sweep_ratios(base, [0.0])


def test_compare_self_is_zero():
    recs = run_scenario(synth(repeats=3, method="gms_ransac_uniform"))
    per, red = summarize(recs, "gms_ransac_uniform")
    assert red == {"gms_ransac_uniform": 0.0}
    twin = recs + [replace(r, method="gms_ransac_prioritized") for r in recs]
    assert summarize(twin)[1]["gms_ransac_prioritized"] == 0.0
    with pytest.raises(ConfigError):
        compare_methods(synth(), ["gms_ransac_prioritized"])


def test_compare_recomputes_from_csv():
    base = Scenario(SyntheticSource(600, 600), gms=GmsConfig(filter_enabled=False), repeats=3)
    cmp = compare_methods(base, presets=[1000, 2000])
    rows = read_csv(io.StringIO(records_to_text(cmp.records)))
    # spreadsheet-style recompute: median total per (method, preset), percent reduction, mean over presets
    pct = []
    for p in (1000, 2000):
        med = {m: statistics.median(r.t_total_ms for r in rows if r.method == m and r.preset == p)
               for m in bench.METHODS}
        pct.append(100 * (med["gms_ransac_uniform"] - med["gms_ransac_prioritized"]) / med["gms_ransac_uniform"])
    assert cmp.reduction["gms_ransac_prioritized"] == pytest.approx(sum(pct) / len(pct), abs=1e-12)
    assert cmp.per_method["gms_ransac_uniform"]["runs"] == 6
    assert json.loads(json.dumps(cmp.summary()))["kind"] == "comparison"


# records --------------------------------------------------------------------

def test_csv_and_jsonl_round_trip():
    recs = run_scenario(synth(repeats=3))
    text = records_to_text(recs, "csv")
    assert text.splitlines()[0] == ",".join(COLUMNS)
    again = read_csv(io.StringIO(text))
    assert records_to_text(again, "csv") == text
    js = records_to_text(recs, "jsonl")
    assert records_to_text(read_jsonl(io.StringIO(js)), "jsonl") == js
    assert records_to_text(read_jsonl(io.StringIO(js)), "csv") == text
    with pytest.raises(ConfigError):
        records_to_text(recs, "xml")
    with pytest.raises(ValueError):
        read_csv(io.StringIO("a,b\n1,2\n"))


def test_reference_fixture_schema():
    text = (FIXTURES / "reference_rows.csv").read_text()
    rows = read_csv(io.StringIO(text))
    assert records_to_text(rows) == text
    by_preset = {r.preset: r for r in rows if r.scenario.startswith("reference:table")}
    assert (by_preset[1000].matches_final, by_preset[1000].t_total_ms) == (45, 2.11)
    assert (by_preset[3000].matches_final, by_preset[3000].t_total_ms) == (138, 7.31)
    assert (by_preset[5000].matches_final, by_preset[5000].t_total_ms) == (160, 7.5)
    assert by_preset[5000].ratio == "1/2"
    desk = [r for r in rows if r.scenario.startswith("reference:desk")][0]
    assert (desk.precision, desk.recall) == (77.0202, 45.75)
    assert all(r.hardware.endswith("not-reproducible") for r in rows)
    summary = json.loads((FIXTURES / "reference_summary.json").read_text())
    assert summary["reproducible"] is False
    assert summary["time_reduction_pct"]["gms_ransac_prioritized"] == 32.00


def test_determinism_and_parallel_order():
    scen = [synth(repeats=3, base_seed=5), Scenario(WarpSource(160, 120, scene_seed=2), preset=300, repeats=2)]
    a = run_many(scen)
    b = run_many(scen)
    c = run_many(scen, workers=2)
    strip = lambda rows: [{k: v for k, v in r.items()} for r in det_rows(rows)]
    assert strip(a) == strip(b) == strip(c)
    assert [(r.scenario, r.seed) for r in c] == [(r.scenario, r.seed) for r in a]
    assert [r.seed for r in a[:3]] == [5, 6, 7]


def test_failed_row_for_too_few_matches():
    (r,) = run_scenario(Scenario(SyntheticSource(2, 0)))
    assert r.status == "failed" and "TooFewMatches" in r.reason
    assert isinstance(r, RunRecord) and r.t_total_ms >= 0
