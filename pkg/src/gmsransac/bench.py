"""Benchmark harness: run the extract -> match -> GMS -> RANSAC pipeline over
scenarios and seeds, and emit one ``RunRecord`` per run.

Three scenario sources are supported:

* ``SyntheticSource`` -- labelled point correspondences straight from
  ``synth_correspondences``; the feature stages are skipped.
* ``WarpSource`` -- a procedurally generated corner-rich image and its warp
  by a known homography, run through the whole pipeline. Extra wrong
  matches are injected after brute-force matching to reach a target
  outlier rate, and second-image keypoints are jittered by Gaussian noise.
* ``ImagePairSource`` -- two image files, labelled against a reference
  homography when one is given, else against a high-budget fundamental
  matrix fit (flagged ``pseudo_labeled``).

Seeds: a scenario either lists its seeds or derives ``base_seed + i`` for
``i < repeats``. Within a run, the seed drives the RANSAC sampler and all
scenario randomness (``scene_seed`` pins the synthetic scene instead).
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import imageio
from .config import format_ratio, parse_ratio
from .errors import ConfigError, GmsRansacError, NoValidModel, TooFewMatches
from .features import FeatureConfig, FeatureSet, describe_many, detect_keypoints
from .gms import GmsConfig, gms_scores
from .matcher import hamming, match_arrays, match_bruteforce
from .metrics import Stopwatch, evaluate
from .robust import Correspondences, RansacConfig, ransac, residuals

METHODS = {"gms_ransac_uniform": "uniform", "gms_ransac_prioritized": "prioritized"}
LABEL_PX = 3.0


@dataclass
class SyntheticSource:
    n_inliers: int = 1000
    n_outliers: int = 1000
    noise_sigma: float = 0.5
    width: int = 640
    height: int = 480
    homography: np.ndarray | None = None
    kind = "synthetic"


@dataclass
class WarpSource:
    width: int = 640
    height: int = 480
    outlier_rate: float = 0.5
    noise_sigma: float = 0.5
    scene_seed: int | None = None
    homography: np.ndarray | None = None
    kind = "warp"


@dataclass
class ImagePairSource:
    path_a: str
    path_b: str
    reference_h: np.ndarray | None = None
    kind = "image_pair"


@dataclass
class Scenario:
    source: SyntheticSource | WarpSource | ImagePairSource
    name: str = "scenario"
    preset: int = 3000
    ratio: float = 0.5
    method: str = "gms_ransac_prioritized"
    seeds: list[int] | None = None
    repeats: int = 1
    base_seed: int = 0
    ransac: RansacConfig = field(default_factory=RansacConfig)
    gms: GmsConfig = field(default_factory=GmsConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    hardware: str = "unspecified"

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {sorted(METHODS)}")
        if self.seeds is not None and len(self.seeds) < self.repeats:
            raise ConfigError(f"{len(self.seeds)} seeds listed for {self.repeats} repeats")
        if not 0 < self.ratio <= 1:
            raise ConfigError("ratio must lie in (0, 1]")
        if self.preset < 1:
            raise ConfigError("preset must be >= 1")

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds[:self.repeats])
        return [self.base_seed + i for i in range(self.repeats)]

    @property
    def scenario_id(self) -> str:
        return f"{self.name}:{self.source.kind}:p{self.preset}:r{format_ratio(self.ratio)}:{self.method}"


# --------------------------------------------------------------------------
# records

@dataclass
class RunRecord:
    scenario: str
    method: str
    preset: int
    ratio: str
    seed: int
    status: str = "ok"
    reason: str = ""
    matches_raw: int = 0
    matches_gms: int = 0
    matches_final: int = 0
    precision: float = 0.0
    recall: float = 0.0
    precision_empty: bool = False
    recall_empty: bool = False
    num_correct: int = 0
    num_false: int = 0
    num_missed: int = 0
    iterations_used: int = 0
    phase1_iterations: int = 0
    pseudo_labeled: bool = False
    t_extract_ms: float = 0.0
    t_describe_ms: float = 0.0
    t_match_ms: float = 0.0
    t_gms_ms: float = 0.0
    t_ransac_ms: float = 0.0
    t_total_ms: float = 0.0
    hardware: str = "unspecified"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def deterministic_view(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in VOLATILE_COLUMNS}


COLUMNS = [f.name for f in fields(RunRecord)]
TIME_COLUMNS = ["t_extract_ms", "t_describe_ms", "t_match_ms", "t_gms_ms", "t_ransac_ms", "t_total_ms"]
VOLATILE_COLUMNS = set(TIME_COLUMNS) | {"hardware"}
_FLOAT_COLUMNS = {"precision", "recall", *TIME_COLUMNS}
_BOOL_COLUMNS = {"precision_empty", "recall_empty", "pseudo_labeled"}
_INT_COLUMNS = {f.name for f in fields(RunRecord) if f.type in ("int", int)}


def _fmt(key, value) -> str:
    if key in _FLOAT_COLUMNS:
        return f"{value:.4f}"
    if key in _BOOL_COLUMNS:
        return "1" if value else "0"
    return str(value)


def _parse(key, text: str):
    if key in _FLOAT_COLUMNS:
        return float(text)
    if key in _BOOL_COLUMNS:
        return text in ("1", "True", "true")
    if key in _INT_COLUMNS:
        return int(text)
    return text


def write_csv(records: Iterable[RunRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_fmt(k, getattr(r, k)) for k in COLUMNS])


def read_csv(fh) -> list[RunRecord]:
    rows = list(csv.reader(fh))
    if not rows:
        return []
    if rows[0] != COLUMNS:
        raise ValueError(f"unexpected header {rows[0]}")
    return [RunRecord(**{k: _parse(k, v) for k, v in zip(COLUMNS, row)}) for row in rows[1:]]


def write_jsonl(records: Iterable[RunRecord], fh) -> None:
    for r in records:
        fh.write(json.dumps({k: _parse(k, _fmt(k, getattr(r, k))) for k in COLUMNS}) + "\n")


def read_jsonl(fh) -> list[RunRecord]:
    return [RunRecord(**json.loads(line)) for line in fh if line.strip()]


def records_to_text(records: Sequence[RunRecord], fmt: str = "csv") -> str:
    buf = io.StringIO()
    if fmt == "csv":
        write_csv(records, buf)
    elif fmt == "jsonl":
        write_jsonl(records, buf)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    return buf.getvalue()


# --------------------------------------------------------------------------
# one run

def _round_ms(x: float) -> float:
    return float(f"{x:.4f}")


def _features(img, preset, cfg, sw):
    with sw.stage("extract"):
        xs, ys, s, ang = detect_keypoints(img, preset, cfg)
    with sw.stage("describe"):
        desc = describe_many(img, xs, ys, ang)
    return FeatureSet(np.stack([xs, ys], axis=1).astype(float), s.astype(float), ang, desc, img.dims)


def _inject_outliers(fs_a, fs_b, ia, ib, dist, truth_fn, rate, rng):
    truth = truth_fn(fs_a.xy[ia], fs_b.xy[ib])
    n_true = int(truth.sum())
    want = int(np.ceil(rate / (1.0 - rate) * n_true)) - int((~truth).sum()) if rate < 1 else 0
    if want <= 0 or len(fs_a) == 0 or len(fs_b) == 0:
        return ia, ib, dist
    extra_a, extra_b = [], []
    tries = 0
    while len(extra_a) < want and tries < 50:
        tries += 1
        ca = rng.integers(len(fs_a), size=want)
        cb = rng.integers(len(fs_b), size=want)
        bad = ~truth_fn(fs_a.xy[ca], fs_b.xy[cb])
        extra_a.extend(ca[bad].tolist())
        extra_b.extend(cb[bad].tolist())
    ea = np.array(extra_a[:want], dtype=np.int64)
    eb = np.array(extra_b[:want], dtype=np.int64)
    ed = np.array([hamming(fs_a.descriptors[i], fs_b.descriptors[j]) for i, j in zip(ea, eb)], dtype=np.int64)
    ia, ib, dist = np.concatenate([ia, ea]), np.concatenate([ib, eb]), np.concatenate([dist, ed])
    order = np.lexsort((ib, ia))
    return ia[order], ib[order], dist[order]


def _transfer_truth(h):
    def truth(pa, pb):
        with np.errstate(divide="ignore", invalid="ignore"):
            err = np.linalg.norm(imageio.apply_homography(h, pa) - pb, axis=1)
        return err < LABEL_PX
    return truth


def _run_once(s: Scenario, seed: int) -> RunRecord:
    rec = RunRecord(s.scenario_id, s.method, s.preset, format_ratio(s.ratio), seed, hardware=s.hardware)
    sw = Stopwatch()
    mode = METHODS[s.method]
    rcfg = replace(s.ransac, group_ratio=s.ratio, seed=seed)
    src = s.source
    try:
        if isinstance(src, SyntheticSource):
            dims_a = dims_b = (src.width, src.height)
            with sw.stage("load"):
                h = src.homography if src.homography is not None else \
                    imageio.random_homography(np.random.default_rng([seed, 1]), dims_a)
                pa, pb, gt = imageio.synth_correspondences(
                    src.n_inliers, src.n_outliers, h, src.noise_sigma, dims_a, seed)
            truth = gt.inlier_labels
            dist = np.zeros(len(pa), dtype=np.int64)
            ia = np.arange(len(pa))
        else:
            with sw.stage("load"):
                if isinstance(src, WarpSource):
                    scene = seed if src.scene_seed is None else src.scene_seed
                    img_a = imageio.corner_rich_image(src.width, src.height, scene)
                    h = src.homography if src.homography is not None else \
                        imageio.random_homography(np.random.default_rng([scene, 1]), img_a.dims)
                    img_b = imageio.warp_image(img_a, h, fill=128)
                else:
                    img_a = imageio.load_image(src.path_a)
                    img_b = imageio.load_image(src.path_b)
                    h = src.reference_h
            fs_a = _features(img_a, s.preset, s.features, sw)
            fs_b = _features(img_b, s.preset, s.features, sw)
            with sw.stage("match"):
                ia, ib, dist = match_arrays(match_bruteforce(fs_a, fs_b))
            with sw.stage("prepare"):
                if isinstance(src, WarpSource):
                    rng = np.random.default_rng([seed, 2])
                    jitter = rng.normal(0.0, src.noise_sigma, size=fs_b.xy.shape) if src.noise_sigma > 0 else 0.0
                    w, hh = img_b.dims
                    fs_b.xy = np.clip(fs_b.xy + jitter, 0.0, [w - 1e-6, hh - 1e-6])
                    ia, ib, dist = _inject_outliers(fs_a, fs_b, ia, ib, dist, _transfer_truth(h),
                                                    src.outlier_rate, rng)
            pa, pb = fs_a.xy[ia], fs_b.xy[ib]
            dims_a, dims_b = img_a.dims, img_b.dims
            truth = None
            if h is not None:
                truth = _transfer_truth(h)(pa, pb)
        rec.matches_raw = len(pa)

        with sw.stage("gms"):
            keep, conf, _, _ = gms_scores(pa, pb, dims_a, dims_b, s.gms)
        rec.matches_gms = int(keep.sum())
        retained = np.zeros(len(pa), dtype=bool)
        with sw.stage("ransac"):
            kept = np.flatnonzero(keep)
            corr = Correspondences(pa[kept], pb[kept], conf[kept], dist[kept], ia[kept])
            model = ransac(corr, rcfg, mode)
        retained[kept[model.inlier_mask]] = True
        rec.matches_final = model.inlier_count
        rec.iterations_used = model.iterations_used
        rec.phase1_iterations = model.phase1_iterations

        with sw.stage("metrics"):
            if truth is None:
                rec.pseudo_labeled = True
                truth = _pseudo_truth(pa, pb, seed)
            ev = evaluate(retained, truth)
        rec.precision, rec.recall = round(ev.precision, 4), round(ev.recall, 4)
        rec.precision_empty, rec.recall_empty = ev.precision_empty, ev.recall_empty
        rec.num_correct, rec.num_false, rec.num_missed = ev.num_correct, ev.num_false, ev.num_missed
    except GmsRansacError as exc:
        rec.status = "failed"
        rec.reason = f"{type(exc).__name__}: {exc}"
    times = sw.as_dict()
    for stage in ("extract", "describe", "match", "gms", "ransac"):
        setattr(rec, f"t_{stage}_ms", _round_ms(times[stage]))
    rec.t_total_ms = _round_ms(sum(getattr(rec, f"t_{st}_ms") for st in ("extract", "describe", "match", "gms", "ransac")))
    return rec


def _pseudo_truth(pa, pb, seed) -> np.ndarray:
    """Labels from a high-budget uniform fundamental-matrix fit over all raw matches."""
    cfg = RansacConfig(kernel="fundamental", confidence_p=0.999, max_iterations=10000, seed=seed)
    try:
        ref = ransac(Correspondences(pa, pb), cfg, "uniform")
    except (TooFewMatches, NoValidModel):
        return np.zeros(len(pa), dtype=bool)
    return residuals("fundamental", ref.m, pa, pb) < LABEL_PX


def _job(args):
    scenario, seed = args
    return _run_once(scenario, seed)


def run_many(scenarios: Sequence[Scenario], workers: int = 1) -> list[RunRecord]:
    """All (scenario, seed) runs, ordered by scenario position then seed."""
    jobs = [(i, seed, s) for i, s in enumerate(scenarios) for seed in s.seed_list()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_job, [(s, seed) for _, seed, s in jobs]))
    else:
        results = [_run_once(s, seed) for _, seed, s in jobs]
    keyed = sorted(zip(((i, seed) for i, seed, _ in jobs), results), key=lambda kv: kv[0])
    return [r for _, r in keyed]


def run_scenario(s: Scenario, workers: int = 1) -> list[RunRecord]:
    return run_many([s], workers)


# --------------------------------------------------------------------------
# experiments

@dataclass
class PresetSweep:
    records: list[RunRecord]
    median_matches: dict
    non_decreasing: bool

    def summary(self) -> dict:
        return {"kind": "preset_sweep", "median_matches_final": self.median_matches,
                "non_decreasing": self.non_decreasing}


def sweep_presets(base: Scenario, presets: Sequence[int], workers: int = 1) -> PresetSweep:
    presets = list(presets)
    if presets != sorted(presets):
        raise ConfigError("presets must be ascending")
    records = run_many([replace(base, preset=p) for p in presets], workers)
    med = {}
    for p in presets:
        vals = [r.matches_final for r in records if r.preset == p and r.ok]
        med[p] = statistics.median(vals) if vals else 0
    series = [med[p] for p in presets]
    return PresetSweep(records, med, all(b >= a for a, b in zip(series, series[1:])))


DEFAULT_RATIOS = (1 / 5, 1 / 4, 1 / 3, 1 / 2, 2 / 3, 3 / 4, 4 / 5)


def sweep_ratios(base: Scenario, ratios: Sequence[float] = DEFAULT_RATIOS,
                 presets: Sequence[int] | None = None, workers: int = 1) -> list[RunRecord]:
    for r in ratios:
        if not 0 < r <= 1:
            raise ConfigError(f"ratio {r} outside (0, 1]")
    presets = [base.preset] if presets is None else list(presets)
    scen = [replace(base, preset=p, ratio=r, method="gms_ransac_prioritized")
            for p in presets for r in ratios]
    return run_many(scen, workers)


@dataclass
class Comparison:
    records: list[RunRecord]
    baseline: str
    per_method: dict
    reduction: dict

    def summary(self) -> dict:
        return {"kind": "comparison", "baseline": self.baseline,
                "per_method": self.per_method, "time_reduction_pct": self.reduction}


def summarize(records: Sequence[RunRecord], baseline: str = "gms_ransac_uniform") -> tuple[dict, dict]:
    """Per-method aggregates and mean per-preset percent time reduction vs ``baseline``."""
    ok = [r for r in records if r.ok]
    methods = sorted({r.method for r in ok})
    per_method = {}
    for m in methods:
        rows = [r for r in ok if r.method == m]
        per_method[m] = {
            "runs": len(rows),
            "median_total_ms": statistics.median(r.t_total_ms for r in rows),
            "median_ransac_ms": statistics.median(r.t_ransac_ms for r in rows),
            "median_iterations": statistics.median(r.iterations_used for r in rows),
            "mean_precision": statistics.fmean(r.precision for r in rows),
            "mean_recall": statistics.fmean(r.recall for r in rows),
            "median_matches_final": statistics.median(r.matches_final for r in rows),
        }
    reduction = {}
    presets = sorted({r.preset for r in ok})
    for m in methods:
        if m == baseline:
            reduction[m] = 0.0
            continue
        per_preset = []
        for p in presets:
            tb = [r.t_total_ms for r in ok if r.method == baseline and r.preset == p]
            to = [r.t_total_ms for r in ok if r.method == m and r.preset == p]
            if tb and to:
                base_t = statistics.median(tb)
                if base_t > 0:
                    per_preset.append(100.0 * (base_t - statistics.median(to)) / base_t)
        reduction[m] = statistics.fmean(per_preset) if per_preset else 0.0
    return per_method, reduction


def compare_methods(base: Scenario, methods: Sequence[str] = tuple(METHODS),
                    presets: Sequence[int] | None = None, baseline: str = "gms_ransac_uniform",
                    workers: int = 1) -> Comparison:
    methods = list(methods)
    if len(methods) < 2 and baseline not in methods:
        raise ConfigError("compare needs at least two methods")
    if baseline not in methods:
        baseline = methods[0]
    presets = [base.preset] if presets is None else list(presets)
    scen = [replace(base, preset=p, method=m) for p in presets for m in methods]
    records = run_many(scen, workers)
    per_method, reduction = summarize(records, baseline)
    return Comparison(records, baseline, per_method, reduction)


# --------------------------------------------------------------------------
# building scenarios from flat config

def scenario_from_config(cfg: dict) -> Scenario:
    kind = cfg.get("source", "synthetic")
    dims = dict(width=cfg.get("width", 640), height=cfg.get("height", 480))
    if kind == "synthetic":
        src = SyntheticSource(n_inliers=cfg.get("n_inliers", 1000), n_outliers=cfg.get("n_outliers", 1000),
                              noise_sigma=cfg.get("noise_sigma", 0.5), homography=cfg.get("homography"), **dims)
    elif kind == "warp":
        src = WarpSource(outlier_rate=cfg.get("outlier_rate", 0.5), noise_sigma=cfg.get("noise_sigma", 0.5),
                         scene_seed=cfg.get("scene_seed"), homography=cfg.get("homography"), **dims)
        if not 0 <= src.outlier_rate < 1:
            raise ConfigError("outlier_rate must lie in [0, 1)")
    elif kind == "image_pair":
        if "image_a" not in cfg or "image_b" not in cfg:
            raise ConfigError("image_pair source needs image_a and image_b")
        src = ImagePairSource(cfg["image_a"], cfg["image_b"], cfg.get("reference_h"))
    else:
        raise ConfigError(f"unknown source {kind!r}")
    try:
        default_kernel = "fundamental" if kind == "image_pair" else "homography"
        rcfg = RansacConfig(kernel=cfg.get("kernel", default_kernel), inlier_threshold=cfg.get("inlier_threshold"),
                            confidence_p=cfg.get("confidence_p", 0.99), max_iterations=cfg.get("max_iterations", 2000),
                            phase1_budget=cfg.get("phase1_budget"))
        gcfg = GmsConfig(cfg.get("grid_cols", 20), cfg.get("grid_rows", 20), cfg.get("alpha", 6.0),
                         cfg.get("shifts_enabled", True), cfg.get("gms_filter", True))
        if gcfg.alpha <= 0 or gcfg.grid_cols < 1 or gcfg.grid_rows < 1:
            raise ValueError("grid sizes must be >= 1 and alpha > 0")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fcfg = FeatureConfig(cfg.get("base_threshold", 20), cfg.get("low_threshold", 7), cfg.get("nms_radius", 2))
    ratio = cfg.get("ratio", cfg.get("group_ratio", 0.5))
    seeds = cfg.get("seeds")
    repeats = cfg.get("repeats", len(seeds) if seeds else 1)
    return Scenario(src, name=cfg.get("name", "scenario"), preset=cfg.get("preset", 3000),
                    ratio=parse_ratio(ratio) if isinstance(ratio, str) else ratio,
                    method=cfg.get("method", "gms_ransac_prioritized"), seeds=seeds, repeats=repeats,
                    base_seed=cfg.get("seed", 0), ransac=rcfg, gms=gcfg, features=fcfg,
                    hardware=cfg.get("hardware", "unspecified"))
