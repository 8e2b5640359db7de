"""RANSAC with homography / fundamental kernels and a confidence-prioritized sampler.

Sampling streams
----------------
Each call derives two PCG64 generators from ``SeedSequence(seed).spawn(2)``:
stream 0 draws every sample taken over the full match set (uniform mode,
and the second phase of prioritized mode), stream 1 draws the first-phase
samples from the high-confidence group. A minimal sample is drawn by
repeated ``integers(m)`` calls, rejecting indices already in the sample.

Stopping rule
-------------
Uniform mode stops once the iteration count reaches
``required_iterations(p, t, n)`` for the best model so far, where ``t`` is
its inlier fraction over all matches. Prioritized mode applies the same
rule during the first phase, but with ``t`` measured inside the group the
samples are drawn from. If the first-phase budget runs out, sampling widens
to all matches and stops once the accumulated miss probability
``(1 - t_group^n)^k1 * (1 - t^n)^k2`` drops to ``1 - p`` or below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateSample,
    NoValidModel,
    NumericalFailure,
    SingularHomography,
    TooFewMatches,
)

KERNELS = ("homography", "fundamental")
SAMPLE_SIZE = {"homography": 4, "fundamental": 8}
DEFAULT_THRESHOLD = {"homography": 3.0, "fundamental": 1.0}
MODES = ("uniform", "prioritized")


def required_iterations(p: float, t: float, n: int, max_iterations: int = 2000) -> int:
    """k = ceil(log(1 - p) / log(1 - t^n)), clamped to [1, max_iterations]."""
    if t >= 1.0:
        return 1
    q = t ** n if t > 0 else 0.0
    if q <= 0.0 or math.log1p(-q) == 0.0:
        return max_iterations
    ratio = math.log1p(-p) / math.log1p(-q)
    if not math.isfinite(ratio) or ratio >= max_iterations:
        return max_iterations
    return int(min(max(math.ceil(ratio), 1), max_iterations))


# --------------------------------------------------------------------------
# kernels

def hartley_normalize(pts):
    """Translate the centroid to the origin and scale the mean distance to sqrt(2)."""
    pts = np.asarray(pts, dtype=float)
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if not np.isfinite(d) or d < 1e-12:
        raise DegenerateSample("points coincide")
    s = math.sqrt(2.0) / d
    T = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    return (pts - c) * s, T


def _has_collinear_triple(pts) -> bool:
    p = np.asarray(pts)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        u, v = p[j] - p[i], p[k] - p[i]
        if abs(u[0] * v[1] - u[1] * v[0]) < 1e-9:
            return True
    return False


def _null_vector(A: np.ndarray) -> np.ndarray:
    _, s, vt = np.linalg.svd(A, full_matrices=A.shape[0] < 9)
    s = np.concatenate([s, np.zeros(9 - len(s))]) if len(s) < 9 else s
    if s[7] - s[8] < 1e-12:
        raise NumericalFailure("null space is not one-dimensional")
    return vt[-1]


def normalize_max_entry(h: np.ndarray) -> np.ndarray:
    return h / h.flat[np.argmax(np.abs(h))]


def estimate_homography(src, dst) -> np.ndarray:
    """Normalized DLT from >= 4 correspondences, largest entry scaled to 1."""
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if len(src) < 4 or len(src) != len(dst):
        raise DegenerateSample(f"need >= 4 paired points, got {len(src)}/{len(dst)}")
    a, Ta = hartley_normalize(src)
    b, Tb = hartley_normalize(dst)
    if len(src) == 4 and (_has_collinear_triple(a) or _has_collinear_triple(b)):
        raise DegenerateSample("three points are collinear")
    n = len(a)
    A = np.zeros((2 * n, 9))
    x, y = a[:, 0], a[:, 1]
    u, v = b[:, 0], b[:, 1]
    A[0::2, 0], A[0::2, 1], A[0::2, 2] = x, y, 1.0
    A[0::2, 6], A[0::2, 7], A[0::2, 8] = -u * x, -u * y, -u
    A[1::2, 3], A[1::2, 4], A[1::2, 5] = x, y, 1.0
    A[1::2, 6], A[1::2, 7], A[1::2, 8] = -v * x, -v * y, -v
    Hn = _null_vector(A).reshape(3, 3)
    H = np.linalg.solve(Tb, Hn @ Ta)
    if not np.all(np.isfinite(H)):
        raise NumericalFailure("non-finite homography")
    return normalize_max_entry(H)


def _rank2(F: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(F)
    return (u * np.array([s[0], s[1], 0.0])) @ vt


def estimate_fundamental(src, dst) -> np.ndarray:
    """Normalized 8-point algorithm; rank 2, unit Frobenius norm."""
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if len(src) < 8 or len(src) != len(dst):
        raise DegenerateSample(f"need >= 8 paired points, got {len(src)}/{len(dst)}")
    a, Ta = hartley_normalize(src)
    b, Tb = hartley_normalize(dst)
    x, y = a[:, 0], a[:, 1]
    u, v = b[:, 0], b[:, 1]
    one = np.ones_like(x)
    A = np.stack([u * x, u * y, u, v * x, v * y, v, x, y, one], axis=1)
    s = np.linalg.svd(A, compute_uv=False)
    if len(s) < 8 or s[7] <= 1e-9:
        raise DegenerateSample("design matrix has rank below 8")
    Fn = _rank2(_null_vector(A).reshape(3, 3))
    F = _rank2(Tb.T @ Fn @ Ta)
    norm = np.linalg.norm(F)
    if not np.isfinite(norm) or norm < 1e-15:
        raise NumericalFailure("fundamental matrix vanished")
    F = F / norm
    return F * np.sign(F.flat[np.argmax(np.abs(F))])


def _homog(p):
    return np.concatenate([p, np.ones((len(p), 1))], axis=1)


def transfer_errors(H, src, dst) -> np.ndarray:
    """Symmetric transfer error 0.5 * (|H p - q| + |H^-1 q - p|) per pair."""
    H = np.asarray(H, dtype=float)
    scale = np.abs(H).max()
    if scale == 0 or abs(np.linalg.det(H / scale)) < 1e-12:
        raise SingularHomography("homography is singular")
    Hinv = np.linalg.inv(H)
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        f = src @ H[:, :2].T + H[:, 2]
        g = dst @ Hinv[:, :2].T + Hinv[:, 2]
        e1 = np.hypot(f[:, 0] / f[:, 2] - dst[:, 0], f[:, 1] / f[:, 2] - dst[:, 1])
        e2 = np.hypot(g[:, 0] / g[:, 2] - src[:, 0], g[:, 1] / g[:, 2] - src[:, 1])
        err = 0.5 * (e1 + e2)
    return np.where(np.isfinite(err), err, np.inf)


def sampson_errors(F, src, dst) -> np.ndarray:
    """First-order geometric distance to the epipolar constraint, in pixels."""
    x1 = _homog(np.asarray(src, dtype=float).reshape(-1, 2))
    x2 = _homog(np.asarray(dst, dtype=float).reshape(-1, 2))
    Fx1 = x1 @ F.T
    Ftx2 = x2 @ F
    num = np.einsum("ij,ij->i", x2, Fx1)
    den = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(num) / np.sqrt(den)
    return np.where(np.isfinite(err), err, np.inf)


_FIT = {"homography": estimate_homography, "fundamental": estimate_fundamental}
_RESIDUALS = {"homography": transfer_errors, "fundamental": sampson_errors}


def residuals(kind: str, m, src, dst) -> np.ndarray:
    return _RESIDUALS[kind](m, src, dst)


# --------------------------------------------------------------------------
# data types

@dataclass(eq=False)
class Model:
    kind: str
    m: np.ndarray
    inlier_mask: np.ndarray
    inlier_count: int
    iterations_used: int
    phase1_iterations: int = 0

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (self.kind == other.kind and self.m.tobytes() == other.m.tobytes()
                and np.array_equal(self.inlier_mask, other.inlier_mask)
                and self.inlier_count == other.inlier_count
                and self.iterations_used == other.iterations_used
                and self.phase1_iterations == other.phase1_iterations)


def residual(model: Model, pair) -> float:
    (p, q) = pair
    return float(residuals(model.kind, model.m, [p], [q])[0])


@dataclass
class RansacConfig:
    kernel: str = "homography"
    inlier_threshold: float | None = None
    confidence_p: float = 0.99
    max_iterations: int = 2000
    group_ratio: float = 0.5
    phase1_budget: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not 0 < self.confidence_p < 1:
            raise ValueError("confidence_p must lie in (0, 1)")
        if not 0 < self.group_ratio <= 1:
            raise ValueError("group_ratio must lie in (0, 1]")
        if self.inlier_threshold is not None and self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def sample_size(self) -> int:
        return SAMPLE_SIZE[self.kernel]

    @property
    def threshold(self) -> float:
        return DEFAULT_THRESHOLD[self.kernel] if self.inlier_threshold is None else self.inlier_threshold

    @property
    def budget(self) -> int:
        if self.phase1_budget is not None:
            return self.phase1_budget
        return max(30, required_iterations(self.confidence_p, 0.9, self.sample_size, self.max_iterations))


@dataclass
class Correspondences:
    """Matched coordinates plus the per-match attributes the sampler sorts on."""
    pts_a: np.ndarray
    pts_b: np.ndarray
    confidence: np.ndarray = None
    distance: np.ndarray = None
    idx_a: np.ndarray = None

    def __post_init__(self):
        self.pts_a = np.asarray(self.pts_a, dtype=float).reshape(-1, 2)
        self.pts_b = np.asarray(self.pts_b, dtype=float).reshape(-1, 2)
        n = len(self.pts_a)
        if len(self.pts_b) != n:
            raise ValueError("point arrays differ in length")
        zeros = np.zeros(n, dtype=np.int64)
        self.confidence = zeros if self.confidence is None else np.asarray(self.confidence)
        self.distance = zeros if self.distance is None else np.asarray(self.distance)
        self.idx_a = np.arange(n) if self.idx_a is None else np.asarray(self.idx_a)

    def __len__(self):
        return len(self.pts_a)

    @classmethod
    def from_scored(cls, scored, fs_a, fs_b) -> "Correspondences":
        ia = np.array([s.match.idx_a for s in scored], dtype=np.int64)
        ib = np.array([s.match.idx_b for s in scored], dtype=np.int64)
        return cls(fs_a.xy[ia].reshape(-1, 2), fs_b.xy[ib].reshape(-1, 2),
                   np.array([s.confidence for s in scored], dtype=np.int64),
                   np.array([s.match.distance for s in scored], dtype=np.int64), ia)


class Partition(NamedTuple):
    order: np.ndarray
    split: int


def group_size(ratio: float, n: int, min_size: int = 0) -> int:
    k = math.ceil(Fraction(ratio).limit_denominator(10 ** 6) * n)
    return int(min(max(k, min(min_size, n)), n))


def partition(matches, ratio: float, kernel: str = "homography") -> Partition:
    """Sort by confidence (desc), Hamming distance, then idx_a; split at ceil(ratio * N)."""
    if not 0 < ratio <= 1:
        raise ValueError("ratio must lie in (0, 1]")
    if isinstance(matches, Correspondences):
        conf, dist, ia = matches.confidence, matches.distance, matches.idx_a
    else:
        conf = np.array([s.confidence for s in matches], dtype=np.int64)
        dist = np.array([s.match.distance for s in matches], dtype=np.int64)
        ia = np.array([s.match.idx_a for s in matches], dtype=np.int64)
    order = np.lexsort((ia, dist, -np.asarray(conf)))
    return Partition(order, group_size(ratio, len(conf), SAMPLE_SIZE[kernel]))


# --------------------------------------------------------------------------
# the estimator

def _draw(rng: np.random.Generator, m: int, n: int) -> list[int]:
    out: list[int] = []
    while len(out) < n:
        j = int(rng.integers(m))
        if j not in out:
            out.append(j)
    return out


def _log_miss(t: float, n: int) -> float:
    q = t ** n
    if q >= 1.0:
        return -math.inf
    return math.log1p(-q)


@dataclass
class _Best:
    m: np.ndarray | None = None
    mask: np.ndarray | None = None
    count: int = -1


def ransac(corr: Correspondences, cfg: RansacConfig | None = None, mode: str = "uniform") -> Model:
    cfg = cfg or RansacConfig()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    N, n = len(corr), cfg.sample_size
    if N < n:
        raise TooFewMatches(f"{N} matches, {cfg.kernel} needs {n}")
    pa, pb = corr.pts_a, corr.pts_b
    fit, res = _FIT[cfg.kernel], _RESIDUALS[cfg.kernel]
    thr, p, cap = cfg.threshold, cfg.confidence_p, cfg.max_iterations
    main, prio = (np.random.Generator(np.random.PCG64(s))
                  for s in np.random.SeedSequence(cfg.seed).spawn(2))
    best = _Best()

    def trial(idx) -> bool:
        try:
            m = fit(pa[idx], pb[idx])
            mask = res(m, pa, pb) < thr
        except (DegenerateSample, NumericalFailure, SingularHomography):
            return False
        count = int(mask.sum())
        if count > best.count:
            best.m, best.mask, best.count = m, mask, count
            return True
        return False

    it = 0
    phase1 = 0
    part = partition(corr, cfg.group_ratio, cfg.kernel) if mode == "prioritized" else None
    if part is None or part.split >= N:
        k = cap
        while it < k:
            it += 1
            if trial(_draw(main, N, n)):
                k = required_iterations(p, best.count / N, n, cap)
    else:
        top = part.order[:part.split]
        budget = min(cfg.budget, cap)
        k1 = budget
        while it < min(k1, budget):
            it += 1
            if trial(top[_draw(prio, part.split, n)]):
                k1 = required_iterations(p, best.mask[top].sum() / part.split, n, cap)
        phase1 = it
        done = best.m is not None and it >= k1
        target = math.log(1.0 - p)
        while not done and it < cap:
            if best.m is not None:
                miss = (phase1 * _log_miss(best.mask[top].sum() / part.split, n)
                        + (it - phase1) * _log_miss(best.count / N, n))
                if miss <= target:
                    break
            it += 1
            trial(_draw(main, N, n))

    if best.m is None:
        raise NoValidModel(f"no non-degenerate sample in {it} iterations")

    m, mask = best.m, best.mask
    if best.count >= n:
        try:
            m2 = fit(pa[mask], pb[mask])
            mask2 = res(m2, pa, pb) < thr
            if mask2.sum() >= best.count:
                m, mask = m2, mask2
        except (DegenerateSample, NumericalFailure, SingularHomography):
            pass
    return Model(cfg.kernel, m, mask, int(mask.sum()), it, phase1)


def ransac_matches(scored: Sequence, fs_a, fs_b, cfg: RansacConfig | None = None,
                   mode: str = "uniform") -> Model:
    """``ransac`` on GMS-scored matches between two feature sets."""
    return ransac(Correspondences.from_scored(scored, fs_a, fs_b), cfg, mode)
