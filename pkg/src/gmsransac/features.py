"""Single-scale ORB-style features: FAST-9 corners, intensity-centroid
orientation and a rotated 256-bit binary descriptor."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall, PatchOutOfBounds
from .imageio import MIN_FEATURE_SIZE, Image

BORDER = 16
DESCRIPTOR_BYTES = 32
TWO_PI = 2.0 * np.pi

# Bresenham circle of radius 3, clockwise from 12 o'clock (dx, dy)
CIRCLE = np.array([
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
])
ARC = 9


class Keypoint(NamedTuple):
    x: float
    y: float
    score: float
    angle: float = 0.0


@dataclass
class FeatureConfig:
    base_threshold: int = 20
    low_threshold: int = 7
    nms_radius: int = 2
    orientation_radius: int = 15


@dataclass(eq=False)
class FeatureSet:
    """Keypoints plus packed descriptors, sorted by descending score."""
    xy: np.ndarray            # (N, 2) float
    score: np.ndarray         # (N,)
    angle: np.ndarray         # (N,) radians in [0, 2pi)
    descriptors: np.ndarray   # (N, 32) uint8, bit i = byte i//8, bit i%8 (LSB first)
    source_dims: tuple[int, int]

    def __len__(self):
        return len(self.xy)

    @property
    def keypoints(self) -> list[Keypoint]:
        return [Keypoint(float(x), float(y), float(s), float(a))
                for (x, y), s, a in zip(self.xy, self.score, self.angle)]

    def __eq__(self, other):
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (self.source_dims == other.source_dims
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("xy", "score", "angle", "descriptors")))

    @classmethod
    def empty(cls, dims) -> "FeatureSet":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0),
                   np.zeros((0, DESCRIPTOR_BYTES), np.uint8), tuple(dims))


@lru_cache(maxsize=1)
def default_pattern() -> np.ndarray:
    text = resources.files("gmsransac").joinpath("data/brief_pattern.txt").read_text()
    return load_pattern(text)


def load_pattern(text: str) -> np.ndarray:
    rows = [list(map(int, line.split())) for line in text.splitlines() if line.strip()]
    pat = np.array(rows, dtype=np.int64)
    if pat.shape != (256, 4) or np.abs(pat).max() > 15:
        raise ValueError(f"pattern must be 256 rows of 4 ints in [-15, 15], got {pat.shape}")
    return pat


def _check_size(img: Image):
    if img.width < MIN_FEATURE_SIZE or img.height < MIN_FEATURE_SIZE:
        raise ImageTooSmall(f"{img.width}x{img.height} is below {MIN_FEATURE_SIZE}x{MIN_FEATURE_SIZE}")


# --------------------------------------------------------------------------
# FAST

def _arc_scores(diff: np.ndarray, threshold: int) -> np.ndarray:
    """Best contiguous-arc score per column of a (16, K) ring-minus-centre array."""
    best = np.zeros(diff.shape[1], dtype=np.int32)
    for sign in (1, -1):
        d = sign * diff
        m = d > threshold
        run_len = np.zeros(diff.shape[1], dtype=np.int32)
        run_sum = np.zeros(diff.shape[1], dtype=np.int32)
        pol = np.zeros(diff.shape[1], dtype=np.int32)
        for k in range(32):
            mk = m[k % 16]
            run_len = (run_len + 1) * mk
            run_sum = (run_sum + d[k % 16]) * mk
            pol = np.maximum(pol, np.where(run_len >= ARC, run_sum, 0))
        full = m.all(axis=0)
        pol = np.where(full, d.sum(axis=0), pol)
        best = np.maximum(best, pol)
    return best


def fast_score_map(img: Image, threshold: int) -> np.ndarray:
    """Segment-test score for every pixel (0 where there is no corner).

    A pixel is a corner when at least 9 contiguous circle pixels are all
    brighter than centre + threshold or all darker than centre - threshold;
    its score is the summed absolute difference along the best such arc.
    Pixels closer than 3 px to the border score 0.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    P = img.pixels.astype(np.int32)
    H, W = P.shape
    out = np.zeros((H, W), dtype=np.int32)
    if H < 7 or W < 7:
        return out
    c = P[3:H - 3, 3:W - 3]
    ring = np.stack([P[3 + dy:H - 3 + dy, 3 + dx:W - 3 + dx] for dx, dy in CIRCLE])
    diff = ring - c[None]
    compass = diff[[0, 4, 8, 12]]
    # any 9-arc covers at least two compass points
    cand = ((compass > threshold).sum(0) >= 2) | ((compass < -threshold).sum(0) >= 2)
    iy, ix = np.nonzero(cand)
    if iy.size:
        out[iy + 3, ix + 3] = _arc_scores(diff[:, iy, ix], threshold)
    return out


def _nms(scores: np.ndarray, radius: int) -> np.ndarray:
    """Mask of strict local maxima; ties favour the earlier raster position."""
    H, W = scores.shape
    raster = np.arange(H * W, dtype=np.int64).reshape(H, W)
    key = scores.astype(np.int64) * (H * W) + (H * W - 1 - raster)
    key[scores <= 0] = 0
    if radius > 0:
        peak = ndimage.maximum_filter(key, size=2 * radius + 1, mode="constant", cval=0)
    else:
        peak = key
    return (scores > 0) & (key == peak)


def _detect_arrays(img: Image, threshold: int, nms_radius: int):
    scores = fast_score_map(img, threshold)
    keep = _nms(scores, nms_radius)
    H, W = scores.shape
    keep[:BORDER, :] = False
    keep[H - BORDER:, :] = False
    keep[:, :BORDER] = False
    keep[:, W - BORDER:] = False
    ys, xs = np.nonzero(keep)
    return xs, ys, scores[ys, xs]


def _sorted(xs, ys, s):
    order = np.lexsort((xs, ys, -s))
    return xs[order], ys[order], s[order]


def detect_fast(img: Image, threshold: int = 20, nms_radius: int = 2) -> list[Keypoint]:
    _check_size(img)
    xs, ys, s = _sorted(*_detect_arrays(img, threshold, nms_radius))
    return [Keypoint(float(x), float(y), float(v)) for x, y, v in zip(xs, ys, s)]


# --------------------------------------------------------------------------
# orientation and descriptor

@lru_cache(maxsize=8)
def _disc(radius: int):
    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    inside = dx * dx + dy * dy <= radius * radius
    return dx[inside].astype(np.int64), dy[inside].astype(np.int64)


def orientations(img: Image, xs, ys, radius: int = 15) -> np.ndarray:
    """Intensity-centroid angle atan2(m01, m10) over a disc, in [0, 2pi)."""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.size == 0:
        return np.zeros(0)
    if (xs.min() < radius or ys.min() < radius or xs.max() > img.width - 1 - radius
            or ys.max() > img.height - 1 - radius):
        raise PatchOutOfBounds(f"radius-{radius} patch leaves the image")
    dx, dy = _disc(radius)
    vals = img.pixels[ys[:, None] + dy[None], xs[:, None] + dx[None]].astype(np.int64)
    m10 = vals @ dx
    m01 = vals @ dy
    ang = np.arctan2(m01.astype(float), m10.astype(float))
    ang = np.where(ang < 0, ang + TWO_PI, ang)
    return np.where(ang >= TWO_PI, 0.0, ang)


def orientation(img: Image, kp: Keypoint, radius: int = 15) -> float:
    return float(orientations(img, [int(round(kp.x))], [int(round(kp.y))], radius)[0])


def _rotated_offsets(pattern: np.ndarray, angles: np.ndarray):
    c = np.cos(angles)[:, None]
    s = np.sin(angles)[:, None]

    def rot(px, py):
        rx = np.floor(c * px[None] - s * py[None] + 0.5).astype(np.int64)
        ry = np.floor(s * px[None] + c * py[None] + 0.5).astype(np.int64)
        return rx, ry

    return rot(pattern[:, 0], pattern[:, 1]), rot(pattern[:, 2], pattern[:, 3])


def describe_many(img: Image, xs, ys, angles, pattern: np.ndarray | None = None) -> np.ndarray:
    """Packed descriptors, one row of 32 bytes per keypoint.

    Bit i is set iff I(p_i) < I(q_i) for the pattern pair rotated by the
    keypoint angle; ties give 0.
    """
    pattern = default_pattern() if pattern is None else np.asarray(pattern, dtype=np.int64)
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.size == 0:
        return np.zeros((0, DESCRIPTOR_BYTES), np.uint8)
    (pxr, pyr), (qxr, qyr) = _rotated_offsets(pattern, np.asarray(angles, dtype=float))
    px, py = xs[:, None] + pxr, ys[:, None] + pyr
    qx, qy = xs[:, None] + qxr, ys[:, None] + qyr
    H, W = img.height, img.width
    for ax, lim in ((px, W), (qx, W), (py, H), (qy, H)):
        if ax.min() < 0 or ax.max() >= lim:
            raise PatchOutOfBounds("descriptor pattern leaves the image")
    P = img.pixels
    bits = P[py, px] < P[qy, qx]
    return np.packbits(bits, axis=1, bitorder="little")


def describe(img: Image, kp: Keypoint, pattern: np.ndarray | None = None) -> np.ndarray:
    return describe_many(img, [int(round(kp.x))], [int(round(kp.y))], [kp.angle], pattern)[0]


def descriptor_bits(desc: np.ndarray) -> np.ndarray:
    return np.unpackbits(np.asarray(desc, np.uint8), bitorder="little")


# --------------------------------------------------------------------------
# extraction

def detect_keypoints(img: Image, preset: int, cfg: FeatureConfig | None = None):
    """Top-``preset`` corners with orientation, as sorted arrays (xs, ys, scores, angles).

    A second, low-threshold pass only runs when the first falls short of the
    preset; its corners are added where no first-pass corner lies within the
    NMS radius.
    """
    cfg = cfg or FeatureConfig()
    if preset < 1:
        raise ValueError("preset must be >= 1")
    _check_size(img)
    xs, ys, s = _detect_arrays(img, cfg.base_threshold, cfg.nms_radius)
    if xs.size < preset and cfg.low_threshold < cfg.base_threshold:
        wx, wy, ws = _detect_arrays(img, cfg.low_threshold, cfg.nms_radius)
        taken = np.zeros(img.pixels.shape, dtype=bool)
        taken[ys, xs] = True
        if cfg.nms_radius > 0:
            taken = ndimage.maximum_filter(taken, size=2 * cfg.nms_radius + 1, mode="constant")
        fresh = ~taken[wy, wx]
        xs = np.concatenate([xs, wx[fresh]])
        ys = np.concatenate([ys, wy[fresh]])
        s = np.concatenate([s, ws[fresh]])
    xs, ys, s = _sorted(xs, ys, s)
    xs, ys, s = xs[:preset], ys[:preset], s[:preset]
    angles = orientations(img, xs, ys, cfg.orientation_radius)
    return xs, ys, s, angles


def extract(img: Image, preset: int = 3000, cfg: FeatureConfig | None = None,
            pattern: np.ndarray | None = None) -> FeatureSet:
    xs, ys, s, angles = detect_keypoints(img, preset, cfg)
    desc = describe_many(img, xs, ys, angles, pattern)
    return FeatureSet(np.stack([xs, ys], axis=1).astype(float), s.astype(float), angles, desc, img.dims)
