"""Grayscale image I/O, homography warping and synthetic ground truth.

Images are held as 2-D ``uint8`` arrays (row-major, ``height x width``).
Binary PGM (P5) is the native format; PNG goes through Pillow when it is
installed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    ImageLoadError,
    MalformedHeader,
    SingularHomography,
    TruncatedData,
    UnsupportedMaxval,
)

MIN_FEATURE_SIZE = 32
OUTLIER_REJECT_PX = 3.0


@dataclass(frozen=True, eq=False)
class Image:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {px.shape}")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px, dtype=np.uint8))

    @classmethod
    def from_bytes(cls, width: int, height: int, data) -> "Image":
        buf = np.frombuffer(bytes(data), dtype=np.uint8)
        if buf.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {buf.size}")
        return cls(buf.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


@dataclass
class GroundTruth:
    homography: np.ndarray
    inlier_labels: np.ndarray
    noise_sigma: float = 0.0
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# PGM

def _pgm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos, n = 0, len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise MalformedHeader("header ended early")
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(buf[start:pos])
    return tokens, pos


def read_pgm(data: bytes) -> Image:
    """Decode a binary (P5) PGM with maxval <= 255."""
    data = bytes(data)
    if not data.startswith(b"P5"):
        raise MalformedHeader("missing P5 magic")
    tokens, pos = _pgm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MalformedHeader(f"non-integer header field: {exc}") from None
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"nonpositive dimensions {width}x{height}")
    if maxval <= 0:
        raise MalformedHeader(f"nonpositive maxval {maxval}")
    if maxval > 255:
        raise UnsupportedMaxval(f"maxval {maxval} needs 16-bit samples")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedHeader("no whitespace after maxval")
    pos += 1
    need = width * height
    body = data[pos:pos + need]
    if len(body) < need:
        raise TruncatedData(f"expected {need} pixels, found {len(body)}")
    return Image.from_bytes(width, height, body)


def write_pgm(img: Image) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.data


def load_image(path) -> Image:
    """Read a PGM, or a PNG/other raster via Pillow, as 8-bit grayscale."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageLoadError(f"cannot read {path}: {exc}") from exc
    if raw.startswith(b"P5"):
        return read_pgm(raw)
    try:
        from PIL import Image as PILImage
    except ImportError:  # pragma: no cover
        raise ImageLoadError(f"{path}: not a P5 PGM and Pillow is unavailable") from None
    try:
        with PILImage.open(path) as im:
            return Image(np.asarray(im.convert("L")))
    except Exception as exc:
        raise ImageLoadError(f"cannot decode {path}: {exc}") from exc


def save_image(img: Image, path) -> None:
    path = Path(path)
    if path.suffix.lower() in (".pgm", ""):
        path.write_bytes(write_pgm(img))
        return
    from PIL import Image as PILImage
    PILImage.fromarray(img.pixels).save(path)


# --------------------------------------------------------------------------
# homographies

def normalize_homography(h) -> np.ndarray:
    """Scale so the bottom-right entry is 1 (left alone when it is 0)."""
    h = np.asarray(h, dtype=float).reshape(3, 3)
    if h[2, 2] != 0:
        h = h / h[2, 2]
    return h


def check_invertible(h) -> np.ndarray:
    h = np.asarray(h, dtype=float).reshape(3, 3)
    scale = np.abs(h).max()
    if not np.all(np.isfinite(h)) or scale == 0:
        raise SingularHomography("homography is zero or not finite")
    if abs(np.linalg.det(h / scale)) <= 1e-9:
        raise SingularHomography("homography is not invertible")
    return h


def apply_homography(h, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    h = np.asarray(h, dtype=float)
    x = pts @ h[:, :2].T + h[:, 2]
    return x[:, :2] / x[:, 2:3]


def random_homography(rng: np.random.Generator, extent=(640, 480), max_angle=0.15,
                      scale=(0.9, 1.1), shift=20.0, perspective=2e-5) -> np.ndarray:
    """A mild, well-conditioned homography about the image centre."""
    w, h = extent
    cx, cy = w / 2.0, h / 2.0
    a = rng.uniform(-max_angle, max_angle)
    s = rng.uniform(*scale)
    tx, ty = rng.uniform(-shift, shift, size=2)
    px, py = rng.uniform(-perspective, perspective, size=2)
    to_c = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1.0]])
    back = np.array([[1, 0, cx + tx], [0, 1, cy + ty], [0, 0, 1.0]])
    rot = np.array([[s * np.cos(a), -s * np.sin(a), 0], [s * np.sin(a), s * np.cos(a), 0], [px, py, 1.0]])
    return normalize_homography(back @ rot @ to_c)


def warp_image(src: Image, h, fill: int = 0) -> Image:
    """Resample ``src`` so that output pixel x takes the value at h^-1 x.

    Bilinear interpolation, quantized with round-half-up; samples outside
    the source raster get ``fill``.
    """
    h = check_invertible(h)
    hinv = np.linalg.inv(h)
    H, W = src.height, src.width
    ys, xs = np.mgrid[0:H, 0:W]
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(float)
    sp = apply_homography(hinv, pts)
    sx, sy = sp[:, 0], sp[:, 1]
    inside = (sx >= 0) & (sx <= W - 1) & (sy >= 0) & (sy <= H - 1) & np.isfinite(sx) & np.isfinite(sy)
    out = np.full(H * W, fill, dtype=np.float64)
    sx, sy = sx[inside], sy[inside]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx, fy = sx - x0, sy - y0
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    img = src.pixels.astype(np.float64)
    val = ((1 - fx) * (1 - fy) * img[y0, x0] + fx * (1 - fy) * img[y0, x1]
           + (1 - fx) * fy * img[y1, x0] + fx * fy * img[y1, x1])
    out[inside] = val
    q = np.floor(out + 0.5)
    return Image(np.clip(q, 0, 255).astype(np.uint8).reshape(H, W))


# --------------------------------------------------------------------------
# synthetic data

def synth_correspondences(n_inliers: int, n_outliers: int, h, noise_sigma: float,
                          extent=(640, 480), seed: int = 0):
    """Labelled point pairs: inliers follow ``h`` plus Gaussian noise,
    outliers are independent uniform points that miss ``h`` by >= 3 px.

    Returns ``(pts_a, pts_b, GroundTruth)`` in a seeded shuffled order.
    Inlier sources are drawn uniformly among points whose noisy image also
    lands inside the extent.
    """
    if n_inliers < 0 or n_outliers < 0:
        raise ValueError("counts must be non-negative")
    w, hgt = extent
    if w <= 0 or hgt <= 0:
        raise ValueError("extent must be positive")
    h = normalize_homography(check_invertible(h))
    rng = np.random.default_rng(seed)

    def uniform(n):
        return rng.uniform((0.0, 0.0), (w, hgt), size=(n, 2))

    def inside(p):
        return (p[:, 0] >= 0) & (p[:, 0] < w) & (p[:, 1] >= 0) & (p[:, 1] < hgt)

    a_in = np.empty((0, 2))
    b_in = np.empty((0, 2))
    attempts = 0
    while len(a_in) < n_inliers:
        need = n_inliers - len(a_in)
        p = uniform(2 * need + 8)
        q = apply_homography(h, p) + rng.normal(0.0, noise_sigma, size=p.shape) if noise_sigma > 0 \
            else apply_homography(h, p)
        ok = inside(q) & np.all(np.isfinite(q), axis=1)
        a_in = np.vstack([a_in, p[ok][:need]])
        b_in = np.vstack([b_in, q[ok][:need]])
        attempts += 1
        if attempts > 1000:
            raise SingularHomography("homography maps almost nothing into the extent")

    a_out = np.empty((0, 2))
    b_out = np.empty((0, 2))
    while len(a_out) < n_outliers:
        need = n_outliers - len(a_out)
        p = uniform(need + 4)
        q = uniform(need + 4)
        err = np.linalg.norm(apply_homography(h, p) - q, axis=1)
        ok = ~(err < OUTLIER_REJECT_PX)
        a_out = np.vstack([a_out, p[ok][:need]])
        b_out = np.vstack([b_out, q[ok][:need]])

    pts_a = np.vstack([a_in, a_out])
    pts_b = np.vstack([b_in, b_out])
    labels = np.concatenate([np.ones(n_inliers, bool), np.zeros(n_outliers, bool)])
    perm = rng.permutation(n_inliers + n_outliers)
    return pts_a[perm], pts_b[perm], GroundTruth(h, labels[perm], float(noise_sigma))


def corner_rich_image(width: int = 640, height: int = 480, seed: int = 0,
                      n_rects: int = 6000, sizes=(4, 16), blur: float = 0.7) -> Image:
    """Random overlapping rectangles, lightly blurred; dense in L-corners."""
    rng = np.random.default_rng(seed)
    canvas = np.full((height, width), 128.0)
    for _ in range(n_rects):
        rw, rh = rng.integers(sizes[0], sizes[1], size=2)
        x0 = rng.integers(-rw // 2, width)
        y0 = rng.integers(-rh // 2, height)
        canvas[max(y0, 0):max(y0 + rh, 0), max(x0, 0):max(x0 + rw, 0)] = rng.integers(0, 256)
    if blur > 0:
        canvas = ndimage.gaussian_filter(canvas, blur)
    return Image(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))
