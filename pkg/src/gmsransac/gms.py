"""Grid-based motion statistics.

Every match is scored by how many other matches move between the same
3x3 neighbourhood of cell pairs. Neighbour cells correspond by the
displacement of the match's own cell pair: neighbour ``a + o`` in the
first grid pairs with ``b + o`` in the second. Scores are evaluated under
four half-cell grid shifts; a match survives when its score reaches
``alpha * sqrt(mean matches per occupied cell)`` under any shift, and its
confidence is its best score.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import LengthMismatch, PointOutOfBounds
from .features import FeatureSet
from .matcher import Match, match_arrays

SHIFTS = ("none", "half-x", "half-y", "half-both")
_OFFSETS = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]


@dataclass(frozen=True)
class GridSpec:
    cols: int = 20
    rows: int = 20
    shift: str = "none"

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid needs at least one cell each way")
        if self.shift not in SHIFTS:
            raise ValueError(f"unknown shift {self.shift!r}")

    @property
    def n_cells(self) -> int:
        return self.cols * self.rows

    def with_shift(self, shift: str) -> "GridSpec":
        return GridSpec(self.cols, self.rows, shift)


@dataclass
class GmsConfig:
    grid_cols: int = 20
    grid_rows: int = 20
    alpha: float = 6.0
    shifts_enabled: bool = True
    filter_enabled: bool = True

    def grids(self) -> list[GridSpec]:
        shifts = SHIFTS if self.shifts_enabled else SHIFTS[:1]
        return [GridSpec(self.grid_cols, self.grid_rows, s) for s in shifts]


class ScoredMatch(NamedTuple):
    match: Match
    confidence: int
    cell_a: int
    cell_b: int


def assign_cells(points, dims, grid: GridSpec) -> np.ndarray:
    """Cell index (column-major within a row: ``cx + cols * cy``) per point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w, h = dims
    if pts.size and (pts.min() < 0 or pts[:, 0].max() >= w or pts[:, 1].max() >= h
                     or not np.all(np.isfinite(pts))):
        raise PointOutOfBounds(f"points must lie in [0, {w}) x [0, {h})")
    cw, ch = w / grid.cols, h / grid.rows
    sx = cw / 2 if grid.shift in ("half-x", "half-both") else 0.0
    sy = ch / 2 if grid.shift in ("half-y", "half-both") else 0.0
    cx = np.minimum(np.floor((pts[:, 0] + sx) / cw), grid.cols - 1).astype(np.int64)
    cy = np.minimum(np.floor((pts[:, 1] + sy) / ch), grid.rows - 1).astype(np.int64)
    return cx + grid.cols * cy


def cell_pair_scores(matches: Sequence, cells_a, cells_b, grid: GridSpec | None = None) -> dict:
    """Number of matches landing in each (cell_a, cell_b) pair."""
    cells_a = np.asarray(cells_a)
    cells_b = np.asarray(cells_b)
    if not (len(matches) == len(cells_a) == len(cells_b)):
        raise LengthMismatch(f"{len(matches)} matches vs {len(cells_a)}/{len(cells_b)} cell assignments")
    return dict(Counter(zip(cells_a.tolist(), cells_b.tolist())))


def neighbourhood_scores(cells_a: np.ndarray, cells_b: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Support count for each match, itself excluded."""
    n = len(cells_a)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    ncell = grid.n_cells
    keys = cells_a * ncell + cells_b
    uniq, counts = np.unique(keys, return_counts=True)
    ax, ay = cells_a % grid.cols, cells_a // grid.cols
    bx, by = cells_b % grid.cols, cells_b // grid.cols
    score = np.zeros(n, dtype=np.int64)
    for dx, dy in _OFFSETS:
        nax, nay, nbx, nby = ax + dx, ay + dy, bx + dx, by + dy
        ok = ((nax >= 0) & (nax < grid.cols) & (nay >= 0) & (nay < grid.rows)
              & (nbx >= 0) & (nbx < grid.cols) & (nby >= 0) & (nby < grid.rows))
        nk = (nax + grid.cols * nay) * ncell + (nbx + grid.cols * nby)
        pos = np.searchsorted(uniq, nk)
        pos = np.minimum(pos, len(uniq) - 1)
        hit = ok & (uniq[pos] == nk)
        score += np.where(hit, counts[pos], 0)
    return score - 1


def threshold(cells_a: np.ndarray, alpha: float) -> float:
    if len(cells_a) == 0:
        return float("inf")
    mean_occupancy = len(cells_a) / len(np.unique(cells_a))
    return alpha * float(np.sqrt(mean_occupancy))


def gms_scores(pts_a, pts_b, dims_a, dims_b, cfg: GmsConfig | None = None):
    """Vectorised core: (keep mask, confidence, winning cell_a, winning cell_b).

    With ``filter_enabled`` off every match is kept and only scored.
    """
    cfg = cfg or GmsConfig()
    if cfg.alpha <= 0:
        raise ValueError("alpha must be positive")
    pts_a = np.asarray(pts_a, dtype=float).reshape(-1, 2)
    pts_b = np.asarray(pts_b, dtype=float).reshape(-1, 2)
    n = len(pts_a)
    if len(pts_b) != n:
        raise LengthMismatch("point arrays differ in length")
    keep = np.zeros(n, dtype=bool)
    conf = np.full(n, -1, dtype=np.int64)
    win_a = np.zeros(n, dtype=np.int64)
    win_b = np.zeros(n, dtype=np.int64)
    if n == 0:
        return keep, np.zeros(0, dtype=np.int64), win_a, win_b
    for grid in cfg.grids():
        ca = assign_cells(pts_a, dims_a, grid)
        cb = assign_cells(pts_b, dims_b, grid)
        s = neighbourhood_scores(ca, cb, grid)
        keep |= s >= threshold(ca, cfg.alpha)
        better = s > conf
        conf[better] = s[better]
        win_a[better] = ca[better]
        win_b[better] = cb[better]
    if not cfg.filter_enabled:
        keep[:] = True
    return keep, conf, win_a, win_b


def gms_filter(matches: Sequence[Match], fs_a: FeatureSet, fs_b: FeatureSet,
               grid: GridSpec | None = None, alpha: float = 6.0,
               shifts_enabled: bool = True) -> list[ScoredMatch]:
    """Surviving matches with their neighbourhood support as confidence."""
    grid = grid or GridSpec()
    cfg = GmsConfig(grid.cols, grid.rows, alpha, shifts_enabled)
    ia, ib, _ = match_arrays(list(matches))
    keep, conf, ca, cb = gms_scores(fs_a.xy[ia], fs_b.xy[ib], fs_a.source_dims, fs_b.source_dims, cfg)
    return [ScoredMatch(Match(*map(int, m)), int(conf[i]), int(ca[i]), int(cb[i]))
            for i, m in enumerate(matches) if keep[i]]
