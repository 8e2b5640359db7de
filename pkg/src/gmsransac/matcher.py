"""Brute-force Hamming matching of packed binary descriptors."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .features import FeatureSet

_BLOCK_WORDS = 4_000_000


class Match(NamedTuple):
    idx_a: int
    idx_b: int
    distance: int


def hamming(a, b) -> int:
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def _as_words(desc: np.ndarray) -> np.ndarray:
    desc = np.ascontiguousarray(desc, dtype=np.uint8)
    return desc.view(np.uint64).reshape(len(desc), -1)


def distance_rows(da: np.ndarray, db: np.ndarray):
    """Yield (row_start, distance block) over ``da`` in fixed-size chunks."""
    wa, wb = _as_words(da), _as_words(db)
    step = max(1, _BLOCK_WORDS // max(1, wb.size))
    for r0 in range(0, len(wa), step):
        block = np.bitwise_count(wa[r0:r0 + step, None, :] ^ wb[None, :, :]).sum(axis=2, dtype=np.int32)
        yield r0, block


def match_bruteforce(a: FeatureSet, b: FeatureSet, cross_check: bool = False) -> list[Match]:
    """Nearest neighbour in ``b`` for every descriptor of ``a``.

    Ties go to the lowest index. With ``cross_check`` only mutual nearest
    neighbours are kept. Output is ordered by ``idx_a``.
    """
    da, db = a.descriptors, b.descriptors
    if len(da) == 0 or len(db) == 0:
        return []
    best_b = np.empty(len(da), dtype=np.int64)
    best_d = np.empty(len(da), dtype=np.int32)
    col_d = np.full(len(db), np.iinfo(np.int32).max, dtype=np.int32)
    col_a = np.zeros(len(db), dtype=np.int64)
    for r0, block in distance_rows(da, db):
        rows = np.arange(len(block))
        j = block.argmin(axis=1)
        best_b[r0:r0 + len(block)] = j
        best_d[r0:r0 + len(block)] = block[rows, j]
        if cross_check:
            i = block.argmin(axis=0)
            d = block[i, np.arange(block.shape[1])]
            better = d < col_d
            col_d[better] = d[better]
            col_a[better] = i[better] + r0
    ia = np.arange(len(da))
    if cross_check:
        ia = ia[col_a[best_b] == ia]
    return [Match(int(i), int(best_b[i]), int(best_d[i])) for i in ia]


def match_arrays(matches: list[Match]):
    """(idx_a, idx_b, distance) integer arrays for a match list."""
    if not matches:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    arr = np.asarray(matches, dtype=np.int64)
    return arr[:, 0], arr[:, 1], arr[:, 2]
