"""Corner-like feature sampling on grayscale images.

Scores come from the minimum eigenvalue of the local gradient structure
tensor (the classical good-features-to-track criterion); selection is a
greedy strongest-first pass that enforces a minimum pixel separation.
The implementation is deliberately self-contained so its results can be
checked against a brute-force oracle pixel by pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

# Fixed luma weights so results are comparable across runs and machines.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class SamplingParams:
    max_points: int = 500
    quality_level: float = 0.01
    min_distance: float = 10.0
    block_size: int = 3
    border_margin: int = 5

    def __post_init__(self):
        if self.max_points < 1:
            raise ValueError("max_points must be >= 1")
        if not (0.0 < self.quality_level < 1.0):
            raise ValueError("quality_level must be in (0, 1)")
        if self.min_distance < 0:
            raise ValueError("min_distance must be >= 0")
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ValueError("block_size must be odd and >= 3")
        if self.border_margin < 0:
            raise ValueError("border_margin must be >= 0")


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299 R + 0.587 G + 0.114 B) of an (H, W, 3) image."""
    return np.asarray(rgb, dtype=np.float64) @ _LUMA


@njit(cache=True)
def _score_kernel(g, r):
    """Fused Sobel gradients, sliding-window structure-tensor sums and
    min-eigenvalue per pixel.  Pixels whose window leaves the gradient-valid
    interior stay 0."""
    h, w = g.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            d0 = g[i - 1, j + 1] - g[i - 1, j - 1]
            d1 = g[i, j + 1] - g[i, j - 1]
            d2 = g[i + 1, j + 1] - g[i + 1, j - 1]
            gx[i, j] = d0 + 2.0 * d1 + d2
            e0 = g[i + 1, j - 1] - g[i - 1, j - 1]
            e1 = g[i + 1, j] - g[i - 1, j]
            e2 = g[i + 1, j + 1] - g[i - 1, j + 1]
            gy[i, j] = e0 + 2.0 * e1 + e2
    # horizontal running window sums of the tensor products
    hxx = np.zeros((h, w))
    hxy = np.zeros((h, w))
    hyy = np.zeros((h, w))
    for i in range(h):
        sxx = 0.0
        sxy = 0.0
        syy = 0.0
        for j in range(min(r + 1, w)):
            a = gx[i, j]
            b = gy[i, j]
            sxx += a * a
            sxy += a * b
            syy += b * b
        for j in range(w):
            hxx[i, j] = sxx
            hxy[i, j] = sxy
            hyy[i, j] = syy
            jin = j + r + 1
            if jin < w:
                a = gx[i, jin]
                b = gy[i, jin]
                sxx += a * a
                sxy += a * b
                syy += b * b
            jout = j - r
            if jout >= 0:
                a = gx[i, jout]
                b = gy[i, jout]
                sxx -= a * a
                sxy -= a * b
                syy -= b * b
    # vertical running window plus the eigenvalue, valid interior only
    score = np.zeros((h, w))
    axx = np.zeros(w)
    axy = np.zeros(w)
    ayy = np.zeros(w)
    for i in range(min(r + 1, h)):
        for j in range(w):
            axx[j] += hxx[i, j]
            axy[j] += hxy[i, j]
            ayy[j] += hyy[i, j]
    lo = 1 + r
    hi_row = h - 1 - r
    hi_col = w - 1 - r
    for i in range(h):
        if lo <= i < hi_row:
            for j in range(lo, hi_col):
                sxx = axx[j]
                sxy = axy[j]
                syy = ayy[j]
                half = 0.5 * (sxx + syy)
                diff = 0.5 * (sxx - syy)
                lam = half - np.sqrt(diff * diff + sxy * sxy)
                if lam > 0.0:
                    score[i, j] = lam
        iin = i + r + 1
        if iin < h:
            for j in range(w):
                axx[j] += hxx[iin, j]
                axy[j] += hxy[iin, j]
                ayy[j] += hyy[iin, j]
        iout = i - r
        if iout >= 0:
            for j in range(w):
                axx[j] -= hxx[iout, j]
                axy[j] -= hxy[iout, j]
                ayy[j] -= hyy[iout, j]
    return score


def corner_score_map(gray: np.ndarray, block_size: int = 3) -> np.ndarray:
    """Per-pixel min-eigenvalue response of the structure tensor (3x3 Sobel
    gradients) summed over a block_size window.

    Pixels whose window does not fit inside the gradient-valid interior get
    score 0, so the map is defined everywhere and non-negative.
    """
    g = np.ascontiguousarray(gray, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("expected a 2D grayscale image")
    if min(g.shape) < block_size:
        raise ValueError("image too small")
    return _score_kernel(g, block_size // 2)


@njit(cache=True)
def _greedy_suppress(rows, cols, min_dist, max_points, height, width):
    """Strongest-first selection keeping candidates >= min_dist apart.

    rows/cols must already be ordered by descending score (ties: row, col).
    Returns indices into that order of the kept candidates.
    """
    n = rows.shape[0]
    out = np.empty(max_points, dtype=np.int64)
    if min_dist <= 0.0:
        k = min(n, max_points)
        for i in range(k):
            out[i] = i
        return out[:k]

    cell = min_dist
    gw = int(width / cell) + 2
    gh = int(height / cell) + 2
    head = np.full(gw * gh, -1, dtype=np.int64)
    nxt = np.full(max_points, -1, dtype=np.int64)
    kr = np.empty(max_points)
    kc = np.empty(max_points)
    md2 = min_dist * min_dist
    kept = 0
    for i in range(n):
        r = rows[i]
        c = cols[i]
        ci = int(r / cell)
        cj = int(c / cell)
        ok = True
        for di in range(-1, 2):
            ni = ci + di
            if ni < 0 or ni >= gh:
                continue
            for dj in range(-1, 2):
                nj = cj + dj
                if nj < 0 or nj >= gw:
                    continue
                j = head[ni * gw + nj]
                while j >= 0:
                    dr = kr[j] - r
                    dc = kc[j] - c
                    if dr * dr + dc * dc < md2:
                        ok = False
                        break
                    j = nxt[j]
                if not ok:
                    break
            if not ok:
                break
        if ok:
            kr[kept] = r
            kc[kept] = c
            slot = ci * gw + cj
            nxt[kept] = head[slot]
            head[slot] = kept
            out[kept] = i
            kept += 1
            if kept >= max_points:
                break
    return out[:kept]


def detect_features(gray: np.ndarray, params: SamplingParams,
                    mask: np.ndarray | None = None) -> np.ndarray:
    """Detect up to max_points corner features.

    Returns an (k, 2) array of (u, v) pixel coordinates sorted by descending
    score (ties broken by lower row, then lower column).  A pixel is eligible
    when its score is positive, reaches quality_level times the map-wide
    maximum score, lies outside the border margin and is not masked out
    (mask True = eligible).  Kept features are pairwise >= min_distance
    apart; suppression is greedy, strongest first.
    """
    g = np.asarray(gray, dtype=np.float64)
    score = corner_score_map(g, params.block_size)
    h, w = score.shape
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != score.shape:
            raise ValueError("mask dimensions do not match image")

    # threshold is relative to the map-wide maximum, independent of the mask
    threshold = params.quality_level * float(score.max())
    eligible = (score > 0.0) & (score >= threshold)
    m = params.border_margin
    if m > 0:
        eligible[:m, :] = False
        eligible[h - m:, :] = False
        eligible[:, :m] = False
        eligible[:, w - m:] = False
    if mask is not None:
        eligible &= mask

    rows, cols = np.nonzero(eligible)
    if rows.size == 0:
        return np.empty((0, 2), dtype=np.float64)
    s = score[rows, cols]
    order = np.lexsort((cols, rows, -s))
    rows = rows[order].astype(np.float64)
    cols = cols[order].astype(np.float64)
    kept = _greedy_suppress(rows, cols, float(params.min_distance),
                            int(params.max_points), h, w)
    return np.stack([cols[kept], rows[kept]], axis=-1)
