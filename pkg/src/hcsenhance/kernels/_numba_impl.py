"""Numba-jitted twins of the kernels in ``_numpy_impl``.

Loop bodies mirror the numpy implementations operation by operation so both
backends agree to float rounding; the cross-backend tests pin this down.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _fold(i: int, n: int) -> int:
    # edge-inclusive mirror, period 2n
    m = i % (2 * n)
    if m < 0:
        m += 2 * n
    if m >= n:
        m = 2 * n - 1 - m
    return m


@njit(cache=True)
def _fold_table(n, radius, ntaps):
    # source index for output position c and tap j is table[c + j]
    table = np.empty(n + ntaps - 1, dtype=np.int64)
    for i in range(table.size):
        table[i] = _fold(i - radius, n)
    return table


@njit(cache=True)
def _separable_convolve(img, taps):
    h, w = img.shape
    ntaps = taps.size
    radius = ntaps // 2
    cols = _fold_table(w, radius, ntaps)
    rows = _fold_table(h, radius, ntaps)
    tmp = np.zeros((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            s = 0.0
            for j in range(ntaps):
                s += taps[j] * img[r, cols[c + j]]
            tmp[r, c] = s
    out = np.zeros((h, w), dtype=np.float64)
    for c in range(w):
        for r in range(h):
            s = 0.0
            for j in range(ntaps):
                s += taps[j] * tmp[rows[r + j], c]
            out[r, c] = s
    return out


def separable_convolve(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return _separable_convolve(np.ascontiguousarray(img, dtype=np.float64),
                               np.ascontiguousarray(taps, dtype=np.float64))


@njit(cache=True)
def _sobel_magnitude(img):
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for r in range(h):
        rm = _fold(r - 1, h)
        rp = _fold(r + 1, h)
        for c in range(w):
            cm = _fold(c - 1, w)
            cp = _fold(c + 1, w)
            gx = (img[rm, cp] + 2.0 * img[r, cp] + img[rp, cp]) \
                - (img[rm, cm] + 2.0 * img[r, cm] + img[rp, cm])
            gy = (img[rp, cm] + 2.0 * img[rp, c] + img[rp, cp]) \
                - (img[rm, cm] + 2.0 * img[rm, c] + img[rm, cp])
            out[r, c] = np.sqrt(gx * gx + gy * gy)
    return out


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    return _sobel_magnitude(np.ascontiguousarray(img, dtype=np.float64))


@njit(cache=True)
def _bilinear_resize(img, out_h, out_w):
    h, w = img.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for r in range(out_h):
        ys = (r + 0.5) * (h / out_h) - 0.5
        fy = np.floor(ys)
        wy = ys - fy
        y0 = min(max(int(fy), 0), h - 1)
        y1 = min(max(int(fy) + 1, 0), h - 1)
        for c in range(out_w):
            xs = (c + 0.5) * (w / out_w) - 0.5
            fx = np.floor(xs)
            wx = xs - fx
            x0 = min(max(int(fx), 0), w - 1)
            x1 = min(max(int(fx) + 1, 0), w - 1)
            top = (1.0 - wx) * img[y0, x0] + wx * img[y0, x1]
            bot = (1.0 - wx) * img[y1, x0] + wx * img[y1, x1]
            out[r, c] = (1.0 - wy) * top + wy * bot
    return out


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    return _bilinear_resize(np.ascontiguousarray(img, dtype=np.float64),
                            out_h, out_w)


@njit(cache=True)
def _within_distance(mask, radius):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    r2 = radius * radius
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy in range(-radius, radius + 1):
                yy = y + dy
                if yy < 0 or yy >= h:
                    continue
                for dx in range(-radius, radius + 1):
                    xx = x + dx
                    if xx < 0 or xx >= w:
                        continue
                    if dy * dy + dx * dx <= r2:
                        out[yy, xx] = True
    return out


def within_distance(mask: np.ndarray, radius: int) -> np.ndarray:
    return _within_distance(np.ascontiguousarray(mask, dtype=np.bool_),
                            int(radius))
