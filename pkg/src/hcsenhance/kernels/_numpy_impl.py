"""Pure-numpy reference implementations of the hot image kernels.

Every function here has a numba twin in ``_numba_impl`` with identical
semantics; the twin is selected at import time by :mod:`hcsenhance.kernels`.
All kernels use an edge-inclusive mirror boundary (``abc -> cba|abc|cba``),
implemented by index folding so kernels wider than the image stay valid.
"""

import numpy as np


def fold_indices(n: int, radius: int) -> np.ndarray:
    """Mirror-folded indices covering [-radius, n + radius)."""
    idx = np.arange(-radius, n + radius)
    m = np.mod(idx, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def separable_convolve(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Convolve with a symmetric 1-D kernel along rows, then columns."""
    taps = np.asarray(taps, dtype=np.float64)
    ntaps = taps.size
    radius = ntaps // 2

    out = np.asarray(img, dtype=np.float64)
    for axis in (1, 0):
        n = out.shape[axis]
        idx = fold_indices(n, radius)
        padded = out[:, idx] if axis == 1 else out[idx, :]
        acc = np.zeros_like(out)
        for j in range(ntaps):
            if axis == 1:
                acc += taps[j] * padded[:, j:j + n]
            else:
                acc += taps[j] * padded[j:j + n, :]
        out = acc
    return out


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    p = img[fold_indices(h, 1), :][:, fold_indices(w, 1)]
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) \
        - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) \
        - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    return np.sqrt(gx * gx + gy * gy)


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers and edge clamping."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    fy = np.floor(ys)
    fx = np.floor(xs)
    wy = (ys - fy)[:, None]
    wx = (xs - fx)[None, :]
    y0 = np.clip(fy.astype(np.int64), 0, h - 1)
    y1 = np.clip(fy.astype(np.int64) + 1, 0, h - 1)
    x0 = np.clip(fx.astype(np.int64), 0, w - 1)
    x1 = np.clip(fx.astype(np.int64) + 1, 0, w - 1)
    top = (1.0 - wx) * img[np.ix_(y0, x0)] + wx * img[np.ix_(y0, x1)]
    bot = (1.0 - wx) * img[np.ix_(y1, x0)] + wx * img[np.ix_(y1, x1)]
    return (1.0 - wy) * top + wy * bot


def within_distance(mask: np.ndarray, radius: int) -> np.ndarray:
    """Pixels whose Euclidean distance to any true pixel is <= radius."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    out = np.zeros((h, w), dtype=bool)
    r2 = radius * radius
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy * dy + dx * dx > r2:
                continue
            src_y0, src_y1 = max(0, -dy), min(h, h - dy)
            src_x0, src_x1 = max(0, -dx), min(w, w - dx)
            if src_y0 >= src_y1 or src_x0 >= src_x1:
                continue
            out[src_y0 + dy:src_y1 + dy, src_x0 + dx:src_x1 + dx] |= \
                mask[src_y0:src_y1, src_x0:src_x1]
    return out
