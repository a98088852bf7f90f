"""Deterministic 2-D image primitives used by every pipeline stage.

Images are plain numpy arrays: float64 for working data, uint8 for stored
8-bit data. All neighbourhood operations use an edge-inclusive mirror
boundary (see :mod:`hcsenhance.kernels`), chosen to avoid dark halos at
patch borders that would bias downstream thresholds.
"""

import math

import numpy as np

from . import kernels
from .errors import DegenerateImageError


def as_float(img: np.ndarray) -> np.ndarray:
    """Validate a 2-D image and return it as float64."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {img.shape}")
    return np.ascontiguousarray(img, dtype=np.float64)


def gaussian_kernel1d(sigma: float, radius: int | None = None) -> np.ndarray:
    """Discretized, unit-sum 1-D Gaussian.

    Parameters
    ----------
    sigma : float
        Bandwidth in pixels, > 0.
    radius : int, optional
        Truncation radius; defaults to ceil(4 * sigma), which keeps the
        discarded tail mass below 1e-4.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if radius is None:
        radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def gaussian_kernel2d(sigma: float, radius: int | None = None) -> np.ndarray:
    """2-D Gaussian kernel as the outer product of the 1-D taps."""
    taps = gaussian_kernel1d(sigma, radius)
    return np.outer(taps, taps)


def gaussian_convolve(img: np.ndarray, sigma: float) -> np.ndarray:
    """Blur with a unit-sum Gaussian kernel of the given bandwidth.

    Separable implementation; mirror boundary. Total intensity of signals
    supported away from the border is preserved to float accuracy.
    """
    img = as_float(img)
    taps = gaussian_kernel1d(sigma)
    return kernels.separable_convolve(img, taps)


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude from the standard 3x3 Sobel pair."""
    return kernels.sobel_magnitude(as_float(img))


def resize(img: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resize with half-pixel sample centers.

    Interpolation is convex, so the output range never exceeds the input
    range. Resizing to the identical shape returns the pixels unchanged.
    """
    if out_height < 1 or out_width < 1:
        raise ValueError(
            f"target dimensions must be >= 1, got {out_height}x{out_width}")
    return kernels.bilinear_resize(as_float(img), int(out_height), int(out_width))


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clip to [0, 255] and round half to even into an 8-bit image."""
    img = as_float(img)
    return np.clip(np.rint(img), 0.0, 255.0).astype(np.uint8)


def _otsu_split(hist: np.ndarray, values: np.ndarray) -> int:
    """Index k maximizing between-class variance for the split (<=k, >k).

    First maximum wins, i.e. ties resolve to the smallest threshold.
    """
    weights = hist.astype(np.float64) / hist.sum()
    mu = values * weights
    omega0 = np.cumsum(weights)[:-1]
    mu0 = np.cumsum(mu)[:-1]
    mu_total = mu.sum()
    omega1 = 1.0 - omega0
    valid = (omega0 > 0.0) & (omega1 > 0.0)
    sigma_b = np.zeros(values.size - 1)
    diff = mu_total * omega0 - mu0
    sigma_b[valid] = diff[valid] ** 2 / (omega0[valid] * omega1[valid])
    return int(np.argmax(sigma_b))


def otsu_threshold(img: np.ndarray) -> float:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    uint8 images use the native integer histogram (one bin per level), so
    the result is an integer level. Float images are binned over
    [min, max] and the returned threshold is the upper edge of the winning
    bin. The binarization rule is ``pixel > threshold`` in both cases.
    """
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")

    if img.dtype == np.uint8:
        hist = np.bincount(img.ravel(), minlength=256)
        if np.count_nonzero(hist) < 2:
            raise DegenerateImageError(
                "otsu_threshold requires at least two distinct values")
        k = _otsu_split(hist, np.arange(256, dtype=np.float64))
        return float(k)

    data = as_float(img)
    lo = float(data.min())
    hi = float(data.max())
    if not hi > lo:
        raise DegenerateImageError(
            "otsu_threshold requires at least two distinct values")
    width = (hi - lo) / 256.0
    bins = np.clip(((data - lo) / width).astype(np.int64), 0, 255)
    hist = np.bincount(bins.ravel(), minlength=256)
    centers = lo + (np.arange(256, dtype=np.float64) + 0.5) * width
    k = _otsu_split(hist, centers)
    return float(lo + (k + 1) * width)
