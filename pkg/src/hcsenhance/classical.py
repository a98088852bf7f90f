"""Non-learned baselines: iterative deconvolution and edge segmentation."""

from pathlib import Path

import numpy as np

from . import imaging
from .errors import DataError
from .patches import (DatasetManifest, ImagePatch, load_patch, save_patch,
                      write_manifest)

# floor added to the denominator of the multiplicative update
RL_EPS = 1e-12
RL_DEFAULT_ITERATIONS = 30


def richardson_lucy(img: np.ndarray, psf_sigma: float,
                    iterations: int = RL_DEFAULT_ITERATIONS) -> np.ndarray:
    """Deconvolve with a Gaussian point spread function.

    The multiplicative update x <- x * K(y / (K x)) starts from x = y;
    the Gaussian kernel is symmetric so K doubles as its own adjoint.
    Non-negative input stays non-negative and total flux is conserved up
    to boundary effects.
    """
    y = imaging.as_float(img)
    if y.min() < 0:
        raise ValueError("deconvolution input must be non-negative")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    x = y.copy()
    for _ in range(iterations):
        blurred = imaging.gaussian_convolve(x, psf_sigma)
        ratio = y / (blurred + RL_EPS)
        x = x * imaging.gaussian_convolve(ratio, psf_sigma)
    return x


def sobel_otsu_segment(img: np.ndarray) -> np.ndarray:
    """Edge-based foreground mask: Sobel magnitude thresholded by its own
    histogram split. Degenerate (e.g. constant) images raise."""
    magnitude = imaging.sobel_magnitude(imaging.as_float(img))
    level = imaging.otsu_threshold(magnitude)
    return magnitude > level


def richardson_lucy_manifest(manifest: DatasetManifest, out_dir: Path,
                             psf_sigma: float = 1.0,
                             iterations: int = RL_DEFAULT_ITERATIONS,
                             split: str | None = None) -> DatasetManifest:
    """Deconvolve the tubule channel of every patch in a dataset.

    The nucleus channel passes through unchanged; only the tubule stain
    carries the structures this baseline tries to recover. Writes a new
    dataset + manifest under out_dir.
    """
    sub = manifest if split is None else manifest.filter_split(split)
    if not sub.entries:
        raise DataError("no patches to restore")
    out_dir = Path(out_dir)
    entries = []
    for entry in sub.entries:
        patch = load_patch(sub.root, entry)
        restored = ImagePatch(
            nucleus=patch.nucleus,
            tubule=imaging.to_uint8(
                richardson_lucy(patch.tubule, psf_sigma, iterations)),
            meta=patch.meta,
        )
        entries.append(save_patch(out_dir, restored, entry.split,
                                  entry.degradation_case))
    out = DatasetManifest(out_dir, entries, sub.patch_size)
    write_manifest(out)
    return out
