"""Patch loading and augmentation for model training and inference.

Images enter the models as float32 tensors in [-1, 1] with channel 0 the
nucleus and channel 1 the tubule stain. Augmentation is resize followed by
a random crop whose window is shared across both channels (and across both
members of a pair, for paired training).
"""

import numpy as np

from .. import imaging
from ..errors import DataError
from ..patches import DatasetManifest, ImagePatch, load_patch

NUCLEUS, TUBULE = 0, 1  # channel order in stacked tensors


def normalize(img: np.ndarray) -> np.ndarray:
    """Map a 0..255 image to float32 in [-1, 1]."""
    return (np.asarray(img, dtype=np.float32) / 127.5) - 1.0


def denormalize(img: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] image back to float 0..255 (not yet binned)."""
    return (np.asarray(img, dtype=np.float64) + 1.0) * 127.5


def to_array(patch: ImagePatch) -> np.ndarray:
    """Stack a patch into a (2, side, side) float32 array in [-1, 1]."""
    return np.stack([normalize(patch.nucleus), normalize(patch.tubule)])


def crop_window(side: int, crop: int, rng) -> tuple:
    """Pick the top-left corner of a crop window.

    A crop equal to the full side is deterministic and consumes no
    randomness; otherwise one (row, col) pair is drawn.
    """
    if crop > side:
        raise ValueError(f"crop {crop} exceeds image side {side}")
    if crop == side:
        return (0, 0)
    off = rng.integers(0, side - crop + 1, size=2)
    return (int(off[0]), int(off[1]))


def _resize_patch(patch: ImagePatch, side: int) -> ImagePatch:
    if patch.size_px == side:
        return patch
    return ImagePatch(
        nucleus=imaging.resize(patch.nucleus, side, side),
        tubule=imaging.resize(patch.tubule, side, side),
        meta=patch.meta,
    )


def _crop_patch(patch: ImagePatch, window: tuple, crop: int) -> ImagePatch:
    r, c = window
    return ImagePatch(
        nucleus=np.ascontiguousarray(patch.nucleus[r:r + crop, c:c + crop]),
        tubule=np.ascontiguousarray(patch.tubule[r:r + crop, c:c + crop]),
        meta=patch.meta,
    )


def _normalize_patch(patch: ImagePatch) -> ImagePatch:
    return ImagePatch(normalize(patch.nucleus), normalize(patch.tubule),
                      patch.meta)


def augment(patch: ImagePatch, target_side: int, crop: int,
            rng) -> ImagePatch:
    """Resize to target_side, random-crop both channels together, and map
    intensities from 0..255 to [-1, 1]."""
    resized = _resize_patch(patch, target_side)
    window = crop_window(target_side, crop, rng)
    return _normalize_patch(_crop_patch(resized, window, crop))


def augment_pair(patch_x: ImagePatch, patch_y: ImagePatch, target_side: int,
                 crop: int, rng) -> tuple:
    """Augment a paired example with one shared crop window."""
    rx = _resize_patch(patch_x, target_side)
    ry = _resize_patch(patch_y, target_side)
    window = crop_window(target_side, crop, rng)
    return (_normalize_patch(_crop_patch(rx, window, crop)),
            _normalize_patch(_crop_patch(ry, window, crop)))


def stack_augmented(patch: ImagePatch) -> np.ndarray:
    """Stack an already normalized patch into a (2, side, side) array."""
    return np.stack([np.asarray(patch.nucleus, dtype=np.float32),
                     np.asarray(patch.tubule, dtype=np.float32)])


def load_domain(manifest: DatasetManifest, split: str | None = None) -> list:
    """Load every patch of a manifest (optionally one split) into memory.

    Returned patches are ordered by (source_image_id, cell_index) so that
    training data order depends only on the manifest contents.
    """
    sub = manifest if split is None else manifest.filter_split(split)
    patches = [load_patch(sub.root, e) for e in sub.entries]
    if not patches:
        raise DataError(
            "no patches to load"
            + (f" in split {split!r}" if split is not None else ""))
    return patches
