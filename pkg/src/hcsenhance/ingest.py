"""Build single-cell patch datasets from raw two-channel images.

Nuclei are segmented from the nucleus channel (Otsu threshold, 8-connected
components above a minimum area), and fixed-size patches are cropped around
each nucleus centroid. Patches that would extend past the image boundary
are dropped. Splits are assigned per raw image so that patches from one
field of view never straddle train/val/test.
"""

import csv
import logging
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import imaging
from .errors import DataError, DegenerateImageError
from .patches import (DatasetManifest, ImagePatch, PatchMeta, load_manifest,
                      save_patch, write_manifest)
from .rng import substream

log = logging.getLogger(__name__)

MIN_NUCLEUS_AREA = 50  # px, suppresses post-threshold speckle
_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def segment_nuclei(nucleus_img: np.ndarray, min_area: int = MIN_NUCLEUS_AREA):
    """Centroids (row, col) of nucleus components above the area floor.

    Returns an empty list when no nucleus is found, including the
    degenerate constant-image case.
    """
    try:
        threshold = imaging.otsu_threshold(np.asarray(nucleus_img))
    except DegenerateImageError:
        return []
    mask = np.asarray(nucleus_img) > threshold
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    centroids = []
    for index in range(1, count + 1):
        rows, cols = np.nonzero(labels == index)
        if rows.size < min_area:
            continue
        # floor(x + 0.5) per axis keeps centroid rounding deterministic
        centroids.append((int(np.floor(rows.mean() + 0.5)),
                          int(np.floor(cols.mean() + 0.5))))
    centroids.sort()
    return centroids


def extract_patches(nucleus_img: np.ndarray, tubule_img: np.ndarray,
                    patch_size: int, source_image_id: str = "raw",
                    min_area: int = MIN_NUCLEUS_AREA,
                    meta_base: PatchMeta | None = None) -> list:
    """Crop patch_size x patch_size patches centered on nucleus centroids.

    Patches not falling entirely within the image are discarded. Channels
    are converted to 8-bit. Cell indices follow centroid (row, col) order.
    """
    nucleus_img = np.asarray(nucleus_img)
    tubule_img = np.asarray(tubule_img)
    if nucleus_img.shape != tubule_img.shape:
        raise DataError(f"channel shape mismatch: {nucleus_img.shape} vs "
                        f"{tubule_img.shape}")
    if patch_size < 16:
        raise ValueError(f"patch_size must be >= 16, got {patch_size}")

    height, width = nucleus_img.shape
    half = patch_size // 2
    patches = []
    for row, col in segment_nuclei(nucleus_img, min_area):
        top = row - half
        left = col - half
        if top < 0 or left < 0 or top + patch_size > height \
                or left + patch_size > width:
            continue
        window = (slice(top, top + patch_size), slice(left, left + patch_size))
        if meta_base is not None:
            meta = PatchMeta(source_image_id, len(patches), meta_base.well,
                             meta_base.compound, meta_base.concentration,
                             meta_base.mechanism)
        else:
            meta = PatchMeta(source_image_id, len(patches))
        patches.append(ImagePatch(imaging.to_uint8(nucleus_img[window]),
                                  imaging.to_uint8(tubule_img[window]), meta))
    return patches


def split_dataset(raw_image_ids, ratios, seed: int) -> dict:
    """Deterministically partition raw image ids into train/val/test."""
    ids = list(raw_image_ids)
    if len(set(ids)) != len(ids):
        raise DataError("raw image ids must be unique")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")

    shuffled = sorted(ids)
    substream(seed, "split").shuffle(shuffled)
    n = len(shuffled)
    n_train = int(round(n * ratios[0]))
    n_val = min(int(round(n * ratios[1])), n - n_train)
    return {"train": sorted(shuffled[:n_train]),
            "val": sorted(shuffled[n_train:n_train + n_val]),
            "test": sorted(shuffled[n_train + n_val:])}


def nucleus_area_px(patch: ImagePatch) -> int | None:
    """Segmented nucleus area of one patch; None when segmentation fails."""
    try:
        threshold = imaging.otsu_threshold(patch.nucleus)
    except DegenerateImageError:
        return None
    area = int(np.count_nonzero(patch.nucleus > threshold))
    return area if area > 0 else None


def compute_magnification(nucleus_patches_a, nucleus_patches_b) -> float:
    """Scale factor between two domains from mean segmented nucleus areas.

    Returns sqrt(mean_area_a / mean_area_b); patches whose nucleus fails to
    segment are skipped.
    """
    means = []
    for patch_list in (nucleus_patches_a, nucleus_patches_b):
        if not patch_list:
            raise DataError("compute_magnification needs non-empty patch lists")
        areas = [a for a in (nucleus_area_px(p) for p in patch_list)
                 if a is not None]
        if not areas:
            raise DataError("all patches in one domain failed to segment")
        means.append(float(np.mean(areas)))
    return float(np.sqrt(means[0] / means[1]))


def read_raw_image(path: Path) -> np.ndarray:
    """Load a single-channel raw image (PNG/TIFF) as a 2-D array."""
    with Image.open(path) as im:
        data = np.asarray(im)
    if data.ndim == 3:  # collapse accidental RGB duplicates
        data = data[..., 0]
    return data


def read_image_metadata(input_dir: Path) -> dict:
    """Optional per-raw-image acquisition metadata from ``images.csv``.

    Columns: image_id, then any of well/compound/concentration/mechanism.
    Missing file means no metadata; patches then carry empty labels.
    """
    path = Path(input_dir) / "images.csv"
    if not path.exists():
        return {}
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if "image_id" not in (reader.fieldnames or ()):
            raise DataError(f"{path} needs an image_id column")
        for row in reader:
            table[row["image_id"]] = PatchMeta(
                row["image_id"], 0, row.get("well", "") or "",
                row.get("compound", "") or "",
                row.get("concentration", "") or "",
                row.get("mechanism", "") or "")
    return table


def ingest_directory(input_dir: Path, out_dir: Path, patch_size: int,
                     nucleus_suffix: str = "_nucleus",
                     tubule_suffix: str = "_tubule",
                     min_area: int = MIN_NUCLEUS_AREA) -> DatasetManifest:
    """Extract patches from every two-channel image pair in a directory.

    Pairs are matched as ``<id><nucleus_suffix>.<ext>`` /
    ``<id><tubule_suffix>.<ext>``; an ``images.csv`` sidecar, when
    present, attaches well/drug labels per image id. Images are processed
    in sorted id order, so the resulting manifest is reproducible byte
    for byte.
    """
    input_dir = Path(input_dir)
    metadata = read_image_metadata(input_dir)
    pairs = {}
    for f in sorted(input_dir.iterdir()):
        if not f.is_file() or f.suffix.lower() == ".csv":
            continue
        stem = f.stem
        if stem.endswith(nucleus_suffix):
            pairs.setdefault(stem[:-len(nucleus_suffix)], {})["nucleus"] = f
        elif stem.endswith(tubule_suffix):
            pairs.setdefault(stem[:-len(tubule_suffix)], {})["tubule"] = f
    if not pairs:
        raise DataError(f"no channel images found under {input_dir}")

    manifest = DatasetManifest(Path(out_dir), [], patch_size)
    for image_id in sorted(pairs):
        channels = pairs[image_id]
        if "nucleus" not in channels or "tubule" not in channels:
            raise DataError(f"raw image {image_id} is missing a channel file")
        extracted = extract_patches(read_raw_image(channels["nucleus"]),
                                    read_raw_image(channels["tubule"]),
                                    patch_size, source_image_id=image_id,
                                    min_area=min_area,
                                    meta_base=metadata.get(image_id))
        log.info("ingest: %s -> %d patches", image_id, len(extracted))
        for patch in extracted:
            manifest.entries.append(save_patch(manifest.root, patch))
    write_manifest(manifest)
    return manifest


def assign_splits(dataset_dir: Path, ratios, seed: int) -> DatasetManifest:
    """Assign per-raw-image splits to an existing dataset manifest."""
    manifest = load_manifest(dataset_dir)
    image_ids = sorted({e.meta.source_image_id for e in manifest.entries})
    assignment = split_dataset(image_ids, ratios, seed)
    lookup = {}
    for split, ids in assignment.items():
        for image_id in ids:
            lookup[image_id] = split
    for entry in manifest.entries:
        entry.split = lookup[entry.meta.source_image_id]
    write_manifest(manifest)
    return manifest
