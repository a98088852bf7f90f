"""Shared builders for test fixtures: random patches and on-disk datasets."""

import numpy as np

from hcsenhance.patches import (DatasetManifest, ImagePatch, PatchMeta,
                                save_patch, write_manifest)


def random_patch(rng, side=84, image_id="img", cell_index=0, well="",
                 compound="", concentration="", mechanism=""):
    meta = PatchMeta(image_id, cell_index, well, compound, concentration,
                     mechanism)
    nucleus = rng.integers(0, 256, (side, side)).astype(np.uint8)
    tubule = rng.integers(0, 256, (side, side)).astype(np.uint8)
    return ImagePatch(nucleus, tubule, meta)


def write_dataset(root, patches, split="train", degradation_case=""):
    """Save patches under root and return the written manifest."""
    entries = [save_patch(root, p, split, degradation_case) for p in patches]
    size = patches[0].size_px if patches else 0
    manifest = DatasetManifest(root, entries, size)
    write_manifest(manifest)
    return manifest


def mirror_index(i, n):
    """Reference edge-inclusive mirror fold, written as plain recursion."""
    while not 0 <= i < n:
        if i < 0:
            i = -1 - i
        else:
            i = 2 * n - 1 - i
    return i
