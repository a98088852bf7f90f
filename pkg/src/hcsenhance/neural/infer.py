"""Inference: apply a trained generator to patches and whole datasets."""

from pathlib import Path

import numpy as np
import torch

from .. import imaging
from ..errors import DataError
from ..patches import (DatasetManifest, ImagePatch, load_patch, save_patch,
                       write_manifest)
from . import data
from .train import config_from_dict, load_checkpoint
from .networks import build_generator


def load_generator(ckpt_path: Path, direction: str = "ab"):
    """Rebuild the requested generator from a checkpoint, in eval mode.

    ``direction`` picks a generator from an unpaired checkpoint ("ab" maps
    source to target). Paired checkpoints hold a single generator and
    ignore the argument. Returns (module, config).
    """
    payload = load_checkpoint(ckpt_path)
    cfg = config_from_dict(payload["config"])
    if payload["kind"] == "cyclegan":
        if direction not in ("ab", "ba"):
            raise ValueError(f"direction must be 'ab' or 'ba', got "
                             f"{direction!r}")
        state = payload["modules"]["g_" + direction]
    elif payload["kind"] == "pix2pix":
        state = payload["modules"]["gen"]
    else:
        raise DataError(f"checkpoint kind {payload['kind']!r} has no "
                        "generator")
    gen = build_generator(cfg.generator)
    gen.load_state_dict(state)
    gen.eval()
    return gen, cfg


def enhance(patch: ImagePatch, gen, target_side: int = 128) -> ImagePatch:
    """Run one patch through a generator; returns a uint8 patch.

    The patch is resized to the generator's training resolution, mapped to
    [-1, 1], translated, mapped back, and binned to uint8. Deterministic:
    no randomness is involved.
    """
    resized = ImagePatch(
        nucleus=imaging.resize(patch.nucleus, target_side, target_side),
        tubule=imaging.resize(patch.tubule, target_side, target_side),
        meta=patch.meta,
    ) if patch.size_px != target_side else patch
    x = torch.from_numpy(data.to_array(resized)[None])
    with torch.no_grad():
        y = gen(x)[0].numpy()
    return ImagePatch(
        nucleus=imaging.to_uint8(data.denormalize(y[data.NUCLEUS])),
        tubule=imaging.to_uint8(data.denormalize(y[data.TUBULE])),
        meta=patch.meta,
    )


def enhance_manifest(manifest: DatasetManifest, ckpt_path: Path,
                     out_dir: Path, direction: str = "ab",
                     split: str | None = None) -> DatasetManifest:
    """Translate every patch of a dataset; writes a new dataset + manifest."""
    gen, cfg = load_generator(ckpt_path, direction)
    sub = manifest if split is None else manifest.filter_split(split)
    if not sub.entries:
        raise DataError("no patches to enhance")
    out_dir = Path(out_dir)
    entries = []
    for entry in sub.entries:
        patch = load_patch(sub.root, entry)
        restored = enhance(patch, gen, cfg.target_side)
        entries.append(save_patch(out_dir, restored, entry.split,
                                  entry.degradation_case))
    out = DatasetManifest(out_dir, entries, cfg.target_side)
    write_manifest(out)
    return out
