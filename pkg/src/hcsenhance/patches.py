"""Single-cell patch containers and on-disk dataset format.

A patch is a pair of square, co-registered channel images (nucleus and
microtubule) plus acquisition metadata. On disk a dataset is a directory of
16-bit grayscale PNGs, two per patch (``<stem>_nucleus.png`` and
``<stem>_tubule.png``, storing 8-bit values losslessly), indexed by a
``manifest.csv`` with the header::

    patch_path,source_image_id,cell_index,well,compound,concentration,mechanism,split

Degraded datasets append a ``degradation_case`` column. Manifests are
written in sorted patch order with fixed newlines, so re-running ingestion
on identical inputs is byte-identical.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

MANIFEST_COLUMNS = ("patch_path", "source_image_id", "cell_index", "well",
                    "compound", "concentration", "mechanism", "split")
SPLITS = ("train", "val", "test", "none")
CHANNEL_SUFFIXES = {"nucleus": "_nucleus.png", "tubule": "_tubule.png"}


@dataclass
class PatchMeta:
    source_image_id: str
    cell_index: int
    well: str = ""
    compound: str = ""
    concentration: str = ""
    mechanism: str = ""


@dataclass
class ImagePatch:
    """Two-channel square intensity patch with metadata."""

    nucleus: np.ndarray
    tubule: np.ndarray
    meta: PatchMeta

    def __post_init__(self):
        nuc = np.asarray(self.nucleus)
        tub = np.asarray(self.tubule)
        if nuc.ndim != 2 or nuc.shape != tub.shape:
            raise DataError(
                f"patch channels must be identical 2-D shapes, got "
                f"{nuc.shape} vs {tub.shape}")
        if nuc.shape[0] != nuc.shape[1]:
            raise DataError(f"patches must be square, got {nuc.shape}")
        if not self.meta.source_image_id:
            raise DataError("patch metadata needs a non-empty source_image_id")

    @property
    def size_px(self) -> int:
        return self.nucleus.shape[0]

    @property
    def patch_id(self) -> str:
        return f"{self.meta.source_image_id}_c{self.meta.cell_index:04d}"


@dataclass
class ManifestEntry:
    patch_path: str  # path stem relative to the manifest directory
    meta: PatchMeta
    split: str = "none"
    degradation_case: str = ""

    @property
    def patch_id(self) -> str:
        return f"{self.meta.source_image_id}_c{self.meta.cell_index:04d}"


@dataclass
class DatasetManifest:
    root: Path
    entries: list = field(default_factory=list)
    patch_size: int = 0

    @property
    def split_tag(self) -> str:
        tags = {e.split for e in self.entries}
        return tags.pop() if len(tags) == 1 else "none"

    @property
    def has_degradation(self) -> bool:
        return any(e.degradation_case for e in self.entries)

    def filter_split(self, split: str) -> "DatasetManifest":
        picked = [e for e in self.entries if e.split == split]
        return DatasetManifest(self.root, picked, self.patch_size)

    def by_patch_id(self) -> dict:
        return {e.patch_id: e for e in self.entries}


def _write_channel(path: Path, channel: np.ndarray) -> None:
    data = np.asarray(channel)
    if data.dtype != np.uint8:
        raise DataError(f"patch channels must be uint8 before saving, "
                        f"got {data.dtype}")
    Image.fromarray(data.astype(np.uint16)).save(path, format="PNG")


def _read_channel(path: Path) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing patch file: {path}")
    data = np.asarray(Image.open(path))
    if data.ndim != 2:
        raise DataError(f"expected single-channel image in {path}")
    if data.max(initial=0) > 255:
        raise DataError(f"patch file {path} holds values above 255")
    return data.astype(np.uint8)


def save_patch(root: Path, patch: ImagePatch, split: str = "none",
               degradation_case: str = "") -> ManifestEntry:
    """Write both channels under ``root`` and return the manifest entry."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stem = patch.patch_id
    _write_channel(root / (stem + CHANNEL_SUFFIXES["nucleus"]), patch.nucleus)
    _write_channel(root / (stem + CHANNEL_SUFFIXES["tubule"]), patch.tubule)
    return ManifestEntry(stem, replace(patch.meta), split, degradation_case)


def load_patch(root: Path, entry: ManifestEntry) -> ImagePatch:
    root = Path(root)
    nucleus = _read_channel(root / (entry.patch_path + CHANNEL_SUFFIXES["nucleus"]))
    tubule = _read_channel(root / (entry.patch_path + CHANNEL_SUFFIXES["tubule"]))
    return ImagePatch(nucleus, tubule, replace(entry.meta))


def write_manifest(manifest: DatasetManifest) -> Path:
    """Write ``manifest.csv`` under the manifest root; returns its path."""
    root = Path(manifest.root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / "manifest.csv"
    columns = list(MANIFEST_COLUMNS)
    if manifest.has_degradation:
        columns.append("degradation_case")
    rows = sorted(manifest.entries,
                  key=lambda e: (e.meta.source_image_id, e.meta.cell_index))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for e in rows:
            row = [e.patch_path, e.meta.source_image_id, str(e.meta.cell_index),
                   e.meta.well, e.meta.compound, e.meta.concentration,
                   e.meta.mechanism, e.split]
            if manifest.has_degradation:
                row.append(e.degradation_case)
            writer.writerow(row)
    return path


def load_manifest(root: Path, validate: bool = True) -> DatasetManifest:
    """Load ``manifest.csv`` from a dataset directory.

    With ``validate`` (default) every referenced file must exist and all
    patches must share one size.
    """
    root = Path(root)
    path = root / "manifest.csv"
    if not path.exists():
        raise DataError(f"no manifest.csv under {root}")
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"manifest {path} lacks columns: {sorted(missing)}")
        for row in reader:
            meta = PatchMeta(row["source_image_id"], int(row["cell_index"]),
                             row["well"], row["compound"],
                             row["concentration"], row["mechanism"])
            if row["split"] not in SPLITS:
                raise DataError(f"unknown split tag {row['split']!r} in {path}")
            entries.append(ManifestEntry(row["patch_path"], meta, row["split"],
                                         row.get("degradation_case", "") or ""))

    seen = set()
    for e in entries:
        key = (e.meta.source_image_id, e.meta.cell_index)
        if key in seen:
            raise DataError(f"duplicate patch identity {key} in {path}")
        seen.add(key)

    patch_size = 0
    if validate:
        sizes = set()
        for e in entries:
            for suffix in CHANNEL_SUFFIXES.values():
                f = root / (e.patch_path + suffix)
                if not f.exists():
                    raise DataError(f"manifest references missing file {f}")
            with Image.open(root / (e.patch_path + CHANNEL_SUFFIXES["nucleus"])) as im:
                sizes.add(im.size)
        if len(sizes) > 1:
            raise DataError(f"inconsistent patch sizes in {root}: {sorted(sizes)}")
        if sizes:
            patch_size = sizes.pop()[0]
    return DatasetManifest(root, entries, patch_size)
