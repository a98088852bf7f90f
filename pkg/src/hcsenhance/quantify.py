"""Downstream phenotype readout: perinuclear microtubule density.

A patch is segmented channel-wise by histogram thresholding; the readout
is the fraction of segmented tubule pixels inside the ring of points
within ``radius_px`` (Euclidean) of the nucleus but outside the nucleus
itself. Per-cell densities aggregate into dose-response tables against an
untreated baseline.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imaging
from .errors import DataError, DegenerateImageError
from .kernels import within_distance
from .patches import DatasetManifest, ImagePatch, load_patch
from .rng import substream

log = logging.getLogger(__name__)

PERINUCLEAR_RADIUS_PX = 8

DENSITY_COLUMNS = ("patch_id", "compound", "concentration", "mechanism",
                   "ring_px", "seg_px", "density")


@dataclass
class DensityRecord:
    patch_id: str
    compound: str
    concentration: str
    mechanism: str
    perinuclear_area_px: int
    segmented_px: int
    density: float

    def __post_init__(self):
        if self.perinuclear_area_px <= 0:
            raise ValueError("perinuclear area must be positive")
        expected = self.segmented_px / self.perinuclear_area_px
        if abs(self.density - expected) > 1e-9:
            raise ValueError("density does not equal seg_px / ring_px")


def segment_microtubules(patch: ImagePatch) -> np.ndarray:
    """Boolean tubule mask from the patch's own intensity histogram."""
    tubule = imaging.as_float(patch.tubule)
    return tubule > imaging.otsu_threshold(tubule)


def segment_nucleus(patch: ImagePatch) -> np.ndarray:
    nucleus = imaging.as_float(patch.nucleus)
    return nucleus > imaging.otsu_threshold(nucleus)


def perinuclear_density(tubule_mask: np.ndarray, nucleus_mask: np.ndarray,
                        radius_px: int = PERINUCLEAR_RADIUS_PX) -> tuple:
    """(ring_px, seg_px, density) for one pair of masks.

    The ring is every pixel within Euclidean distance radius_px of any
    nucleus pixel, minus the nucleus; it is clipped at patch edges.
    """
    tub = np.asarray(tubule_mask, dtype=bool)
    nuc = np.asarray(nucleus_mask, dtype=bool)
    if tub.shape != nuc.shape:
        raise DataError(f"mask shapes differ: {tub.shape} vs {nuc.shape}")
    if not nuc.any():
        raise DegenerateImageError("empty nucleus mask")
    ring = within_distance(nuc, radius_px) & ~nuc
    ring_px = int(ring.sum())
    if ring_px == 0:
        raise DegenerateImageError("nucleus fills the patch; ring is empty")
    seg_px = int((tub & ring).sum())
    return ring_px, seg_px, seg_px / ring_px


def density_record(patch: ImagePatch,
                   radius_px: int = PERINUCLEAR_RADIUS_PX) -> DensityRecord:
    """Segment both channels of a patch and compute its density."""
    ring_px, seg_px, density = perinuclear_density(
        segment_microtubules(patch), segment_nucleus(patch), radius_px)
    return DensityRecord(patch.patch_id, patch.meta.compound,
                         patch.meta.concentration, patch.meta.mechanism,
                         ring_px, seg_px, density)


def compute_densities(manifest: DatasetManifest,
                      radius_px: int = PERINUCLEAR_RADIUS_PX,
                      split: str | None = None,
                      skip_degenerate: bool = True) -> list:
    """Density records for a dataset, ordered by patch id.

    Patches whose segmentation degenerates (constant channel, empty
    nucleus) are skipped with a warning unless skip_degenerate is off.
    """
    sub = manifest if split is None else manifest.filter_split(split)
    records = []
    skipped = 0
    for entry in sorted(sub.entries, key=lambda e: e.patch_id):
        patch = load_patch(sub.root, entry)
        try:
            records.append(density_record(patch, radius_px))
        except DegenerateImageError:
            if not skip_degenerate:
                raise
            skipped += 1
    if skipped:
        log.warning("skipped %d degenerate patches during density "
                    "computation", skipped)
    if not records:
        raise DataError("no usable patches for density computation")
    return records


def write_density_csv(path: Path, records: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DENSITY_COLUMNS)
        for r in records:
            writer.writerow([r.patch_id, r.compound, r.concentration,
                             r.mechanism, r.perinuclear_area_px,
                             r.segmented_px, f"{r.density:.6f}"])
    return path


def read_density_csv(path: Path) -> list:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no density table at {path}")
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(DENSITY_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"density table {path} lacks columns: "
                            f"{sorted(missing)}")
        for row in reader:
            ring_px = int(row["ring_px"])
            seg_px = int(row["seg_px"])
            if ring_px <= 0:
                raise DataError(f"{path}: non-positive ring size for "
                                f"{row['patch_id']}")
            # stored density is rounded; rebuild the exact ratio
            exact = seg_px / ring_px
            if abs(float(row["density"]) - exact) > 1e-6:
                raise DataError(f"{path}: density column disagrees with "
                                f"seg_px/ring_px for {row['patch_id']}")
            records.append(DensityRecord(
                row["patch_id"], row["compound"], row["concentration"],
                row["mechanism"], ring_px, seg_px, exact))
    return records


def _concentration_key(value: str):
    try:
        return (0, float(value))
    except ValueError:
        return (1, value)


def _sample_mean(records: list, n: int, rng, label: str) -> tuple:
    """Mean density over a seeded sample without replacement."""
    ordered = sorted(records, key=lambda r: r.patch_id)
    if len(ordered) < n:
        log.warning("%s has %d records, fewer than the requested %d; "
                    "using all", label, len(ordered), n)
        picked = ordered
    else:
        idx = rng.choice(len(ordered), size=n, replace=False)
        picked = [ordered[i] for i in sorted(idx)]
    return float(np.mean([r.density for r in picked])), len(picked)


def dose_response(records: list, baseline_records: list, seed: int,
                  per_combo_n: int = 200, baseline_n: int = 1000,
                  combos: list | None = None) -> list:
    """Mean density per (compound, concentration) with untreated baseline.

    Each combination contributes the mean over a seeded random sample of
    per_combo_n of its records; the baseline is an equally seeded sample
    of baseline_n untreated records. Returns rows as dicts with keys
    compound, concentration, mechanism, n, mean_density, baseline_mean,
    baseline_n. ``combos`` optionally declares the expected combinations;
    a declared combination with no records is an error.
    """
    if not records or not baseline_records:
        raise DataError("dose response needs treated and baseline records")
    by_combo = {}
    for r in records:
        by_combo.setdefault((r.compound, r.concentration), []).append(r)
    if combos is not None:
        missing = [c for c in combos if tuple(c) not in by_combo]
        if missing:
            raise DataError(f"no records for declared combinations: "
                            f"{missing}")
        keys = [tuple(c) for c in combos]
    else:
        keys = sorted(by_combo,
                      key=lambda c: (c[0], _concentration_key(c[1])))

    baseline_rng = substream(seed, "quantify", "baseline")
    baseline_mean, baseline_used = _sample_mean(
        baseline_records, baseline_n, baseline_rng, "untreated baseline")

    rows = []
    for compound, concentration in keys:
        combo_records = by_combo[(compound, concentration)]
        rng = substream(seed, "quantify", compound, concentration)
        mean, used = _sample_mean(combo_records, per_combo_n, rng,
                                  f"{compound} @ {concentration}")
        mechanisms = {r.mechanism for r in combo_records}
        rows.append({
            "compound": compound,
            "concentration": concentration,
            "mechanism": sorted(mechanisms)[0] if mechanisms else "",
            "n": used,
            "mean_density": mean,
            "baseline_mean": baseline_mean,
            "baseline_n": baseline_used,
        })
    return rows


def write_dose_response_csv(path: Path, rows: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["compound", "concentration", "mechanism", "n",
                         "mean_density", "baseline_mean", "baseline_n"])
        for row in rows:
            writer.writerow([row["compound"], row["concentration"],
                             row["mechanism"], row["n"],
                             f"{row['mean_density']:.6f}",
                             f"{row['baseline_mean']:.6f}",
                             row["baseline_n"]])
    return path


def plot_dose_response(rows: list, out_dir: Path) -> list:
    """One PNG per mechanism: density vs concentration (log axis when the
    concentrations parse as positive numbers), untreated baseline dashed."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_mechanism = {}
    for row in rows:
        by_mechanism.setdefault(row["mechanism"] or "unspecified",
                                []).append(row)
    written = []
    for mechanism, group in sorted(by_mechanism.items()):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        by_compound = {}
        for row in group:
            by_compound.setdefault(row["compound"], []).append(row)
        numeric = True
        for compound, crows in sorted(by_compound.items()):
            crows = sorted(crows,
                           key=lambda r: _concentration_key(
                               r["concentration"]))
            xs = []
            for r in crows:
                try:
                    xs.append(float(r["concentration"]))
                except ValueError:
                    numeric = False
                    xs.append(len(xs))
            ys = [r["mean_density"] for r in crows]
            ax.plot(xs, ys, marker="o", label=compound)
        if numeric and all(x > 0 for line in ax.get_lines()
                           for x in line.get_xdata()):
            ax.set_xscale("log")
        baseline = group[0]["baseline_mean"]
        ax.axhline(baseline, linestyle="--", color="gray",
                   label="untreated")
        ax.set_xlabel("concentration")
        ax.set_ylabel("perinuclear density")
        ax.set_title(mechanism)
        ax.legend(fontsize=7)
        fig.tight_layout()
        safe = "".join(c if c.isalnum() or c in "-_" else "_"
                       for c in mechanism)
        path = out_dir / f"dose_response_{safe}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
