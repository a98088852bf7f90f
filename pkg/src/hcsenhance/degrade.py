"""Parametric degradation of clean patches into simulated low-quality ones.

Three degradation families act on the tubule channel (g_s is a unit-sum
Gaussian of bandwidth s, e is per-pixel standard normal noise, s_n the
noise scale):

- blur:    g_fine * T + s_n * e
- bleed:   g_fine * T + p * (g_coarse * N) + s_n * e
- diffuse: (1 - p) * (g_fine * T) + p * (g_coarse * T) + s_n * e

where T and N are the tubule and nucleus channels. The mixing fraction p
is fixed or drawn per patch from a uniform range. The nucleus channel is
given the matching mild treatment (g_fine blur plus noise) so a degraded
patch stays consistently two-channel. Outputs are binned to uint8.

Draw order within one patch is fixed: p (only in uniform mode), then the
tubule noise field, then the nucleus noise field. Fixed-p and blur specs
consume no draw for p, so identically seeded streams stay aligned across
specs and degraded variants of one patch can be compared pixel-for-pixel.
"""

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import imaging
from .errors import DataError
from .patches import (DatasetManifest, ImagePatch, load_patch, save_patch,
                      write_manifest)
from .rng import substream

CASES = ("blur", "bleed", "diffuse")

# default pipeline geometry: clean patches are 128 px, simulated
# acquisitions are downsampled to 84 px before degradation
CLEAN_SIDE = 128
DEGRADED_SIDE = 84


@dataclass
class DegradationSpec:
    """One degradation case; exactly one of p_fixed/p_range for mixing
    cases, both ignored for blur."""

    case: str
    sigma_fine: float = 1.0
    sigma_coarse: float = 5.0
    noise_scale: float = 3.0
    p_fixed: float | None = None
    p_range: tuple | None = None
    tag: str = ""

    def validate(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}, got {self.case!r}")
        if self.sigma_fine <= 0 or self.sigma_coarse <= 0:
            raise ValueError("kernel bandwidths must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.case == "blur":
            return
        if (self.p_fixed is None) == (self.p_range is None):
            raise ValueError(f"case {self.case!r} needs exactly one of "
                             "p_fixed or p_range")
        if self.p_fixed is not None and not 0 <= self.p_fixed <= 1:
            raise ValueError(f"p_fixed must be in [0, 1], got {self.p_fixed}")
        if self.p_range is not None:
            lo, hi = self.p_range
            if not 0 <= lo <= hi <= 1:
                raise ValueError(f"p_range must satisfy 0 <= lo <= hi <= 1, "
                                 f"got {self.p_range}")

    def draw_p(self, rng) -> float:
        """Mixing fraction for one patch; draws only in uniform mode."""
        if self.case == "blur":
            return 0.0
        if self.p_fixed is not None:
            return self.p_fixed
        lo, hi = self.p_range
        return float(rng.uniform(lo, hi))


def standard_suite() -> list:
    """The seven stock cases: 1, 2a-c (bleed), 3a-c (diffuse)."""
    return [
        DegradationSpec("blur", tag="1"),
        DegradationSpec("bleed", p_fixed=0.2, tag="2a"),
        DegradationSpec("bleed", p_fixed=0.5, tag="2b"),
        DegradationSpec("bleed", p_range=(0.2, 0.5), tag="2c"),
        DegradationSpec("diffuse", p_fixed=0.2, tag="3a"),
        DegradationSpec("diffuse", p_fixed=0.5, tag="3b"),
        DegradationSpec("diffuse", p_range=(0.2, 0.5), tag="3c"),
    ]


def spec_for_tag(tag: str) -> DegradationSpec:
    for spec in standard_suite():
        if spec.tag == tag:
            return spec
    known = [s.tag for s in standard_suite()]
    raise ValueError(f"unknown degradation case {tag!r}; known: {known}")


def degrade_fields(patch: ImagePatch, spec: DegradationSpec, rng,
                   target_side: int | None = None) -> tuple:
    """Degrade without binning; returns float (nucleus, tubule) fields.

    Optional target_side downsamples both channels first (the simulated
    acquisition is coarser than the clean source).
    """
    spec.validate()
    nuc = imaging.as_float(patch.nucleus)
    tub = imaging.as_float(patch.tubule)
    if target_side is not None and target_side != patch.size_px:
        nuc = imaging.resize(nuc, target_side, target_side)
        tub = imaging.resize(tub, target_side, target_side)

    p = spec.draw_p(rng)
    fine = imaging.gaussian_convolve(tub, spec.sigma_fine)
    if spec.case == "blur":
        mixed = fine
    elif spec.case == "bleed":
        mixed = fine + p * imaging.gaussian_convolve(nuc, spec.sigma_coarse)
    else:
        mixed = (1.0 - p) * fine \
            + p * imaging.gaussian_convolve(tub, spec.sigma_coarse)
    tub_out = mixed + spec.noise_scale * rng.standard_normal(tub.shape)
    nuc_out = imaging.gaussian_convolve(nuc, spec.sigma_fine) \
        + spec.noise_scale * rng.standard_normal(nuc.shape)
    return nuc_out, tub_out


def degrade(patch: ImagePatch, spec: DegradationSpec, rng,
            target_side: int | None = None) -> ImagePatch:
    """Degraded uint8 patch with the same metadata."""
    nuc, tub = degrade_fields(patch, spec, rng, target_side)
    return ImagePatch(imaging.to_uint8(nuc), imaging.to_uint8(tub),
                      replace(patch.meta))


def build_simulation_suite(manifest: DatasetManifest, cases: list, seed: int,
                           out_root: Path,
                           target_side: int | None = DEGRADED_SIDE) -> list:
    """Write one degraded dataset per spec under out_root/case_<tag>/.

    Patch ids and splits carry over so degraded and clean datasets pair
    up. Per-patch noise streams are derived from (seed, case tag, patch
    id), so outputs do not depend on processing order and rerunning with
    the same seed is byte-identical.
    """
    if any(e.split == "none" for e in manifest.entries):
        raise DataError("dataset must be split before simulation")
    out_root = Path(out_root)
    results = []
    for spec in cases:
        spec.validate()
        tag = spec.tag or spec.case
        case_dir = out_root / f"case_{tag}"
        entries = []
        for entry in manifest.entries:
            rng = substream(seed, "degrade", tag, entry.patch_id)
            try:
                patch = load_patch(manifest.root, entry)
                degraded = degrade(patch, spec, rng, target_side)
                entries.append(save_patch(case_dir, degraded, entry.split,
                                          tag))
            except OSError as exc:
                raise DataError(
                    f"simulation failed for patch {entry.patch_id} "
                    f"(case {tag}): {exc}") from exc
        size = target_side if target_side is not None else manifest.patch_size
        out = DatasetManifest(case_dir, entries, size if entries else 0)
        write_manifest(out)
        results.append(out)
    return results
