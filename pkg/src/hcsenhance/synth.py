"""Synthetic fluorescence scenes for tests, demos, and smoke pipelines.

Renders two-channel cells: a soft-edged nucleus disk and a microtubule
channel of curved filaments radiating through the cytoplasm with varied
brightness plus a faint diffuse haze. Geometry is coarse but carries the
properties the pipeline cares about: bright thin structures, a perinuclear
density gradient, and an 8-bit intensity budget.
"""

import numpy as np

from . import imaging
from .patches import ImagePatch, PatchMeta


def disk_mask(shape, center, radius) -> np.ndarray:
    rows = np.arange(shape[0])[:, None] - center[0]
    cols = np.arange(shape[1])[None, :] - center[1]
    return rows * rows + cols * cols <= radius * radius


def soft_disk(shape, center, radius, edge=2.0) -> np.ndarray:
    """Disk with a smooth roll-off of about ``edge`` pixels, values in [0, 1]."""
    rows = np.arange(shape[0])[:, None] - center[0]
    cols = np.arange(shape[1])[None, :] - center[1]
    dist = np.sqrt(rows * rows + cols * cols)
    return np.clip((radius - dist) / edge + 0.5, 0.0, 1.0)


def _splat(canvas, ys, xs, amps):
    """Accumulate point intensities with bilinear footprints."""
    h, w = canvas.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = ys - y0
    fx = xs - x0
    for dy, dx, wgt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                        (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        yy = y0 + dy
        xx = x0 + dx
        ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        np.add.at(canvas, (yy[ok], xx[ok]), amps[ok] * wgt[ok])


def _draw_filament(canvas, rng, start, heading, length, amplitude,
                   curliness=0.25):
    steps = int(length / 0.5)
    headings = heading + np.cumsum(rng.normal(0.0, curliness * 0.5, steps))
    ys = start[0] + np.cumsum(0.5 * np.sin(headings))
    xs = start[1] + np.cumsum(0.5 * np.cos(headings))
    amps = np.full(steps, amplitude * 0.5)
    _splat(canvas, ys, xs, amps)


def cell_patch(rng: np.random.Generator, side: int = 128,
               nucleus_radius: float | None = None,
               n_filaments: int | None = None,
               meta: PatchMeta | None = None) -> ImagePatch:
    """Render one centered synthetic cell as an 8-bit two-channel patch."""
    scale = side / 128.0
    if nucleus_radius is None:
        nucleus_radius = rng.uniform(17.0, 24.0) * scale
    if n_filaments is None:
        n_filaments = int(rng.integers(26, 40))
    center = (side / 2.0 + rng.uniform(-3, 3) * scale,
              side / 2.0 + rng.uniform(-3, 3) * scale)

    nucleus = soft_disk((side, side), center, nucleus_radius) \
        * rng.uniform(150.0, 220.0)
    nucleus += rng.normal(0.0, 1.5, (side, side))

    tubule = np.zeros((side, side))
    cyto_radius = nucleus_radius * rng.uniform(2.1, 2.7)
    for _ in range(n_filaments):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        start_r = nucleus_radius * rng.uniform(0.95, 1.25)
        start = (center[0] + start_r * np.sin(angle),
                 center[1] + start_r * np.cos(angle))
        length = rng.uniform(0.5, 1.15) * cyto_radius
        amplitude = rng.uniform(35.0, 150.0)
        _draw_filament(tubule, rng, start, angle, length, amplitude)
    # diffuse cytoplasmic haze, denser around the nucleus
    tubule = imaging.gaussian_convolve(tubule, 0.6)
    haze = soft_disk((side, side), center, cyto_radius, edge=nucleus_radius) \
        * rng.uniform(10.0, 22.0)
    tubule = tubule + haze + rng.normal(0.0, 1.0, (side, side))

    if meta is None:
        meta = PatchMeta("synthetic", 0)
    return ImagePatch(imaging.to_uint8(nucleus), imaging.to_uint8(tubule), meta)


def texture_patch(rng: np.random.Generator, side: int = 128,
                  meta: PatchMeta | None = None) -> ImagePatch:
    """Filament-network crop: microtubule texture filling the frame.

    Unlike ``cell_patch``, which renders one isolated cell on a dark
    field, this mimics a crop taken inside a confluent cytoplasm: long
    curved filaments cross the whole frame, the nucleus shows up as a
    dim hole in the network, and the cell boundary darkens the far
    corners. Filament brightness sits just above the haze so fine
    structure, not gross layout, carries most of the above-mean mass.
    """
    scale = side / 128.0
    margin = side * 0.25
    n = int(rng.integers(80, 120))
    tubule = np.zeros((side, side))
    for _ in range(n):
        start = (rng.uniform(-margin, side + margin),
                 rng.uniform(-margin, side + margin))
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(0.6, 1.4) * side
        amplitude = rng.uniform(20.0, 70.0)
        _draw_filament(tubule, rng, start, angle, length, amplitude)
    tubule = imaging.gaussian_convolve(tubule, 0.6)
    coarse = rng.normal(0.0, 1.0, (side // 8, side // 8))
    haze = imaging.resize(coarse, side, side)
    haze = (haze - haze.min()) / max(float(np.ptp(haze)), 1e-9)
    tubule += rng.uniform(8.0, 18.0) * haze

    cyto_center = (side / 2.0 + rng.uniform(-10, 10) * scale,
                   side / 2.0 + rng.uniform(-10, 10) * scale)
    cyto = soft_disk((side, side), cyto_center,
                     rng.uniform(75.0, 95.0) * scale, edge=15.0 * scale)
    nuc_center = (cyto_center[0] + rng.uniform(-15, 15) * scale,
                  cyto_center[1] + rng.uniform(-15, 15) * scale)
    nuc_radius = rng.uniform(17.0, 24.0) * scale
    hole = 1.0 - 0.75 * soft_disk((side, side), nuc_center, nuc_radius,
                                  edge=4.0)
    tubule = tubule * cyto * hole + rng.normal(0.0, 1.0, (side, side))

    nucleus = soft_disk((side, side), nuc_center, nuc_radius) \
        * rng.uniform(150.0, 220.0)
    nucleus += rng.normal(0.0, 1.5, (side, side))
    if meta is None:
        meta = PatchMeta("synthetic", 0)
    return ImagePatch(imaging.to_uint8(nucleus), imaging.to_uint8(tubule),
                      meta)


def raw_field(rng: np.random.Generator, shape=(512, 512), n_cells: int = 6,
              filament_factor: float = 1.0):
    """Full-frame two-channel scene with several non-overlapping cells.

    Returns float arrays in [0, 255]; cells may intentionally sit close to
    the border so patch extraction has boundary cases to reject.
    ``filament_factor`` scales how many filaments each cell grows, which
    mimics compounds that deplete the network.
    """
    height, width = shape
    nucleus = np.zeros(shape)
    tubule = np.zeros(shape)
    centers = []
    attempts = 0
    while len(centers) < n_cells and attempts < n_cells * 40:
        attempts += 1
        cand = (rng.uniform(20, height - 20), rng.uniform(20, width - 20))
        if all((cand[0] - c[0]) ** 2 + (cand[1] - c[1]) ** 2 > 110.0 ** 2
               for c in centers):
            centers.append(cand)

    for center in centers:
        radius = rng.uniform(17.0, 24.0)
        nucleus += soft_disk(shape, center, radius) * rng.uniform(150.0, 220.0)
        canvas = np.zeros(shape)
        for _ in range(max(2, int(rng.integers(22, 34) * filament_factor))):
            angle = rng.uniform(0.0, 2.0 * np.pi)
            start = (center[0] + radius * 1.1 * np.sin(angle),
                     center[1] + radius * 1.1 * np.cos(angle))
            _draw_filament(canvas, rng, start, angle,
                           rng.uniform(25.0, 55.0), rng.uniform(35.0, 150.0))
        tubule += imaging.gaussian_convolve(canvas, 0.6)
        tubule += soft_disk(shape, center, radius * 2.4, edge=radius) \
            * rng.uniform(10.0, 22.0)

    nucleus += rng.normal(0.0, 1.5, shape)
    tubule += rng.normal(0.0, 1.0, shape)
    return np.clip(nucleus, 0.0, 255.0), np.clip(tubule, 0.0, 255.0)
