#!/usr/bin/env python3
"""Generate a small synthetic raw-image set for trying out the pipeline.

Writes paired <id>_nucleus.png / <id>_tubule.png files plus an images.csv
with made-up compound labels: an untreated arm and two compounds whose
higher concentrations deplete the filament network.
"""

import argparse
import csv
from pathlib import Path

import numpy as np
from PIL import Image

from hcsenhance.rng import substream
from hcsenhance.synth import raw_field

ARMS = [
    # (compound, concentration, mechanism, filament_factor)
    ("untreated", "0", "control", 1.0),
    ("nocodazole", "0.1", "destabilizer", 0.85),
    ("nocodazole", "1.0", "destabilizer", 0.55),
    ("nocodazole", "10.0", "destabilizer", 0.3),
    ("taxol", "0.1", "stabilizer", 1.0),
    ("taxol", "1.0", "stabilizer", 0.9),
    ("taxol", "10.0", "stabilizer", 0.75),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--images-per-arm", type=int, default=2)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--side", type=int, default=512)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for compound, concentration, mechanism, factor in ARMS:
        for i in range(args.images_per_arm):
            image_id = f"{compound}_{concentration}_{i:02d}".replace(".", "p")
            rng = substream(args.seed, "demo", image_id)
            nucleus, tubule = raw_field(rng, (args.side, args.side),
                                        filament_factor=factor)
            for name, channel in (("nucleus", nucleus), ("tubule", tubule)):
                img = np.rint(channel).astype(np.uint8)
                Image.fromarray(img.astype(np.uint16)).save(
                    out / f"{image_id}_{name}.png", format="PNG")
            rows.append([image_id, f"W{len(rows):03d}", compound,
                         concentration, mechanism])
    with open(out / "images.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "well", "compound", "concentration",
                         "mechanism"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} raw image pairs -> {out}")


if __name__ == "__main__":
    main()
