import numpy as np
import pytest

from helpers import random_patch, write_dataset
from hcsenhance import quantify
from hcsenhance.errors import DataError, DegenerateImageError
from hcsenhance.patches import ImagePatch, PatchMeta


def _disk(shape, center, radius):
    rr, cc = np.ogrid[:shape[0], :shape[1]]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius ** 2


def _brute_ring(nucleus_mask, radius):
    """Per-pixel minimum Euclidean distance to the nucleus, enumerated."""
    pts = np.argwhere(nucleus_mask)
    ring = np.zeros_like(nucleus_mask, dtype=bool)
    for r in range(nucleus_mask.shape[0]):
        for c in range(nucleus_mask.shape[1]):
            if nucleus_mask[r, c]:
                continue
            d2 = ((pts[:, 0] - r) ** 2 + (pts[:, 1] - c) ** 2).min()
            ring[r, c] = d2 <= radius * radius
    return ring


def _record(pid, compound, conc, mech, seg, ring=100):
    return quantify.DensityRecord(pid, compound, conc, mech, ring, seg,
                                  seg / ring)


class TestPerinuclearDensity:
    def test_saturated_tubule_gives_density_one(self):
        nuc = _disk((64, 64), (32, 32), 6)
        tub = np.ones((64, 64), dtype=bool)
        ring_px, seg_px, density = quantify.perinuclear_density(tub, nuc)
        assert density == 1.0
        assert seg_px == ring_px > 0

    def test_empty_tubule_gives_density_zero(self):
        nuc = _disk((64, 64), (32, 32), 6)
        tub = np.zeros((64, 64), dtype=bool)
        _, seg_px, density = quantify.perinuclear_density(tub, nuc)
        assert density == 0.0 and seg_px == 0

    def test_checkerboard_tubule_gives_half(self):
        nuc = _disk((64, 64), (32, 32), 6)
        rr, cc = np.indices((64, 64))
        tub = (rr + cc) % 2 == 0
        _, _, density = quantify.perinuclear_density(tub, nuc)
        assert abs(density - 0.5) <= 0.02

    def test_ring_matches_brute_force(self):
        nuc = _disk((32, 32), (15, 14), 4)
        for radius in (1, 3, 5, 8):
            ring_px, seg_px, _ = quantify.perinuclear_density(
                np.ones((32, 32), dtype=bool), nuc, radius_px=radius)
            want = int(_brute_ring(nuc, radius).sum())
            assert ring_px == want == seg_px, radius

    def test_ring_translation_invariant(self):
        a = _disk((64, 64), (25, 25), 5)
        b = _disk((64, 64), (35, 30), 5)
        ones = np.ones((64, 64), dtype=bool)
        ra, _, _ = quantify.perinuclear_density(ones, a)
        rb, _, _ = quantify.perinuclear_density(ones, b)
        assert ra == rb

    def test_ring_grows_with_radius(self):
        nuc = _disk((64, 64), (32, 32), 5)
        ones = np.ones((64, 64), dtype=bool)
        sizes = [quantify.perinuclear_density(ones, nuc, radius_px=r)[0]
                 for r in (2, 4, 8, 12)]
        assert sizes == sorted(sizes) and len(set(sizes)) == 4

    def test_ring_excludes_nucleus(self):
        nuc = _disk((64, 64), (32, 32), 6)
        _, seg_px, density = quantify.perinuclear_density(nuc.copy(), nuc)
        assert seg_px == 0 and density == 0.0

    def test_edge_clipping_shrinks_ring(self):
        centered = _disk((64, 64), (32, 32), 5)
        cornered = _disk((64, 64), (2, 2), 5)
        ones = np.ones((64, 64), dtype=bool)
        r_center, _, _ = quantify.perinuclear_density(ones, centered)
        r_corner, _, _ = quantify.perinuclear_density(ones, cornered)
        assert r_corner < r_center

    def test_error_paths(self):
        ones = np.ones((16, 16), dtype=bool)
        with pytest.raises(DegenerateImageError):
            quantify.perinuclear_density(ones, np.zeros((16, 16), bool))
        with pytest.raises(DegenerateImageError):
            quantify.perinuclear_density(ones, ones)  # ring clipped away
        with pytest.raises(DataError):
            quantify.perinuclear_density(ones, np.ones((16, 17), bool))

    def test_default_radius(self):
        assert quantify.PERINUCLEAR_RADIUS_PX == 8


class TestDensityRecord:
    def test_ratio_must_match(self):
        with pytest.raises(ValueError):
            quantify.DensityRecord("p", "", "", "", 100, 50, 0.51)

    def test_positive_ring_required(self):
        with pytest.raises(ValueError):
            quantify.DensityRecord("p", "", "", "", 0, 0, 0.0)


class TestComputeDensities:
    def _bimodal_patch(self, cell_index, tub_hi=180):
        nucleus = np.full((64, 64), 20, dtype=np.uint8)
        nucleus[_disk((64, 64), (32, 32), 6)] = 200
        tubule = np.full((64, 64), 15, dtype=np.uint8)
        tubule[_disk((64, 64), (32, 32), 25)] = tub_hi
        meta = PatchMeta("img", cell_index, compound="drugA",
                         concentration="3", mechanism="stabilizer")
        return ImagePatch(nucleus, tubule, meta)

    def test_bright_halo_scores_one(self, tmp_path):
        # segmented tubule disk covers the whole perinuclear ring
        patches = [self._bimodal_patch(i) for i in range(3)]
        manifest = write_dataset(tmp_path, patches, split="test")
        records = quantify.compute_densities(manifest)
        assert [r.patch_id for r in records] == \
            sorted(p.patch_id for p in patches)
        for r in records:
            assert r.density == 1.0
            assert r.compound == "drugA" and r.mechanism == "stabilizer"

    def test_degenerate_patches_skipped_with_warning(self, tmp_path, caplog):
        good = self._bimodal_patch(0)
        flat = ImagePatch(np.full((64, 64), 7, np.uint8),
                          np.full((64, 64), 7, np.uint8),
                          PatchMeta("img", 1))
        manifest = write_dataset(tmp_path, [good, flat], split="test")
        with caplog.at_level("WARNING"):
            records = quantify.compute_densities(manifest)
        assert len(records) == 1
        assert "skipped 1" in caplog.text
        with pytest.raises(DegenerateImageError):
            quantify.compute_densities(manifest, skip_degenerate=False)

    def test_all_degenerate_raises(self, tmp_path):
        flat = ImagePatch(np.full((64, 64), 7, np.uint8),
                          np.full((64, 64), 7, np.uint8),
                          PatchMeta("img", 0))
        manifest = write_dataset(tmp_path, [flat], split="test")
        with pytest.raises(DataError):
            quantify.compute_densities(manifest)


class TestDensityCsv:
    def _records(self):
        return [_record("a_c0000", "drugA", "1", "stab", 37),
                _record("a_c0001", "drugA", "10", "stab", 91, ring=300)]

    def test_round_trip(self, tmp_path):
        path = quantify.write_density_csv(tmp_path / "density.csv",
                                          self._records())
        assert path.read_text().splitlines()[0] == \
            ",".join(quantify.DENSITY_COLUMNS)
        back = quantify.read_density_csv(path)
        assert back == self._records()

    def test_reader_rebuilds_exact_ratio(self, tmp_path):
        # 91/300 does not round-trip through 6 decimals; the reader must
        # recover the exact quotient, not the printed value
        path = quantify.write_density_csv(tmp_path / "density.csv",
                                          self._records())
        back = quantify.read_density_csv(path)
        assert back[1].density == 91 / 300

    def test_tampered_density_detected(self, tmp_path):
        path = quantify.write_density_csv(tmp_path / "density.csv",
                                          self._records())
        text = path.read_text().replace("0.370000", "0.380000")
        path.write_text(text)
        with pytest.raises(DataError):
            quantify.read_density_csv(path)

    def test_missing_file_and_columns(self, tmp_path):
        with pytest.raises(DataError):
            quantify.read_density_csv(tmp_path / "nope.csv")
        bad = tmp_path / "bad.csv"
        bad.write_text("patch_id,compound\nx,y\n")
        with pytest.raises(DataError):
            quantify.read_density_csv(bad)


class TestDoseResponse:
    def _treated(self):
        rows = []
        for i in range(6):
            rows.append(_record(f"a_c{i:04d}", "drugA", "2", "stab", 30 + i))
        for i in range(6):
            rows.append(_record(f"b_c{i:04d}", "drugA", "10", "stab", 60 + i))
        for i in range(4):
            rows.append(_record(f"c_c{i:04d}", "drugB", "5", "destab", 10 + i))
        return rows

    def _baseline(self):
        return [_record(f"u_c{i:04d}", "", "", "", 50 + i)
                for i in range(8)]

    def test_rows_keys_and_ordering(self):
        rows = quantify.dose_response(self._treated(), self._baseline(),
                                      seed=5, per_combo_n=4, baseline_n=6)
        assert [(r["compound"], r["concentration"]) for r in rows] == \
            [("drugA", "2"), ("drugA", "10"), ("drugB", "5")]
        for row in rows:
            assert set(row) == {"compound", "concentration", "mechanism",
                                "n", "mean_density", "baseline_mean",
                                "baseline_n"}
            assert row["baseline_n"] == 6
        assert rows[0]["mechanism"] == "stab"
        assert rows[2]["mechanism"] == "destab"
        # one shared baseline sample across rows
        assert len({r["baseline_mean"] for r in rows}) == 1

    def test_deterministic_per_seed(self):
        kw = dict(per_combo_n=3, baseline_n=4)
        r1 = quantify.dose_response(self._treated(), self._baseline(),
                                    seed=9, **kw)
        r2 = quantify.dose_response(self._treated(), self._baseline(),
                                    seed=9, **kw)
        r3 = quantify.dose_response(self._treated(), self._baseline(),
                                    seed=10, **kw)
        assert r1 == r2
        assert any(a["mean_density"] != b["mean_density"]
                   for a, b in zip(r1, r3))

    def test_small_groups_use_all_records(self, caplog):
        with caplog.at_level("WARNING"):
            rows = quantify.dose_response(self._treated(), self._baseline(),
                                          seed=1, per_combo_n=200,
                                          baseline_n=1000)
        assert all(r["n"] == len([t for t in self._treated()
                                  if (t.compound, t.concentration)
                                  == (r["compound"], r["concentration"])])
                   for r in rows)
        assert rows[0]["baseline_n"] == 8
        assert "fewer than the requested" in caplog.text
        # with every record used the mean is the plain average
        want = np.mean([(30 + i) / 100 for i in range(6)])
        assert rows[0]["mean_density"] == pytest.approx(want)

    def test_declared_combos_checked_and_ordered(self):
        combos = [("drugB", "5"), ("drugA", "2")]
        rows = quantify.dose_response(self._treated(), self._baseline(),
                                      seed=2, combos=combos)
        assert [(r["compound"], r["concentration"]) for r in rows] == combos
        with pytest.raises(DataError):
            quantify.dose_response(self._treated(), self._baseline(), seed=2,
                                   combos=[("drugC", "1")])

    def test_empty_inputs_rejected(self):
        with pytest.raises(DataError):
            quantify.dose_response([], self._baseline(), seed=0)
        with pytest.raises(DataError):
            quantify.dose_response(self._treated(), [], seed=0)

    def test_csv_and_plots(self, tmp_path):
        rows = quantify.dose_response(self._treated(), self._baseline(),
                                      seed=3, per_combo_n=4, baseline_n=6)
        path = quantify.write_dose_response_csv(tmp_path / "dose.csv", rows)
        lines = path.read_text().splitlines()
        assert lines[0] == ("compound,concentration,mechanism,n,"
                            "mean_density,baseline_mean,baseline_n")
        assert len(lines) == 4
        written = quantify.plot_dose_response(rows, tmp_path / "plots")
        names = sorted(p.name for p in written)
        assert names == ["dose_response_destab.png",
                         "dose_response_stab.png"]
        assert all(p.stat().st_size > 0 for p in written)
