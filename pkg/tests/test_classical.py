import numpy as np
import pytest

from helpers import random_patch, write_dataset
from hcsenhance import classical, imaging
from hcsenhance.errors import DataError
from hcsenhance.patches import load_manifest, load_patch


def _blurred_spots(rng, side=48, sigma=1.0):
    """Ground truth with bright spots plus its Gaussian-blurred view."""
    truth = np.full((side, side), 10.0)
    for _ in range(6):
        r, c = rng.integers(8, side - 8, size=2)
        truth[r, c] = 200.0
    return truth, imaging.gaussian_convolve(truth, sigma)


class TestRichardsonLucy:
    def test_resharpens_blurred_spots(self, rng):
        truth, blurred = _blurred_spots(rng)
        restored = classical.richardson_lucy(blurred, 1.0, iterations=30)
        corr_before = np.corrcoef(truth.ravel(), blurred.ravel())[0, 1]
        corr_after = np.corrcoef(truth.ravel(), restored.ravel())[0, 1]
        assert corr_after > corr_before

    def test_uniform_image_is_fixed_point(self):
        img = np.full((32, 32), 37.0)
        restored = classical.richardson_lucy(img, 1.0, iterations=10)
        assert np.allclose(restored, img, atol=1e-6)

    def test_flux_conserved_within_1_percent(self, rng):
        truth, blurred = _blurred_spots(rng)
        restored = classical.richardson_lucy(blurred, 1.0, iterations=30)
        assert abs(restored.sum() - blurred.sum()) / blurred.sum() < 0.01

    def test_output_stays_nonnegative(self, rng):
        img = rng.uniform(0, 255, size=(24, 24))
        restored = classical.richardson_lucy(img, 1.5, iterations=20)
        assert restored.min() >= 0

    def test_negative_input_rejected(self):
        img = np.array([[1.0, -0.5], [2.0, 3.0]])
        with pytest.raises(ValueError):
            classical.richardson_lucy(img, 1.0)

    def test_bad_iteration_count_rejected(self):
        with pytest.raises(ValueError):
            classical.richardson_lucy(np.ones((8, 8)), 1.0, iterations=0)

    def test_default_iteration_count(self):
        assert classical.RL_DEFAULT_ITERATIONS == 30

    def test_more_iterations_sharpen_more(self, rng):
        truth, blurred = _blurred_spots(rng)
        r5 = classical.richardson_lucy(blurred, 1.0, iterations=5)
        r30 = classical.richardson_lucy(blurred, 1.0, iterations=30)
        err5 = np.abs(r5 - truth).mean()
        err30 = np.abs(r30 - truth).mean()
        assert err30 < err5


class TestSobelOtsuSegment:
    def test_step_edge_marked_foreground(self):
        img = np.zeros((20, 20))
        img[:, 10:] = 200.0
        mask = classical.sobel_otsu_segment(img)
        assert mask.dtype == bool
        assert mask[:, 9:11].all()
        assert not mask[:, :8].any()
        assert not mask[:, 12:].any()

    def test_constant_image_raises(self):
        with pytest.raises(DataError):
            classical.sobel_otsu_segment(np.full((16, 16), 9.0))


class TestManifestRestoration:
    def test_tubule_restored_nucleus_passthrough(self, tmp_path, rng):
        patches = [random_patch(rng, side=32, cell_index=i)
                   for i in range(3)]
        manifest = write_dataset(tmp_path / "in", patches, split="test")
        out = classical.richardson_lucy_manifest(manifest, tmp_path / "out",
                                                 psf_sigma=1.0, iterations=5)
        assert len(out.entries) == 3
        reloaded = load_manifest(out.root)
        for entry, patch in zip(reloaded.entries, patches):
            got = load_patch(reloaded.root, entry)
            assert np.array_equal(got.nucleus, patch.nucleus)
            want = imaging.to_uint8(classical.richardson_lucy(
                patch.tubule, 1.0, iterations=5))
            assert np.array_equal(got.tubule, want)
            assert entry.split == "test"

    def test_split_filter_and_empty_raise(self, tmp_path, rng):
        patches = [random_patch(rng, side=32)]
        manifest = write_dataset(tmp_path / "in", patches, split="train")
        with pytest.raises(DataError):
            classical.richardson_lucy_manifest(manifest, tmp_path / "out",
                                               split="val")
        out = classical.richardson_lucy_manifest(manifest, tmp_path / "out",
                                                 iterations=2, split="train")
        assert len(out.entries) == 1
