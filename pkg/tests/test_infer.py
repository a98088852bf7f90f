import numpy as np
import pytest
import torch

from helpers import random_patch, write_dataset
from hcsenhance.errors import DataError
from hcsenhance.neural import infer, train
from hcsenhance.neural.networks import DiscriminatorSpec, GeneratorSpec
from hcsenhance.patches import load_manifest, load_patch
from hcsenhance.rng import substream


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One checkpoint of each kind, trained for a single step."""
    root = tmp_path_factory.mktemp("infer")
    rng = substream(77, "infer-tests")
    a = write_dataset(root / "a",
                      [random_patch(rng, side=32, image_id="a", cell_index=i)
                       for i in range(2)], split="train")
    b = write_dataset(root / "b",
                      [random_patch(rng, side=32, image_id="a", cell_index=i)
                       for i in range(2)], split="train")
    cfg = train.TrainConfig(
        epochs_const=1, epochs_decay=0, batch_size=2, crop=16,
        target_side=32, seed=21,
        generator=GeneratorSpec(base_width=4, n_res_blocks=1),
        discriminator=DiscriminatorSpec(n_layers=2, base_width=4))
    cyc = train.train_cyclegan(a, b, cfg, root / "cyc", max_steps=1)
    p2p = train.train_pix2pix(a, b, cfg, root / "p2p", max_steps=1)
    return root, a, cyc[0], p2p[0]


class TestLoadGenerator:
    def test_cyclegan_directions_load_distinct_weights(self, trained):
        _, _, ckpt, _ = trained
        gen_ab, cfg = infer.load_generator(ckpt, "ab")
        gen_ba, _ = infer.load_generator(ckpt, "ba")
        assert not gen_ab.training  # eval mode
        assert cfg.target_side == 32
        sd_ab, sd_ba = gen_ab.state_dict(), gen_ba.state_dict()
        assert any(not torch.equal(sd_ab[k], sd_ba[k]) for k in sd_ab)

    def test_pix2pix_single_generator(self, trained):
        _, _, _, ckpt = trained
        gen, cfg = infer.load_generator(ckpt)
        assert not gen.training
        assert gen.spec == cfg.generator

    def test_bad_direction_rejected(self, trained):
        _, _, ckpt, _ = trained
        with pytest.raises(ValueError):
            infer.load_generator(ckpt, "xy")

    def test_garbage_checkpoint_rejected(self, tmp_path):
        bad = tmp_path / "bad.pt"
        bad.write_bytes(b"not a checkpoint")
        with pytest.raises(DataError):
            infer.load_generator(bad)


class TestEnhance:
    def test_deterministic_and_uint8(self, trained, rng):
        _, _, ckpt, _ = trained
        gen, cfg = infer.load_generator(ckpt)
        patch = random_patch(rng, side=32)
        out1 = infer.enhance(patch, gen, cfg.target_side)
        out2 = infer.enhance(patch, gen, cfg.target_side)
        assert out1.nucleus.dtype == np.uint8
        assert np.array_equal(out1.nucleus, out2.nucleus)
        assert np.array_equal(out1.tubule, out2.tubule)
        assert out1.meta == patch.meta

    def test_resizes_input_to_generator_grid(self, trained, rng):
        _, _, ckpt, _ = trained
        gen, _ = infer.load_generator(ckpt)
        small = random_patch(rng, side=84)
        out = infer.enhance(small, gen, target_side=128)
        assert out.size_px == 128

    def test_identity_generator_round_trips_pixels(self, rng):
        # a passthrough module isolates the pre/post-processing chain
        class Identity(torch.nn.Module):
            def forward(self, x):
                return x

        patch = random_patch(rng, side=32)
        out = infer.enhance(patch, Identity(), target_side=32)
        assert np.array_equal(out.nucleus, patch.nucleus)
        assert np.array_equal(out.tubule, patch.tubule)


class TestEnhanceManifest:
    def test_writes_translated_dataset(self, trained, tmp_path):
        _, a, ckpt, _ = trained
        out = infer.enhance_manifest(a, ckpt, tmp_path / "out")
        assert len(out.entries) == 2
        reloaded = load_manifest(out.root)
        gen, cfg = infer.load_generator(ckpt)
        for entry in reloaded.entries:
            got = load_patch(reloaded.root, entry)
            src_entry = a.by_patch_id()[entry.patch_id]
            want = infer.enhance(load_patch(a.root, src_entry), gen,
                                 cfg.target_side)
            assert np.array_equal(got.tubule, want.tubule)
            assert entry.split == "train"

    def test_empty_split_rejected(self, trained, tmp_path):
        _, a, ckpt, _ = trained
        with pytest.raises(DataError):
            infer.enhance_manifest(a, ckpt, tmp_path / "out", split="val")
