"""Training loops for the unpaired and paired translation models.

Both trainers follow the same scheme: Adam with a learning rate held
constant for ``epochs_const`` epochs then decayed linearly to zero over
``epochs_decay`` more, per-iteration CSV logging of every loss term, a
checkpoint at the end of each epoch carrying networks, optimizers, and
RNG state, and a divergence guard that aborts on non-finite losses.

Determinism: weight init, data order, and crop draws are all derived from
named substreams of ``cfg.seed``; data order and augmentation streams are
re-derived per epoch, so resuming from the epoch-k checkpoint reproduces
the uninterrupted run exactly.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from itertools import chain
from pathlib import Path

import numpy as np
import torch

from ..errors import DataError, TrainingDivergedError
from ..patches import load_patch
from ..rng import substream, substream_seed
from . import data
from .losses import discriminator_gan_loss, generator_gan_loss, l1
from .networks import (DOWNSAMPLE_FACTOR, DiscriminatorSpec, GeneratorSpec,
                       build_discriminator, build_generator)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hcsenhance-checkpoint-1"
CYCLEGAN_LOG_COLUMNS = ("iteration", "epoch", "loss_G_ab", "loss_G_ba",
                        "loss_D_a", "loss_D_b", "loss_cyc", "lr")
PIX2PIX_LOG_COLUMNS = ("iteration", "epoch", "loss_G", "loss_D", "loss_L1",
                       "lr")
# a 4-layer patch critic scores 70x70 windows; smaller crops underfill it
DISCRIMINATOR_FIELD_PX = 70


@dataclass
class TrainConfig:
    lambda_cyc: float = 10.0
    lr0: float = 2e-4
    epochs_const: int = 20
    epochs_decay: int = 20
    batch_size: int = 8
    crop: int = 64
    target_side: int = 128
    seed: int = 0
    adam_betas: tuple = (0.5, 0.999)
    gan_mode: str = "log"
    lambda_identity: float = 0.0
    fake_pool_size: int = 0
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    discriminator: DiscriminatorSpec = field(default_factory=DiscriminatorSpec)

    @property
    def total_epochs(self) -> int:
        return self.epochs_const + self.epochs_decay

    def validate(self):
        if self.lambda_cyc < 0 or self.lambda_identity < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.epochs_const < 0 or self.epochs_decay < 0 or \
                self.total_epochs < 1:
            raise ValueError("epoch counts must be non-negative and sum to "
                             ">= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.crop <= self.target_side:
            raise ValueError(f"crop must be in 1..target_side "
                             f"({self.target_side}), got {self.crop}")
        if self.crop % DOWNSAMPLE_FACTOR:
            raise ValueError(f"crop must be divisible by {DOWNSAMPLE_FACTOR}")
        if len(self.adam_betas) != 2:
            raise ValueError("adam_betas must be a pair")
        if self.fake_pool_size < 0:
            raise ValueError("fake_pool_size must be >= 0")
        self.generator.validate()
        self.discriminator.validate()


def config_from_dict(payload: dict) -> TrainConfig:
    cfg = TrainConfig(**{**payload,
                         "adam_betas": tuple(payload["adam_betas"]),
                         "generator": GeneratorSpec(**payload["generator"]),
                         "discriminator":
                             DiscriminatorSpec(**payload["discriminator"])})
    cfg.validate()
    return cfg


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    """Constant lr0, then linear decay hitting 0 one epoch past the end."""
    if not 0 <= epoch <= cfg.total_epochs:
        raise ValueError(f"epoch {epoch} outside 0..{cfg.total_epochs}")
    if epoch < cfg.epochs_const:
        return cfg.lr0
    return cfg.lr0 * (cfg.total_epochs - epoch) / cfg.epochs_decay


class FakePool:
    """History buffer that feeds discriminators a mix of current and past
    generator outputs. Disabled (pass-through) when size is 0."""

    def __init__(self, size: int, rng):
        self.size = size
        self.rng = rng
        self.images = []

    def query(self, batch: torch.Tensor) -> torch.Tensor:
        if self.size == 0:
            return batch
        out = []
        for img in batch:
            img = img.detach().clone()
            if len(self.images) < self.size:
                self.images.append(img)
                out.append(img)
            elif self.rng.random() < 0.5:
                slot = int(self.rng.integers(0, self.size))
                out.append(self.images[slot])
                self.images[slot] = img
            else:
                out.append(img)
        return torch.stack(out)


def save_checkpoint(path: Path, kind: str, epoch: int, global_step: int,
                    cfg: TrainConfig, modules: dict,
                    optimizers: dict) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "kind": kind,
        "epoch": epoch,
        "global_step": global_step,
        "config": asdict(cfg),
        "modules": {k: m.state_dict() for k, m in modules.items()},
        "optimizers": {k: o.state_dict() for k, o in optimizers.items()},
        "torch_rng": torch.get_rng_state(),
    }
    torch.save(payload, path)


def load_checkpoint(path: Path) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or \
            payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a recognized checkpoint")
    return payload


def checkpoint_path(out_dir: Path, epoch: int) -> Path:
    return Path(out_dir) / f"epoch_{epoch:03d}.pt"


def list_checkpoints(out_dir: Path) -> list:
    return sorted(Path(out_dir).glob("epoch_*.pt"))


def _epoch_order(seed: int, tag: str, epoch: int, n: int,
                 n_samples: int) -> np.ndarray:
    """Shuffled patch indices for one epoch, cycled out to n_samples."""
    rng = substream(seed, "train", "order", tag, str(epoch))
    order = np.arange(n)
    rng.shuffle(order)
    reps = -(-n_samples // n)
    return np.tile(order, reps)[:n_samples]


def _stack_batch(patches: list, idxs, cfg: TrainConfig, rng,
                 device) -> torch.Tensor:
    arrs = [data.stack_augmented(data.augment(patches[i], cfg.target_side,
                                              cfg.crop, rng))
            for i in idxs]
    return torch.from_numpy(np.stack(arrs)).to(device)


def _set_lr(optimizers, lr: float) -> None:
    for opt in optimizers:
        for group in opt.param_groups:
            group["lr"] = lr


def _set_requires_grad(module, flag: bool) -> None:
    for p in module.parameters():
        p.requires_grad_(flag)


def _check_finite(values: dict, iteration: int) -> None:
    bad = [k for k, v in values.items() if not math.isfinite(v)]
    if bad:
        raise TrainingDivergedError(
            f"non-finite loss terms {bad} at iteration {iteration}")


class _TrainLog:
    """Appending CSV logger with a fixed column set."""

    def __init__(self, path: Path, columns: tuple):
        self.columns = columns
        new = not Path(path).exists()
        self.handle = open(path, "a", newline="")
        self.writer = csv.writer(self.handle, lineterminator="\n")
        if new:
            self.writer.writerow(columns)

    def row(self, values: dict) -> None:
        self.writer.writerow(
            [values[c] if isinstance(values[c], int) else f"{values[c]:.6f}"
             for c in self.columns])
        self.handle.flush()

    def close(self) -> None:
        self.handle.close()


def _seed_torch(cfg: TrainConfig) -> None:
    torch.manual_seed(substream_seed(cfg.seed, "train", "torch") % (2 ** 63))


def untrained_generator(cfg: TrainConfig, direction: str = "ab"):
    """The generator exactly as it was initialized before step one.

    Weight init is a pure function of cfg.seed and the build order below,
    which mirrors the trainers; this gives training curves their
    epoch-zero (untrained) reference point without storing an extra
    checkpoint.
    """
    if direction not in ("ab", "ba"):
        raise ValueError(f"direction must be 'ab' or 'ba', got {direction!r}")
    _seed_torch(cfg)
    g_ab = build_generator(cfg.generator)
    g_ba = build_generator(cfg.generator)
    gen = g_ab if direction == "ab" else g_ba
    gen.eval()
    return gen


def _warn_small_crop(cfg: TrainConfig) -> None:
    if cfg.crop < DISCRIMINATOR_FIELD_PX:
        log.warning("crop %d is smaller than the %dpx discriminator field; "
                    "patch scores see the whole crop", cfg.crop,
                    DISCRIMINATOR_FIELD_PX)


def train_cyclegan(src_manifest, tgt_manifest, cfg: TrainConfig,
                   out_dir: Path, split: str | None = "train",
                   resume_from: Path | None = None,
                   max_steps: int | None = None) -> list:
    """Train the unpaired model source<->target; returns checkpoint paths.

    Two generators (ab: source->target, ba: target->source) and two patch
    discriminators (d_a on source, d_b on target) are optimized jointly:
    one Adam step for both generators against the adversarial + cycle
    objective, then one step per discriminator. ``split`` selects which
    manifest split to train on (None = all rows).

    When resuming, the checkpoint's own config is used and ``cfg`` may be
    None.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    device = torch.device("cpu")

    start_epoch, global_step = 0, 0
    payload = None
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        if payload["kind"] != "cyclegan":
            raise DataError(f"{resume_from} is a {payload['kind']} checkpoint")
        cfg = config_from_dict(payload["config"])
        start_epoch = payload["epoch"] + 1
        global_step = payload["global_step"]
    cfg.validate()

    _seed_torch(cfg)
    g_ab = build_generator(cfg.generator).to(device)
    g_ba = build_generator(cfg.generator).to(device)
    d_a = build_discriminator(cfg.discriminator).to(device)
    d_b = build_discriminator(cfg.discriminator).to(device)
    opt_g = torch.optim.Adam(chain(g_ab.parameters(), g_ba.parameters()),
                             lr=cfg.lr0, betas=cfg.adam_betas)
    opt_d_a = torch.optim.Adam(d_a.parameters(), lr=cfg.lr0,
                               betas=cfg.adam_betas)
    opt_d_b = torch.optim.Adam(d_b.parameters(), lr=cfg.lr0,
                               betas=cfg.adam_betas)
    modules = {"g_ab": g_ab, "g_ba": g_ba, "d_a": d_a, "d_b": d_b}
    optimizers = {"opt_g": opt_g, "opt_d_a": opt_d_a, "opt_d_b": opt_d_b}
    if payload is not None:
        for k, m in modules.items():
            m.load_state_dict(payload["modules"][k])
        for k, o in optimizers.items():
            o.load_state_dict(payload["optimizers"][k])
        torch.set_rng_state(payload["torch_rng"])

    patches_a = data.load_domain(src_manifest, split)
    patches_b = data.load_domain(tgt_manifest, split)
    steps_per_epoch = -(-max(len(patches_a), len(patches_b))
                        // cfg.batch_size)
    n_samples = steps_per_epoch * cfg.batch_size

    _warn_small_crop(cfg)
    pool_a = FakePool(cfg.fake_pool_size,
                      substream(cfg.seed, "train", "pool", "a"))
    pool_b = FakePool(cfg.fake_pool_size,
                      substream(cfg.seed, "train", "pool", "b"))
    logger = _TrainLog(out_dir / "train_log.csv", CYCLEGAN_LOG_COLUMNS)
    written = []
    steps_done = 0
    try:
        for epoch in range(start_epoch, cfg.total_epochs):
            lr = lr_at_epoch(epoch, cfg)
            _set_lr(optimizers.values(), lr)
            order_a = _epoch_order(cfg.seed, "a", epoch, len(patches_a),
                                   n_samples)
            order_b = _epoch_order(cfg.seed, "b", epoch, len(patches_b),
                                   n_samples)
            rng_a = substream(cfg.seed, "train", "augment", "a", str(epoch))
            rng_b = substream(cfg.seed, "train", "augment", "b", str(epoch))
            for step in range(steps_per_epoch):
                lo, hi = step * cfg.batch_size, (step + 1) * cfg.batch_size
                real_a = _stack_batch(patches_a, order_a[lo:hi], cfg, rng_a,
                                      device)
                real_b = _stack_batch(patches_b, order_b[lo:hi], cfg, rng_b,
                                      device)

                # generator step (discriminator weights frozen)
                _set_requires_grad(d_a, False)
                _set_requires_grad(d_b, False)
                fake_b = g_ab(real_a)
                fake_a = g_ba(real_b)
                rec_a = g_ba(fake_b)
                rec_b = g_ab(fake_a)
                loss_g_ab = generator_gan_loss(d_b(fake_b), cfg.gan_mode)
                loss_g_ba = generator_gan_loss(d_a(fake_a), cfg.gan_mode)
                loss_cyc = l1(rec_a, real_a) + l1(rec_b, real_b)
                loss_g = loss_g_ab + loss_g_ba + cfg.lambda_cyc * loss_cyc
                if cfg.lambda_identity > 0:
                    loss_g = loss_g + cfg.lambda_identity * (
                        l1(g_ab(real_b), real_b) + l1(g_ba(real_a), real_a))
                opt_g.zero_grad()
                loss_g.backward()
                opt_g.step()
                _set_requires_grad(d_a, True)
                _set_requires_grad(d_b, True)

                # discriminator steps on detached fakes
                fake_a_d = pool_a.query(fake_a.detach())
                fake_b_d = pool_b.query(fake_b.detach())
                loss_d_a = discriminator_gan_loss(d_a(real_a), d_a(fake_a_d),
                                                  cfg.gan_mode)
                opt_d_a.zero_grad()
                loss_d_a.backward()
                opt_d_a.step()
                loss_d_b = discriminator_gan_loss(d_b(real_b), d_b(fake_b_d),
                                                  cfg.gan_mode)
                opt_d_b.zero_grad()
                loss_d_b.backward()
                opt_d_b.step()

                global_step += 1
                steps_done += 1
                row = {"iteration": global_step, "epoch": epoch,
                       "loss_G_ab": loss_g_ab.item(),
                       "loss_G_ba": loss_g_ba.item(),
                       "loss_D_a": loss_d_a.item(),
                       "loss_D_b": loss_d_b.item(),
                       "loss_cyc": loss_cyc.item(), "lr": lr}
                _check_finite({k: v for k, v in row.items()
                               if k not in ("iteration", "epoch")},
                              global_step)
                logger.row(row)
                if max_steps is not None and steps_done >= max_steps:
                    break
            path = checkpoint_path(out_dir, epoch)
            save_checkpoint(path, "cyclegan", epoch, global_step, cfg,
                            modules, optimizers)
            written.append(path)
            if max_steps is not None and steps_done >= max_steps:
                break
    finally:
        logger.close()
    return written


def _paired_patches(src_manifest, tgt_manifest, split: str | None) -> list:
    """Match source and target patches by patch id; order by id."""
    src = src_manifest if split is None else src_manifest.filter_split(split)
    tgt = tgt_manifest if split is None else tgt_manifest.filter_split(split)
    tgt_by_id = tgt.by_patch_id()
    missing = [e.patch_id for e in src.entries if e.patch_id not in tgt_by_id]
    if missing:
        raise DataError(f"{len(missing)} source patches lack a paired "
                        f"target, first: {missing[0]}")
    pairs = []
    for entry in sorted(src.entries, key=lambda e: e.patch_id):
        pairs.append((load_patch(src.root, entry),
                      load_patch(tgt.root, tgt_by_id[entry.patch_id])))
    if not pairs:
        raise DataError("no paired patches to train on")
    return pairs


def train_pix2pix(src_manifest, tgt_manifest, cfg: TrainConfig,
                  out_dir: Path, split: str | None = "train",
                  resume_from: Path | None = None,
                  max_steps: int | None = None) -> list:
    """Train the paired model source->target; returns checkpoint paths.

    The discriminator is conditional: it scores the source/candidate
    concatenation, so its input width is the sum of both channel counts.
    The L1 reconstruction term shares the weight ``lambda_cyc``. When
    resuming, the checkpoint's own config is used and ``cfg`` may be None.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    device = torch.device("cpu")

    start_epoch, global_step = 0, 0
    payload = None
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        if payload["kind"] != "pix2pix":
            raise DataError(f"{resume_from} is a {payload['kind']} checkpoint")
        cfg = config_from_dict(payload["config"])
        start_epoch = payload["epoch"] + 1
        global_step = payload["global_step"]
    cfg.validate()

    _seed_torch(cfg)
    gen = build_generator(cfg.generator).to(device)
    disc_spec = replace(cfg.discriminator,
                        in_channels=cfg.generator.in_channels
                        + cfg.generator.out_channels)
    disc = build_discriminator(disc_spec).to(device)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr0,
                             betas=cfg.adam_betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr0,
                             betas=cfg.adam_betas)
    modules = {"gen": gen, "disc": disc}
    optimizers = {"opt_g": opt_g, "opt_d": opt_d}
    if payload is not None:
        for k, m in modules.items():
            m.load_state_dict(payload["modules"][k])
        for k, o in optimizers.items():
            o.load_state_dict(payload["optimizers"][k])
        torch.set_rng_state(payload["torch_rng"])

    pairs = _paired_patches(src_manifest, tgt_manifest, split)
    steps_per_epoch = -(-len(pairs) // cfg.batch_size)
    n_samples = steps_per_epoch * cfg.batch_size

    _warn_small_crop(cfg)
    logger = _TrainLog(out_dir / "train_log.csv", PIX2PIX_LOG_COLUMNS)
    written = []
    steps_done = 0
    try:
        for epoch in range(start_epoch, cfg.total_epochs):
            lr = lr_at_epoch(epoch, cfg)
            _set_lr(optimizers.values(), lr)
            order = _epoch_order(cfg.seed, "pair", epoch, len(pairs),
                                 n_samples)
            rng = substream(cfg.seed, "train", "augment", "pair", str(epoch))
            for step in range(steps_per_epoch):
                lo, hi = step * cfg.batch_size, (step + 1) * cfg.batch_size
                xs, ys = [], []
                for i in order[lo:hi]:
                    px, py = data.augment_pair(pairs[i][0], pairs[i][1],
                                               cfg.target_side, cfg.crop, rng)
                    xs.append(data.stack_augmented(px))
                    ys.append(data.stack_augmented(py))
                real_x = torch.from_numpy(np.stack(xs)).to(device)
                real_y = torch.from_numpy(np.stack(ys)).to(device)

                _set_requires_grad(disc, False)
                fake_y = gen(real_x)
                loss_gan = generator_gan_loss(
                    disc(torch.cat([real_x, fake_y], dim=1)), cfg.gan_mode)
                loss_l1 = l1(fake_y, real_y)
                loss_g = loss_gan + cfg.lambda_cyc * loss_l1
                opt_g.zero_grad()
                loss_g.backward()
                opt_g.step()
                _set_requires_grad(disc, True)

                loss_d = discriminator_gan_loss(
                    disc(torch.cat([real_x, real_y], dim=1)),
                    disc(torch.cat([real_x, fake_y.detach()], dim=1)),
                    cfg.gan_mode)
                opt_d.zero_grad()
                loss_d.backward()
                opt_d.step()

                global_step += 1
                steps_done += 1
                row = {"iteration": global_step, "epoch": epoch,
                       "loss_G": loss_gan.item(), "loss_D": loss_d.item(),
                       "loss_L1": loss_l1.item(), "lr": lr}
                _check_finite({k: v for k, v in row.items()
                               if k not in ("iteration", "epoch")},
                              global_step)
                logger.row(row)
                if max_steps is not None and steps_done >= max_steps:
                    break
            path = checkpoint_path(out_dir, epoch)
            save_checkpoint(path, "pix2pix", epoch, global_step, cfg,
                            modules, optimizers)
            written.append(path)
            if max_steps is not None and steps_done >= max_steps:
                break
    finally:
        logger.close()
    return written
