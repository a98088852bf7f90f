"""Adversarial translation models: networks, losses, training, inference."""

from .networks import (DiscriminatorSpec, GeneratorSpec, PatchDiscriminator,
                       ResnetGenerator, build_discriminator, build_generator)
from .losses import (cycle_loss, discriminator_gan_loss, gan_loss,
                     generator_gan_loss, l1_paired_loss)
from .train import (TrainConfig, list_checkpoints, load_checkpoint,
                    lr_at_epoch, train_cyclegan, train_pix2pix)
from .infer import enhance, enhance_manifest, load_generator

__all__ = [
    "DiscriminatorSpec", "GeneratorSpec", "PatchDiscriminator",
    "ResnetGenerator", "build_discriminator", "build_generator",
    "cycle_loss", "discriminator_gan_loss", "gan_loss",
    "generator_gan_loss", "l1_paired_loss",
    "TrainConfig", "list_checkpoints", "load_checkpoint", "lr_at_epoch",
    "train_cyclegan", "train_pix2pix",
    "enhance", "enhance_manifest", "load_generator",
]
