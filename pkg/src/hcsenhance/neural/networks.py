"""Generator and discriminator architectures for the translation models.

The generator is a fully convolutional residual network: a 7x7 stem, two
stride-2 downsampling convolutions, a stack of residual blocks, two
transposed-convolution upsampling stages, and a tanh head, with reflection
padding and instance normalization throughout. The discriminator is a
patch classifier whose default four-layer configuration scores overlapping
70x70 receptive fields.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

DOWNSAMPLE_FACTOR = 4  # two stride-2 stages in the generator


@dataclass
class GeneratorSpec:
    in_channels: int = 2   # nucleus + tubule
    out_channels: int = 2
    base_width: int = 64
    n_res_blocks: int = 9

    def validate(self):
        if self.n_res_blocks < 1:
            raise ValueError("n_res_blocks must be >= 1")
        if min(self.in_channels, self.out_channels, self.base_width) < 1:
            raise ValueError("generator channel counts must be >= 1")


@dataclass
class DiscriminatorSpec:
    in_channels: int = 2
    n_layers: int = 4
    base_width: int = 64

    def validate(self):
        if self.n_layers < 1 or self.base_width < 1 or self.in_channels < 1:
            raise ValueError("invalid discriminator spec")


def init_weights(module: nn.Module) -> None:
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.normal_(module.weight, 0.0, 0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)


class ResidualBlock(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1, padding_mode="reflect"),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
            nn.Conv2d(width, width, 3, padding=1, padding_mode="reflect"),
            nn.InstanceNorm2d(width),
        )

    def forward(self, x):
        return x + self.body(x)


class ResnetGenerator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        spec.validate()
        self.spec = spec
        width = spec.base_width
        layers = [
            nn.Conv2d(spec.in_channels, width, 7, padding=3,
                      padding_mode="reflect"),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
        ]
        for _ in range(2):
            layers += [
                nn.Conv2d(width, width * 2, 3, stride=2, padding=1),
                nn.InstanceNorm2d(width * 2),
                nn.ReLU(inplace=True),
            ]
            width *= 2
        layers += [ResidualBlock(width) for _ in range(spec.n_res_blocks)]
        for _ in range(2):
            layers += [
                nn.ConvTranspose2d(width, width // 2, 3, stride=2, padding=1,
                                   output_padding=1),
                nn.InstanceNorm2d(width // 2),
                nn.ReLU(inplace=True),
            ]
            width //= 2
        layers += [
            nn.Conv2d(width, spec.out_channels, 7, padding=3,
                      padding_mode="reflect"),
            nn.Tanh(),
        ]
        self.body = nn.Sequential(*layers)
        self.apply(init_weights)

    def forward(self, x):
        side = x.shape[-1]
        if x.shape[-2] != side or side % DOWNSAMPLE_FACTOR != 0:
            raise ValueError(
                f"generator input must be square with side divisible by "
                f"{DOWNSAMPLE_FACTOR}, got {tuple(x.shape[-2:])}")
        return self.body(x)


class PatchDiscriminator(nn.Module):
    """Convolutional patch critic emitting a 2-D map of real/fake logits."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        spec.validate()
        self.spec = spec
        width = spec.base_width
        layers = [
            nn.Conv2d(spec.in_channels, width, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        for i in range(1, spec.n_layers):
            out_width = min(width * 2, spec.base_width * 8)
            stride = 2 if i < spec.n_layers - 1 else 1
            layers += [
                nn.Conv2d(width, out_width, 4, stride=stride, padding=1),
                nn.InstanceNorm2d(out_width),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            width = out_width
        layers.append(nn.Conv2d(width, 1, 4, stride=1, padding=1))
        self.body = nn.Sequential(*layers)
        self.apply(init_weights)

    def forward(self, x):
        return self.body(x)


def build_generator(spec: GeneratorSpec) -> ResnetGenerator:
    return ResnetGenerator(spec)


def build_discriminator(spec: DiscriminatorSpec) -> PatchDiscriminator:
    return PatchDiscriminator(spec)
