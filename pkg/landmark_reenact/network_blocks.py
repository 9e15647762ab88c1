# -*- coding: utf-8 -*-
"""Convolutional building blocks shared by the three stages.

Generators use SiLU activations, discriminators leaky ReLUs with slope 0.2. Every
downsampling stage halves the spatial size with a 4x4 convolution of stride 2.
"""

# Import python modules.
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

# Import local stuff
from .errors import ConfigError, ShapeMismatch

ADAIN_EPS = 1e-5
STD_FLOOR = 1e-3
NORM_KINDS = ("none", "instance", "batch")


@dataclass(frozen=True)
class TensorSpec:
    """Shape of a feature map without the batch dimension"""

    channels: int
    height: int
    width: int

    def __post_init__(self):
        if min(self.channels, self.height, self.width) < 1:
            raise ConfigError(f"Feature map dimensions have to be positive: {self}")


@dataclass(frozen=True, eq=False)
class AdaINParams:
    """Per sample and per channel AdaIN statistics

    Args
    ----
    mean:
        B x C tensor of target means
    std:
        B x C tensor of strictly positive target standard deviations
    """

    mean: torch.Tensor
    std: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.dim() != 2:
            raise ShapeMismatch(
                f"AdaIN mean and std have to be B x C tensors of equal shape, got "
                f"{tuple(self.mean.shape)} and {tuple(self.std.shape)}"
            )

    @property
    def channels(self):
        return self.mean.shape[1]


def _is_power_of_two(value):
    return value >= 1 and value & (value - 1) == 0


@dataclass(frozen=True)
class BlockConfig:
    """Layout of an encoder, decoder or discriminator stack

    Args
    ----
    stages:
        Number of downsampling (or upsampling) stages
    base_width:
        Channel count of the first stage, doubled every stage up to max_width
    max_width:
        Channel cap
    res_blocks:
        Number of residual blocks for networks that have them
    norms:
        Normalization kind per stage, one of "none", "instance" and "batch". The
        default is no normalization on the first stage and instance normalization
        on all further stages.
    """

    stages: int = 4
    base_width: int = 32
    max_width: int = 256
    res_blocks: int = 4
    norms: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.stages < 1:
            raise ConfigError(f"A block stack needs at least one stage, got {self.stages}")
        for name in ["base_width", "max_width"]:
            if not _is_power_of_two(getattr(self, name)):
                raise ConfigError(
                    f"{name} has to be a power of two, got {getattr(self, name)}"
                )
        if self.max_width < self.base_width:
            raise ConfigError("max_width has to be at least base_width")
        if self.res_blocks < 0:
            raise ConfigError(f"res_blocks has to be non-negative, got {self.res_blocks}")
        if self.norms is None:
            object.__setattr__(
                self, "norms", ("none",) + ("instance",) * (self.stages - 1)
            )
        else:
            object.__setattr__(self, "norms", tuple(self.norms))
        if len(self.norms) != self.stages:
            raise ConfigError(
                f"Expected {self.stages} normalization kinds, got {len(self.norms)}"
            )
        for norm in self.norms:
            if norm not in NORM_KINDS:
                raise ConfigError(f"Unknown normalization kind {norm}")


def encoder_widths(cfg: BlockConfig):
    """Output channel count of every encoder stage"""
    return [min(cfg.base_width * 2**i, cfg.max_width) for i in range(cfg.stages)]


def encoder_output_spec(cfg: BlockConfig, input_size: int) -> TensorSpec:
    """Feature map shape after the encoder stack"""
    size = input_size // 2**cfg.stages
    if size < 1:
        raise ConfigError(
            f"{cfg.stages} downsampling stages reduce an input of size {input_size} "
            "below one pixel"
        )
    return TensorSpec(encoder_widths(cfg)[-1], size, size)


def _norm_layer(kind, channels):
    if kind == "instance":
        return nn.InstanceNorm2d(channels, affine=True)
    elif kind == "batch":
        return nn.BatchNorm2d(channels)
    return nn.Identity()


def build_encoder(cfg: BlockConfig, in_channels: int, input_size: int) -> nn.Sequential:
    """Encoder that halves the spatial size and doubles the channels per stage"""

    encoder_output_spec(cfg, input_size)
    layers = []
    channels = in_channels
    for width, norm in zip(encoder_widths(cfg), cfg.norms):
        layers += [
            nn.Conv2d(channels, width, kernel_size=4, stride=2, padding=1),
            _norm_layer(norm, width),
            nn.SiLU(),
        ]
        channels = width
    return nn.Sequential(*layers)


def build_decoder(
    cfg: BlockConfig, out_channels: int, *, in_channels: Optional[int] = None
) -> nn.Sequential:
    """Decoder mirroring build_encoder.

    The last transposed convolution maps to out_channels without normalization or
    activation, the caller adds the output head.
    """

    widths = encoder_widths(cfg)
    channels = widths[-1] if in_channels is None else in_channels
    targets = widths[-2::-1] + [out_channels]
    norms = cfg.norms[::-1]

    layers = []
    for i, (width, norm) in enumerate(zip(targets, norms)):
        layers.append(
            nn.ConvTranspose2d(channels, width, kernel_size=4, stride=2, padding=1)
        )
        if i < len(targets) - 1:
            layers += [_norm_layer(norm, width), nn.SiLU()]
        channels = width
    return nn.Sequential(*layers)


def build_patch_discriminator(
    cfg: BlockConfig, in_channels: int, *, output: str = "linear"
) -> nn.Sequential:
    """Patch discriminator returning one score per receptive patch.

    Args
    ----
    output:
        "sigmoid" for probabilities, "linear" for unbounded least squares scores
    """

    if output not in ("sigmoid", "linear"):
        raise ConfigError(f"Unknown discriminator output {output}")

    layers = []
    channels = in_channels
    for width, norm in zip(encoder_widths(cfg), cfg.norms):
        layers += [
            nn.Conv2d(channels, width, kernel_size=4, stride=2, padding=1),
            _norm_layer(norm, width),
            nn.LeakyReLU(0.2),
        ]
        channels = width
    layers.append(nn.Conv2d(channels, 1, kernel_size=3, stride=1, padding=1))
    if output == "sigmoid":
        layers.append(nn.Sigmoid())
    return nn.Sequential(*layers)


def adain(content: torch.Tensor, params: AdaINParams, eps: float = ADAIN_EPS):
    """Adaptive instance normalization.

    Every channel of the content is standardized over its spatial dimensions (the
    population variance is stabilized by eps) and then scaled by params.std and
    shifted by params.mean.
    """

    if content.dim() != 4 or content.shape[1] != params.channels:
        raise ShapeMismatch(
            f"AdaIN parameters for {params.channels} channels can not be applied to "
            f"content of shape {tuple(content.shape)}"
        )
    if params.mean.shape[0] not in (1, content.shape[0]):
        raise ShapeMismatch(
            f"AdaIN parameters for batch size {params.mean.shape[0]} do not match "
            f"the content batch size {content.shape[0]}"
        )

    mean = content.mean(dim=(2, 3), keepdim=True)
    var = content.var(dim=(2, 3), keepdim=True, unbiased=False)
    normalized = (content - mean) / torch.sqrt(var + eps)
    return normalized * params.std[:, :, None, None] + params.mean[:, :, None, None]


class StyleHead(nn.Module):
    """Affine map from a style vector to the AdaIN parameters of one layer.

    With zero_mean the mean half of the map starts at zero, so the head emits a
    zero mean for every style until it is trained.
    """

    def __init__(self, style_dim: int, channels: int, *, zero_mean: bool = False):
        super().__init__()
        self.channels = channels
        self.affine = nn.Linear(style_dim, 2 * channels)
        if zero_mean:
            with torch.no_grad():
                self.affine.weight[:channels].zero_()
                self.affine.bias[:channels].zero_()

    def forward(self, style: torch.Tensor) -> AdaINParams:
        mean, raw_std = self.affine(style).split(self.channels, dim=1)
        return AdaINParams(mean=mean, std=F.softplus(raw_std) + STD_FLOOR)


class AdaINResBlock(nn.Module):
    """Residual block conv -> AdaIN -> SiLU -> conv -> AdaIN with a skip connection.

    With zero convolution weights the residual branch evaluates to the mean of the
    second AdaIN parameters, so the block is the identity exactly when that mean is
    zero. The expression encoder starts the heads of every second AdaIN with
    zero_mean.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.conv_1 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        self.conv_2 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor, style: Tuple[AdaINParams, AdaINParams]):
        if len(style) != 2:
            raise ShapeMismatch(
                f"An AdaIN residual block needs 2 parameter sets, got {len(style)}"
            )
        residual = adain(self.conv_1(x), style[0])
        residual = adain(self.conv_2(F.silu(residual)), style[1])
        return x + residual


def zero_module(module: nn.Module) -> nn.Module:
    """Set all parameters of a module to zero and return it"""
    with torch.no_grad():
        for parameter in module.parameters():
            parameter.zero_()
    return module


def set_requires_grad(networks, requires_grad: bool):
    """Switch the gradient computation of the parameters of all given networks"""
    for network in networks:
        for parameter in network.parameters():
            parameter.requires_grad_(requires_grad)
