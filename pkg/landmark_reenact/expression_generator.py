# -*- coding: utf-8 -*-
"""Expression enhancing generator G.

G takes the rotated face and the source face and reenacts the expression of a
landmark image. The expression encoder maps the landmark image to a style
vector, affine heads turn it into the AdaIN parameters of the residual blocks of G.
"""

# Import python modules.
from dataclasses import dataclass
from typing import List, Optional, Sequence

import torch
import torch.nn as nn

# Import local stuff
from .errors import PairingError, ShapeMismatch
from .landmark_geometry import image_l1
from .losses import LossReport, log_gan_losses, weighted_total
from .network_blocks import (
    AdaINParams,
    AdaINResBlock,
    BlockConfig,
    StyleHead,
    build_decoder,
    build_encoder,
    build_patch_discriminator,
    encoder_widths,
    set_requires_grad,
)
from .perceptual import PerceptualNetwork
from .training_stage import TrainingStage


class ExpressionEncoder(nn.Module):
    """Landmark image to style vector to one AdaINParams per AdaIN layer

    Args
    ----
    cfg:
        Layout of the convolutional encoder
    channels:
        Channel count of the AdaIN layers
    n_layers:
        Number of AdaIN layers (two per residual block)
    style_dim:
        Dimension of the expression style vector
    """

    def __init__(
        self,
        cfg: BlockConfig,
        resolution: int,
        *,
        channels: int,
        n_layers: int,
        style_dim: int = 64,
    ):
        super().__init__()
        self.encoder = nn.Sequential(
            build_encoder(cfg, 1, resolution),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(encoder_widths(cfg)[-1], style_dim),
            nn.SiLU(),
        )
        self.heads = nn.ModuleList(
            [
                StyleHead(style_dim, channels, zero_mean=i % 2 == 1)
                for i in range(n_layers)
            ]
        )

    def style(self, landmarks):
        return self.encoder(landmarks)

    def forward(self, landmarks) -> List[AdaINParams]:
        style = self.style(landmarks)
        return [head(style) for head in self.heads]


def encode_expression(e: ExpressionEncoder, landmarks) -> List[AdaINParams]:
    return e(landmarks)


class EnhancingGenerator(nn.Module):
    """Encoder over the concatenated rotated and source faces, AdaIN residual blocks
    and a decoder with a sigmoid output"""

    def __init__(self, cfg: BlockConfig, resolution: int):
        super().__init__()
        self.channels = encoder_widths(cfg)[-1]
        self.encoder = build_encoder(cfg, 6, resolution)
        self.blocks = nn.ModuleList(
            [AdaINResBlock(self.channels) for _ in range(cfg.res_blocks)]
        )
        self.decoder = build_decoder(cfg, 3)

    @property
    def n_adain_layers(self):
        return 2 * len(self.blocks)

    def forward(self, rotated, source, expression: Sequence[AdaINParams]):
        if rotated.shape != source.shape:
            raise ShapeMismatch(
                f"Rotated faces {tuple(rotated.shape)} and source faces "
                f"{tuple(source.shape)} differ in shape"
            )
        if len(expression) != self.n_adain_layers:
            raise ShapeMismatch(
                f"The generator has {self.n_adain_layers} AdaIN layers, got "
                f"{len(expression)} parameter sets"
            )
        x = self.encoder(torch.cat([rotated, source], dim=1))
        for i, block in enumerate(self.blocks):
            x = block(x, expression[2 * i : 2 * i + 2])
        return torch.sigmoid(self.decoder(x))


def enhance(g: EnhancingGenerator, rotated, source, expression):
    """Reenacted face of G from the rotated face, the source face and the expression"""
    return g(rotated, source, expression)


class ExpressionGenerator(nn.Module):
    """Expression encoder and G as one network (rotated, source, landmarks) -> face"""

    def __init__(self, encoder: ExpressionEncoder, generator: EnhancingGenerator):
        super().__init__()
        self.expression_encoder = encoder
        self.generator = generator

    @classmethod
    def build(
        cls,
        cfg: BlockConfig,
        resolution: int,
        *,
        encoder_cfg: Optional[BlockConfig] = None,
        style_dim: int = 64,
    ):
        generator = EnhancingGenerator(cfg, resolution)
        encoder = ExpressionEncoder(
            cfg if encoder_cfg is None else encoder_cfg,
            resolution,
            channels=generator.channels,
            n_layers=generator.n_adain_layers,
            style_dim=style_dim,
        )
        return cls(encoder, generator)

    def forward(self, rotated, source, landmarks):
        return enhance(
            self.generator,
            rotated,
            source,
            encode_expression(self.expression_encoder, landmarks),
        )


def loss_pix(prediction, ground_truth):
    return image_l1(prediction, ground_truth)


def loss_per(nets: Sequence[PerceptualNetwork], prediction, ground_truth):
    """Perceptual loss, the L1 distances of the tap activations summed over all taps
    of all networks and averaged over the batch"""

    if prediction.shape != ground_truth.shape:
        raise ShapeMismatch(
            f"Images of shapes {tuple(prediction.shape)} and "
            f"{tuple(ground_truth.shape)} can not be compared"
        )
    total = prediction.new_zeros(())
    for net in nets:
        for a, b in zip(net.activations(prediction), net.activations(ground_truth)):
            total = total + (a - b).abs().flatten(1).sum(dim=1).mean()
    return total


def loss_adv_G(d, real_faces, fake_faces):
    """Return (d_loss, g_loss) of the face realness discriminator"""
    return log_gan_losses(d(real_faces), d(fake_faces))


class FaceRealnessDiscriminator(nn.Module):
    """Patch discriminator over faces with probability outputs"""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.model = build_patch_discriminator(cfg, 3, output="sigmoid")

    def forward(self, faces):
        return self.model(faces)


@dataclass
class ExpressionBatch:
    """Training batch of the generator

    Args
    ----
    rotated:
        Rotated faces (ground truth or outputs of a frozen R, depending on the mode)
    source:
        Source faces
    landmarks:
        Landmark images carrying the driving expression
    target:
        Ground truth reenacted faces
    """

    rotated: torch.Tensor
    source: torch.Tensor
    landmarks: torch.Tensor
    target: Optional[torch.Tensor]


class ExpressionStage(TrainingStage):
    """Joint training of the expression encoder and G, and of the face realness discriminator"""

    tag = "G"
    weight_names = ("pix", "per", "adv")

    def __init__(
        self,
        generator: ExpressionGenerator,
        discriminator: FaceRealnessDiscriminator,
        perceptual_networks: Sequence[PerceptualNetwork],
        *,
        learning_rate: float,
    ):
        super().__init__(
            {"generator": generator, "discriminator": discriminator},
            learning_rate=learning_rate,
        )
        self.generator = generator
        self.discriminator = discriminator
        self.perceptual_networks = list(perceptual_networks)

    def train_step(self, batch: ExpressionBatch, weights) -> LossReport:
        """One optimizer step for G together with its encoder, then one for the
        discriminator"""

        if batch.target is None:
            raise PairingError("The generator batch has no ground truth")

        set_requires_grad([self.discriminator], False)
        fake = self.generator(batch.rotated, batch.source, batch.landmarks)
        terms = {
            "pix": loss_pix(fake, batch.target),
            "per": loss_per(self.perceptual_networks, fake, batch.target),
            "adv": log_gan_losses(
                self.discriminator(batch.target), self.discriminator(fake)
            )[1],
        }
        total = weighted_total(terms, {name: weights[name] for name in self.weight_names})
        self._step(self.optimizers["generator"], total)
        set_requires_grad([self.discriminator], True)

        d_loss, _ = loss_adv_G(self.discriminator, batch.target, fake.detach())
        self._step(self.optimizers["discriminator"], d_loss)

        return LossReport.from_tensors(terms, total, {"d_loss": d_loss})
