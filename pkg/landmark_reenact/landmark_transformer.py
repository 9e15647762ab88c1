# -*- coding: utf-8 -*-
"""Landmark transformer T adapting a driving landmark image to the source identity.

T predicts an additive shift image from the source landmark image (source encoder) and
the driving landmark image (driving encoder). It is trained with an L1 loss against the
ground truth, a reconstruction loss, a cycle loss, an identity feature loss and an
adversarial loss, next to an identity classifier and a realness discriminator.
"""

# Import python modules.
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

# Import local stuff
from .errors import PairingError, ShapeMismatch
from .landmark_geometry import image_l1
from .losses import LossReport, log_gan_losses, weighted_total
from .network_blocks import (
    BlockConfig,
    build_decoder,
    build_encoder,
    build_patch_discriminator,
    encoder_widths,
    set_requires_grad,
    zero_module,
)
from .training_stage import TrainingStage


class TransformerNet(nn.Module):
    """Two encoder, one decoder network predicting a landmark shift.

    The shift head is zero initialized, an untrained network returns the driving
    landmark image unchanged.
    """

    def __init__(self, cfg: BlockConfig, resolution: int):
        super().__init__()
        width = encoder_widths(cfg)[-1]
        self.source_encoder = build_encoder(cfg, 1, resolution)
        self.driving_encoder = build_encoder(cfg, 1, resolution)
        self.decoder = build_decoder(cfg, cfg.base_width, in_channels=2 * width)
        self.shift_head = zero_module(
            nn.Conv2d(cfg.base_width, 1, kernel_size=3, padding=1)
        )

    def shift(self, source_landmarks, driving_landmarks):
        """Unclamped landmark shift in [-1, 1]"""
        features = torch.cat(
            [
                self.source_encoder(source_landmarks),
                self.driving_encoder(driving_landmarks),
            ],
            dim=1,
        )
        return torch.tanh(self.shift_head(F.silu(self.decoder(features))))

    def forward(self, source_landmarks, driving_landmarks):
        shifted = driving_landmarks + self.shift(source_landmarks, driving_landmarks)
        return shifted.clamp(0.0, 1.0)


def transform(t, source_landmarks, driving_landmarks):
    """Transformed landmark image T(source, driving), t can be any callable with the
    signature of TransformerNet"""

    if source_landmarks.shape != driving_landmarks.shape:
        raise ShapeMismatch(
            f"Source landmarks {tuple(source_landmarks.shape)} and driving landmarks "
            f"{tuple(driving_landmarks.shape)} differ in shape"
        )
    return t(source_landmarks, driving_landmarks)


def loss_l1_T(prediction, ground_truth):
    return image_l1(prediction, ground_truth)


def loss_rec(t, source_landmarks, same_identity_landmarks):
    """Reconstruction loss, transforming a landmark of the source identity has to
    return it unchanged"""
    return image_l1(
        transform(t, source_landmarks, same_identity_landmarks), same_identity_landmarks
    )


def loss_cycle(t, source_landmarks, driving_landmarks, driving_source_landmarks):
    """Cycle loss, transforming the driving landmarks to the source identity and back
    (with the driving identity in the source motion) has to return them"""
    transformed = transform(t, source_landmarks, driving_landmarks)
    return image_l1(
        transform(t, driving_source_landmarks, transformed), driving_landmarks
    )


class IdentityClassifier(nn.Module):
    """Identity classifier over landmark images exposing its penultimate features"""

    def __init__(
        self, cfg: BlockConfig, resolution: int, n_identities: int, feature_dim: int = 128
    ):
        super().__init__()
        self.features = nn.Sequential(
            build_encoder(cfg, 1, resolution),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(encoder_widths(cfg)[-1], feature_dim),
            nn.SiLU(),
        )
        self.head = nn.Linear(feature_dim, n_identities)

    def forward(self, landmarks):
        features = self.features(landmarks)
        return self.head(features), features


def classify_identity(c: IdentityClassifier, landmarks):
    """Return (logits, feature_vector)"""
    return c(landmarks)


def loss_id(c, source_landmarks, transformed_landmarks):
    """Mean absolute difference of the identity features of both landmark images"""
    if source_landmarks.shape != transformed_landmarks.shape:
        raise ShapeMismatch(
            f"Landmark images of shapes {tuple(source_landmarks.shape)} and "
            f"{tuple(transformed_landmarks.shape)} can not be compared"
        )
    _, features_1 = c(source_landmarks)
    _, features_2 = c(transformed_landmarks)
    return (features_1 - features_2).abs().mean()


class LandmarkRealnessDiscriminator(nn.Module):
    """Patch discriminator over landmark images with probability outputs"""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.model = build_patch_discriminator(cfg, 1, output="sigmoid")

    def forward(self, landmarks):
        return self.model(landmarks)


def loss_adv_T(d, real_landmarks, fake_landmarks):
    """Return (d_loss, g_loss) of the realness discriminator"""
    return log_gan_losses(d(real_landmarks), d(fake_landmarks))


@dataclass
class TransformerBatch:
    """Training batch of the landmark transformer

    Args
    ----
    source:
        Landmark images of the source identities
    driving:
        Landmark images of the driving identities
    target:
        Ground truth of the source identities with the driving motion
    driving_source:
        Driving identities with the source motion
    source_labels, driving_labels:
        Identity class indices of the source and driving identities
    """

    source: torch.Tensor
    driving: torch.Tensor
    target: Optional[torch.Tensor]
    driving_source: torch.Tensor
    source_labels: torch.Tensor
    driving_labels: torch.Tensor


class TransformerStage(TrainingStage):
    """Joint training of T, the realness discriminator and the identity classifier"""

    tag = "T"
    weight_names = ("l1", "rec", "cycle", "id", "adv")

    def __init__(
        self,
        transformer: TransformerNet,
        classifier: IdentityClassifier,
        discriminator: LandmarkRealnessDiscriminator,
        *,
        learning_rate: float,
    ):
        super().__init__(
            {
                "transformer": transformer,
                "classifier": classifier,
                "discriminator": discriminator,
            },
            learning_rate=learning_rate,
        )
        self.transformer = transformer
        self.classifier = classifier
        self.discriminator = discriminator

    def train_step(self, batch: TransformerBatch, weights) -> LossReport:
        """One optimizer step for T, the discriminator and the classifier (in that order)

        Args
        ----
        weights:
            Mapping from the names in weight_names to the loss weights
        """

        if batch.target is None:
            raise PairingError("The transformer batch has no ground truth")

        # Transformer step, the classifier features and the discriminator are fixed.
        set_requires_grad([self.classifier, self.discriminator], False)
        fake = transform(self.transformer, batch.source, batch.driving)
        terms = {
            "l1": loss_l1_T(fake, batch.target),
            "rec": loss_rec(self.transformer, batch.source, batch.target),
            "cycle": loss_cycle(
                self.transformer, batch.source, batch.driving, batch.driving_source
            ),
            "id": loss_id(self.classifier, batch.source, fake),
            "adv": log_gan_losses(
                self.discriminator(batch.target), self.discriminator(fake)
            )[1],
        }
        total = weighted_total(terms, {name: weights[name] for name in self.weight_names})
        self._step(self.optimizers["transformer"], total)
        set_requires_grad([self.classifier, self.discriminator], True)

        d_loss, _ = loss_adv_T(self.discriminator, batch.target, fake.detach())
        self._step(self.optimizers["discriminator"], d_loss)

        logits, _ = self.classifier(torch.cat([batch.source, batch.driving]))
        labels = torch.cat([batch.source_labels, batch.driving_labels])
        ce_loss = F.cross_entropy(logits, labels)
        self._step(self.optimizers["classifier"], ce_loss)

        return LossReport.from_tensors(
            terms, total, {"d_loss": d_loss, "ce_loss": ce_loss}
        )
