# -*- coding: utf-8 -*-
"""Face rotation module R turning the source face to the pose of a landmark image.

A pose feature vector extracted from the pose reference landmark image is tiled
over the bottleneck of the face encoder. R is trained with an L1 difference loss,
a least squares GAN loss and a pose regression loss. Pose references for training
are sampled among all landmarks of the source identity at the driving pose,
regardless of their expression.
"""

# Import python modules.
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

# Import local stuff
from .errors import NoPoseReference, PairingError, ShapeMismatch
from .landmark_geometry import check_pose, image_l1
from .losses import LossReport, lsgan_losses, weighted_total
from .network_blocks import (
    BlockConfig,
    build_decoder,
    build_encoder,
    build_patch_discriminator,
    encoder_widths,
    set_requires_grad,
)
from .training_stage import TrainingStage

POSE_ATOL = 1e-9


class RotationNet(nn.Module):
    """Face encoder, pose encoder and decoder with a sigmoid output"""

    def __init__(
        self,
        cfg: BlockConfig,
        resolution: int,
        *,
        pose_cfg: Optional[BlockConfig] = None,
        pose_dim: int = 64,
    ):
        super().__init__()
        pose_cfg = cfg if pose_cfg is None else pose_cfg
        width = encoder_widths(cfg)[-1]
        self.image_encoder = build_encoder(cfg, 3, resolution)
        self.pose_encoder = nn.Sequential(
            build_encoder(pose_cfg, 1, resolution),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(encoder_widths(pose_cfg)[-1], pose_dim),
        )
        self.decoder = build_decoder(cfg, 3, in_channels=width + pose_dim)

    def pose_feature(self, pose_reference):
        return self.pose_encoder(pose_reference)

    def forward(self, source_faces, pose_references):
        features = self.image_encoder(source_faces)
        pose = self.pose_feature(pose_references)
        pose = pose[:, :, None, None].expand(-1, -1, *features.shape[2:])
        return torch.sigmoid(self.decoder(torch.cat([features, pose], dim=1)))


def rotate(r, source_faces, pose_references):
    """Rotated face of R from the source face and the pose reference"""
    if source_faces.shape[-2:] != pose_references.shape[-2:]:
        raise ShapeMismatch(
            f"Face images {tuple(source_faces.shape)} and pose references "
            f"{tuple(pose_references.shape)} differ in resolution"
        )
    return r(source_faces, pose_references)


class PoseDiscriminator(nn.Module):
    """Regressor from a face image to its pose in [-1, 1]"""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        layers = []
        channels = 3
        for width in encoder_widths(cfg):
            layers += [
                nn.Conv2d(channels, width, kernel_size=4, stride=2, padding=1),
                nn.LeakyReLU(0.2),
            ]
            channels = width
        self.model = nn.Sequential(
            *layers,
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(channels, 1),
            nn.Tanh(),
        )

    def forward(self, faces):
        return self.model(faces)[:, 0]


class RealnessDiscriminatorLS(nn.Module):
    """Patch discriminator with unbounded scores for the least squares loss"""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.model = build_patch_discriminator(cfg, 3, output="linear")

    def forward(self, faces):
        return self.model(faces)


def pose_reference_candidates(dataset, identity, pose):
    """All records of an identity at a pose, sorted by expression"""
    candidates = [
        record
        for record in dataset.records
        if record.identity == identity and abs(record.pose - pose) <= POSE_ATOL
    ]
    return sorted(candidates, key=lambda record: record.expression)


def sample_pose_reference_record(dataset, identity, pose, rng: np.random.Generator):
    """Uniformly sample a record of the identity at the pose, any expression"""
    candidates = pose_reference_candidates(dataset, identity, pose)
    if len(candidates) == 0:
        raise NoPoseReference(
            f"The dataset has no landmarks of identity {identity} at pose {pose}"
        )
    return candidates[int(rng.integers(len(candidates)))]


def sample_pose_reference(dataset, identity, pose, rng: np.random.Generator):
    """Landmark image of a uniformly sampled record of the identity at the pose"""
    return dataset.landmark_image(
        sample_pose_reference_record(dataset, identity, pose, rng)
    )


def loss_diff(prediction, ground_truth):
    return image_l1(prediction, ground_truth)


def loss_lsgan(d, real_faces, fake_faces):
    """Return (d_loss, g_loss) of the least squares realness discriminator"""
    return lsgan_losses(d(real_faces), d(fake_faces))


def loss_pose_pair(dp, real_faces, fake_faces, pose):
    """Pose regression losses.

    Args
    ----
    pose:
        Pose of the real faces, a scalar or one value per sample

    Return
    ----
    (dp_loss, pose_loss), dp_loss trains the pose discriminator on real faces,
    pose_loss trains the generator of the fake faces
    """

    if isinstance(pose, torch.Tensor):
        check_pose(pose.detach().cpu().numpy())
    else:
        check_pose(pose)
        pose = torch.as_tensor(pose, dtype=real_faces.dtype)
    dp_loss = ((dp(real_faces) - pose) ** 2).mean()
    pose_loss = ((dp(fake_faces) - pose) ** 2).mean()
    return dp_loss, pose_loss


@dataclass
class RotationBatch:
    """Training batch of the rotation module

    Args
    ----
    source:
        Source faces
    pose_reference:
        Landmark images of the source identities at the driving poses
    target:
        Ground truth faces of the source identities and expressions at the driving
        poses
    pose:
        Driving pose values
    """

    source: torch.Tensor
    pose_reference: torch.Tensor
    target: Optional[torch.Tensor]
    pose: torch.Tensor


class RotationStage(TrainingStage):
    """Joint training of R, the realness discriminator and the pose
    discriminator"""

    tag = "R"
    weight_names = ("diff", "gan", "pose")

    def __init__(
        self,
        rotator: RotationNet,
        discriminator: RealnessDiscriminatorLS,
        pose_discriminator: PoseDiscriminator,
        *,
        learning_rate: float,
    ):
        super().__init__(
            {
                "rotator": rotator,
                "discriminator": discriminator,
                "pose_discriminator": pose_discriminator,
            },
            learning_rate=learning_rate,
        )
        self.rotator = rotator
        self.discriminator = discriminator
        self.pose_discriminator = pose_discriminator

    def train_step(self, batch: RotationBatch, weights) -> LossReport:
        """One optimizer step for R and the two discriminators (in that order)"""

        if batch.target is None:
            raise PairingError("The rotation batch has no ground truth at the driving pose")

        set_requires_grad([self.discriminator, self.pose_discriminator], False)
        fake = rotate(self.rotator, batch.source, batch.pose_reference)
        terms = {
            "diff": loss_diff(fake, batch.target),
            "gan": lsgan_losses(
                self.discriminator(batch.target), self.discriminator(fake)
            )[1],
            "pose": ((self.pose_discriminator(fake) - batch.pose) ** 2).mean(),
        }
        total = weighted_total(terms, {name: weights[name] for name in self.weight_names})
        self._step(self.optimizers["rotator"], total)
        set_requires_grad([self.discriminator, self.pose_discriminator], True)

        d_loss, _ = loss_lsgan(self.discriminator, batch.target, fake.detach())
        self._step(self.optimizers["discriminator"], d_loss)

        dp_loss, _ = loss_pose_pair(
            self.pose_discriminator, batch.target, fake.detach(), batch.pose
        )
        self._step(self.optimizers["pose_discriminator"], dp_loss)

        return LossReport.from_tensors(
            terms, total, {"d_loss": d_loss, "dp_loss": dp_loss}
        )
