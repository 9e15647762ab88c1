# -*- coding: utf-8 -*-
"""End to end reenactment with the three trained stages."""

# Import python modules.
import logging
from typing import Callable, Optional

import torch

# Import local stuff
from .checkpoint import load_checkpoint
from .config import STAGES, RunConfig, config_hash
from .errors import ConfigError, VersionError
from .landmark_transformer import transform
from .training import network_from_checkpoint

logger = logging.getLogger(__name__)

# Stages each pipeline variant chains before the generator.
VARIANT_STAGES = {
    "vanilla": (),
    "vanilla_t": ("T",),
    "full": ("T", "R"),
}


class ReenactmentPipeline:
    """Chain T -> R -> G.

    Every stage is a callable on batched tensors. Without a transformer the driving
    landmarks are used as they are, without a rotator the source face is passed to
    the generator in place of the rotated face.

    Args
    ----
    transformer:
        (source landmarks, driving landmarks) -> transformed landmarks
    rotator:
        (source faces, pose references) -> rotated faces
    generator:
        (rotated faces, source faces, landmarks) -> reenacted faces
    """

    def __init__(
        self,
        transformer: Optional[Callable],
        rotator: Optional[Callable],
        generator: Callable,
    ):
        self.transformer = transformer
        self.rotator = rotator
        self.generator = generator

    def reenact(self, source_face, source_landmarks, driving_landmarks):
        """Reenact the source face with the motion of the driving landmarks.

        Unbatched inputs (C x R x R) give unbatched outputs.

        Return
        ----
        (reenacted face, {"transformed_landmarks": ..., "rotated": ...})
        """

        batched = source_face.dim() == 4
        if not batched:
            source_face = source_face[None]
            source_landmarks = source_landmarks[None]
            driving_landmarks = driving_landmarks[None]

        with torch.no_grad():
            if self.transformer is None:
                landmarks = driving_landmarks
            else:
                landmarks = transform(
                    self.transformer, source_landmarks, driving_landmarks
                )
            if self.rotator is None:
                rotated = source_face
            else:
                rotated = self.rotator(source_face, landmarks)
            face = self.generator(rotated, source_face, landmarks)

        intermediates = {"transformed_landmarks": landmarks, "rotated": rotated}
        if not batched:
            face = face[0]
            intermediates = {name: value[0] for name, value in intermediates.items()}
        return face, intermediates

    def __call__(self, source_face, source_landmarks, driving_landmarks):
        return self.reenact(source_face, source_landmarks, driving_landmarks)[0]

    @classmethod
    def from_checkpoints(
        cls,
        checkpoint_dir,
        *,
        variant: str = "full",
        config: Optional[RunConfig] = None,
    ):
        """Pipeline of the stage checkpoints in a directory.

        All loaded checkpoints have to be trained with the same configuration, and
        with config if it is given.
        """

        if variant not in VARIANT_STAGES:
            raise ConfigError(
                f"Unknown pipeline variant {variant}, expected one of "
                f"{list(VARIANT_STAGES)}"
            )
        expected_hash = None if config is None else config_hash(config)
        networks = {}
        hashes = {}
        for stage in STAGES:
            if stage != "G" and stage not in VARIANT_STAGES[variant]:
                continue
            checkpoint = load_checkpoint(checkpoint_dir, stage, config_hash=expected_hash)
            hashes[stage] = checkpoint.config_hash
            networks[stage] = network_from_checkpoint(checkpoint)

        if len(set(hashes.values())) > 1:
            raise VersionError(
                f"The checkpoints in {checkpoint_dir} were trained with different "
                f"configurations: {hashes}"
            )
        logger.info("Loaded the %s pipeline from %s", variant, checkpoint_dir)
        return cls(networks.get("T"), networks.get("R"), networks["G"])
