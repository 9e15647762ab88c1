# -*- coding: utf-8 -*-
"""Staged training of T, R and G.

The stages are trained separately, no gradient flows between them. Batches are
drawn from the training identities with a generator seeded by (seed, stage, epoch),
so a resumed run draws the same batches as an uninterrupted one.
"""

# Import python modules.
import logging
from typing import Dict, Optional

import numpy as np
import torch
import torch.nn as nn
from tqdm import tqdm

# Import local stuff
from .checkpoint import StageCheckpoint, load_checkpoint, save_checkpoint
from .config import STAGES, RunConfig, config_from_dict, config_hash
from .errors import ConfigError, DependencyError, PairingError
from .expression_generator import (
    ExpressionBatch,
    ExpressionGenerator,
    ExpressionStage,
    FaceRealnessDiscriminator,
)
from .face_rotation import (
    PoseDiscriminator,
    RealnessDiscriminatorLS,
    RotationBatch,
    RotationNet,
    RotationStage,
    sample_pose_reference_record,
)
from .landmark_transformer import (
    IdentityClassifier,
    LandmarkRealnessDiscriminator,
    TransformerBatch,
    TransformerNet,
    TransformerStage,
)
from .network_blocks import set_requires_grad
from .perceptual import FixedRandomExtractor

logger = logging.getLogger(__name__)

# Networks each generator input mode needs from the earlier stages.
G_MODE_PREREQUISITES = {
    "ground_truth": (),
    "frozen": ("T", "R"),
    "vanilla": (),
    "vanilla_t": ("T",),
}

# Input mode of the fine tuning epochs, the vanilla modes keep their inputs.
G_FINETUNE_MODES = {
    "ground_truth": "frozen",
    "frozen": "frozen",
    "vanilla": "vanilla",
    "vanilla_t": "vanilla_t",
}


def seed_everything(seed: int, *, deterministic: bool = True):
    """Seed torch and select the single threaded deterministic mode"""
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def _seed_stage(config: RunConfig, stage: str):
    torch.manual_seed(config.seed * 10 + STAGES.index(stage) + 1)


def perceptual_networks(config: RunConfig):
    """The two fixed perceptual networks of the generator loss"""
    return [
        FixedRandomExtractor(
            seed=config.model.perceptual_seed + i, widths=config.model.perceptual_widths
        )
        for i in range(2)
    ]


def build_network(stage: str, config: RunConfig) -> nn.Module:
    """Inference network of a stage: TransformerNet, RotationNet or
    ExpressionGenerator"""
    model = config.model
    if stage == "T":
        return TransformerNet(model.transformer, config.resolution)
    elif stage == "R":
        return RotationNet(
            model.rotator,
            config.resolution,
            pose_cfg=model.pose_encoder,
            pose_dim=model.pose_dim,
        )
    elif stage == "G":
        return ExpressionGenerator.build(
            model.generator,
            config.resolution,
            encoder_cfg=model.expression_encoder,
            style_dim=model.style_dim,
        )
    raise ConfigError(f"Unknown stage {stage}, expected one of {STAGES}")


STAGE_NETWORK_NAMES = {"T": "transformer", "R": "rotator", "G": "generator"}


def build_stage(stage: str, config: RunConfig, n_identities: int):
    """Networks and optimizers of a training stage, initialized from the run seed"""

    _seed_stage(config, stage)
    model = config.model
    learning_rate = config.schedules[stage].learning_rate
    network = build_network(stage, config)
    if stage == "T":
        return TransformerStage(
            network,
            IdentityClassifier(
                model.classifier,
                config.resolution,
                n_identities,
                feature_dim=model.identity_feature_dim,
            ),
            LandmarkRealnessDiscriminator(model.landmark_discriminator),
            learning_rate=learning_rate,
        )
    elif stage == "R":
        return RotationStage(
            network,
            RealnessDiscriminatorLS(model.face_discriminator),
            PoseDiscriminator(model.pose_discriminator),
            learning_rate=learning_rate,
        )
    return ExpressionStage(
        network,
        FaceRealnessDiscriminator(model.face_discriminator),
        perceptual_networks(config),
        learning_rate=learning_rate,
    )


def network_from_checkpoint(checkpoint: StageCheckpoint) -> nn.Module:
    """Frozen inference network of a stage checkpoint"""
    config = config_from_dict(checkpoint.config)
    network = build_network(checkpoint.stage, config)
    network.load_state_dict(
        checkpoint.state["networks"][STAGE_NETWORK_NAMES[checkpoint.stage]]
    )
    network.eval()
    set_requires_grad([network], False)
    return network


def sample_pairs(dataset, n: int, rng: np.random.Generator):
    """Draw n (source, driving) record pairs of distinct training identities"""
    records = dataset.split_records("train")
    if len(dataset.train_ids) < 2:
        raise ConfigError("Training needs at least two training identities")
    pairs = []
    for _ in range(n):
        source = records[int(rng.integers(len(records)))]
        driving = records[int(rng.integers(len(records)))]
        while driving.identity == source.identity:
            driving = records[int(rng.integers(len(records)))]
        pairs.append((source, driving))
    return pairs


def _require(dataset, identity, expression, pose):
    record = dataset.find(identity, expression, pose)
    if record is None:
        raise PairingError(
            f"The dataset has no sample of identity {identity} with expression "
            f"{expression} at pose {pose}"
        )
    return record


def transformer_batch(dataset, pairs) -> TransformerBatch:
    sources = [source for source, _ in pairs]
    drivings = [driving for _, driving in pairs]
    targets = [_require(dataset, s.identity, d.expression, d.pose) for s, d in pairs]
    driving_sources = [
        _require(dataset, d.identity, s.expression, s.pose) for s, d in pairs
    ]
    return TransformerBatch(
        source=dataset.landmarks(sources),
        driving=dataset.landmarks(drivings),
        target=dataset.landmarks(targets),
        driving_source=dataset.landmarks(driving_sources),
        source_labels=torch.tensor([dataset.identity_index[s.identity] for s in sources]),
        driving_labels=torch.tensor(
            [dataset.identity_index[d.identity] for d in drivings]
        ),
    )


def rotation_batch(dataset, pairs, rng: np.random.Generator) -> RotationBatch:
    """Rotation batch, the pose reference is a landmark of the source identity at the
    driving pose with a random expression"""
    sources = [source for source, _ in pairs]
    targets = [_require(dataset, s.identity, s.expression, d.pose) for s, d in pairs]
    references = [
        sample_pose_reference_record(dataset, s.identity, d.pose, rng) for s, d in pairs
    ]
    return RotationBatch(
        source=dataset.faces(sources),
        pose_reference=dataset.landmarks(references),
        target=dataset.faces(targets),
        pose=torch.tensor([d.pose for _, d in pairs], dtype=torch.float32),
    )


def expression_batch(
    dataset, pairs, mode: str, networks: Optional[Dict[str, nn.Module]] = None
) -> ExpressionBatch:
    """Generator batch for one of the generator input modes"""

    networks = {} if networks is None else networks
    sources = [source for source, _ in pairs]
    source_faces = dataset.faces(sources)
    source_landmarks = dataset.landmarks(sources)
    driving_landmarks = dataset.landmarks([d for _, d in pairs])
    targets = [_require(dataset, s.identity, d.expression, d.pose) for s, d in pairs]

    if mode == "ground_truth":
        rotated = dataset.faces(
            [_require(dataset, s.identity, s.expression, d.pose) for s, d in pairs]
        )
        landmarks = dataset.landmarks(targets)
    elif mode == "vanilla":
        rotated = source_faces
        landmarks = driving_landmarks
    elif mode in ("frozen", "vanilla_t"):
        with torch.no_grad():
            landmarks = networks["T"](source_landmarks, driving_landmarks)
            if mode == "frozen":
                rotated = networks["R"](source_faces, landmarks)
            else:
                rotated = source_faces
    else:
        raise ConfigError(f"Unknown generator input mode {mode}")

    return ExpressionBatch(
        rotated=rotated,
        source=source_faces,
        landmarks=landmarks,
        target=dataset.faces(targets),
    )


def g_input_mode(config: RunConfig, epoch: int) -> str:
    """Generator input mode of an epoch, the fine tuning epochs use the frozen T
    and R outputs unless G runs without them"""
    if epoch < config.schedules["G"].epochs:
        return config.g_inputs
    return G_FINETUNE_MODES[config.g_inputs]


def stage_epochs(stage: str, config: RunConfig) -> int:
    epochs = config.schedules[stage].epochs
    if stage == "G":
        epochs += config.g_finetune_epochs
    return epochs


def _required_networks(config: RunConfig):
    needed = set(G_MODE_PREREQUISITES[config.g_inputs])
    if config.g_finetune_epochs > 0:
        needed |= set(G_MODE_PREREQUISITES[G_FINETUNE_MODES[config.g_inputs]])
    return sorted(needed, key=STAGES.index)


def load_prerequisites(config: RunConfig, checkpoint_dir, networks=None):
    """Frozen T and R networks the generator training needs

    Args
    ----
    networks:
        Already available frozen networks by stage tag, only the missing ones are
        loaded from checkpoint_dir
    """

    networks = {} if networks is None else dict(networks)
    for stage in _required_networks(config):
        if stage in networks:
            continue
        if checkpoint_dir is None:
            raise DependencyError(
                f"Generator inputs '{config.g_inputs}' need a trained stage {stage}"
            )
        try:
            checkpoint = load_checkpoint(checkpoint_dir, stage)
        except DependencyError as error:
            raise DependencyError(
                f"Generator inputs '{config.g_inputs}' need a trained stage {stage}, "
                f"train it first: {error}"
            ) from error
        networks[stage] = network_from_checkpoint(checkpoint)
    return networks


def _make_batch(stage, config, dataset, pairs, rng, epoch, networks):
    if stage == "T":
        return transformer_batch(dataset, pairs)
    elif stage == "R":
        return rotation_batch(dataset, pairs, rng)
    return expression_batch(dataset, pairs, g_input_mode(config, epoch), networks)


def train_stage(
    stage: str,
    config: RunConfig,
    dataset,
    checkpoint_dir=None,
    *,
    resume=None,
    networks: Optional[Dict[str, nn.Module]] = None,
) -> StageCheckpoint:
    """Train one stage and write its checkpoint.

    Args
    ----
    stage:
        "T", "R" or "G"
    checkpoint_dir:
        Directory of the stage checkpoints, None trains without writing checkpoints
    resume:
        Checkpoint (directory, manifest or state file) to continue from, True resumes
        from the checkpoint of the stage in checkpoint_dir
    networks:
        Frozen T and R networks for the generator inputs, missing ones are loaded
        from checkpoint_dir

    Return
    ----
    Checkpoint after the last epoch
    """

    if stage not in STAGES:
        raise ConfigError(f"Unknown stage {stage}, expected one of {STAGES}")
    seed_everything(config.seed, deterministic=config.deterministic)
    run_hash = config_hash(config)
    frozen = load_prerequisites(config, checkpoint_dir, networks) if stage == "G" else {}

    trainer = build_stage(stage, config, len(dataset.train_ids))
    schedule = config.schedules[stage]
    weights = config.weights(stage)
    n_epochs = stage_epochs(stage, config)
    steps = schedule.steps_per_epoch or max(
        1, len(dataset.split_records("train")) // schedule.batch_size
    )
    metadata = {"train_ids": dataset.train_ids, "steps_per_epoch": steps}

    start_epoch = 0
    history = []
    if resume is not None and resume is not False:
        source = checkpoint_dir if resume is True else resume
        previous = load_checkpoint(source, stage, config_hash=run_hash)
        trainer.load_state_dict(previous.state)
        start_epoch = previous.epoch + 1
        history = list(previous.loss_history)
        logger.info("Resuming stage %s after epoch %d", stage, previous.epoch)

    checkpoint = StageCheckpoint(
        stage=stage,
        state=trainer.state_dict(),
        epoch=start_epoch - 1,
        config_hash=run_hash,
        loss_history=history,
        config=config.to_dict(),
        metadata=metadata,
    )
    trainer.train()
    for epoch in range(start_epoch, n_epochs):
        trainer.set_learning_rate(schedule.learning_rate_at(epoch))
        rng = np.random.default_rng([config.seed, STAGES.index(stage), epoch])

        epoch_reports = []
        for _ in tqdm(
            range(steps),
            desc=f"{stage} epoch {epoch + 1}/{n_epochs}",
            disable=not config.progress or config.deterministic,
            leave=False,
        ):
            pairs = sample_pairs(dataset, schedule.batch_size, rng)
            batch = _make_batch(stage, config, dataset, pairs, rng, epoch, frozen)
            epoch_reports.append(trainer.train_step(batch, weights).as_dict())
        history.extend(epoch_reports)

        means = {
            name: float(np.mean([report[name] for report in epoch_reports]))
            for name in epoch_reports[0]
        }
        logger.info(
            "Stage %s epoch %d/%d: %s",
            stage,
            epoch + 1,
            n_epochs,
            ", ".join(f"{name} {value:.4f}" for name, value in means.items()),
        )

        checkpoint = StageCheckpoint(
            stage=stage,
            state=trainer.state_dict(),
            epoch=epoch,
            config_hash=run_hash,
            loss_history=list(history),
            config=config.to_dict(),
            metadata=metadata,
        )
        if (
            checkpoint_dir is not None
            and schedule.checkpoint_every
            and (epoch + 1) % schedule.checkpoint_every == 0
        ):
            save_checkpoint(checkpoint, checkpoint_dir, name=f"{stage}_epoch{epoch:04d}")

    if checkpoint_dir is not None:
        save_checkpoint(checkpoint, checkpoint_dir)
    return checkpoint


def train_all(config: RunConfig, dataset, checkpoint_dir=None):
    """Train T, R and G in order

    Return
    ----
    Dictionary of the final checkpoints by stage
    """

    checkpoints = {}
    networks = {}
    for stage in STAGES:
        checkpoints[stage] = train_stage(
            stage, config, dataset, checkpoint_dir, networks=networks
        )
        if stage != "G":
            networks[stage] = network_from_checkpoint(checkpoints[stage])
    return checkpoints
