# -*- coding: utf-8 -*-
"""Test the functionality of training"""

import os

import numpy as np
import pytest
import torch

from landmark_reenact.checkpoint import load_checkpoint
from landmark_reenact.errors import ConfigError, DependencyError
from landmark_reenact.expression_generator import ExpressionGenerator
from landmark_reenact.face_rotation import RotationNet
from landmark_reenact.landmark_transformer import TransformerNet
from landmark_reenact.training import (
    build_network,
    expression_batch,
    g_input_mode,
    network_from_checkpoint,
    rotation_batch,
    sample_pairs,
    train_all,
    train_stage,
    transformer_batch,
)

from . import small_dataset, tiny_config


def test_reenact_training_sample_pairs():
    """Sampled pairs combine two distinct training identities"""

    dataset = small_dataset()
    pairs = sample_pairs(dataset, 50, np.random.default_rng(0))
    assert len(pairs) == 50
    for source, driving in pairs:
        assert source.identity != driving.identity
        assert source.identity in dataset.train_ids
        assert driving.identity in dataset.train_ids

    assert pairs == sample_pairs(dataset, 50, np.random.default_rng(0))


def test_reenact_training_batches():
    """Batches of the three stages have matching shapes and ground truth"""

    dataset = small_dataset()
    pairs = sample_pairs(dataset, 3, np.random.default_rng(1))

    batch = transformer_batch(dataset, pairs)
    for tensor in [batch.source, batch.driving, batch.target, batch.driving_source]:
        assert tensor.shape == (3, 1, 64, 64)
    assert batch.source_labels.tolist() == [
        dataset.identity_index[source.identity] for source, _ in pairs
    ]

    batch = rotation_batch(dataset, pairs, np.random.default_rng(2))
    assert batch.source.shape == (3, 3, 64, 64)
    assert batch.pose_reference.shape == (3, 1, 64, 64)
    assert batch.pose.tolist() == [driving.pose for _, driving in pairs]
    source, driving = pairs[0]
    target = dataset.find(source.identity, source.expression, driving.pose)
    assert torch.equal(batch.target[0], dataset.face_tensor(target))

    batch = expression_batch(dataset, pairs, "ground_truth")
    target = dataset.find(source.identity, driving.expression, driving.pose)
    assert torch.equal(batch.target[0], dataset.face_tensor(target))
    assert torch.equal(batch.landmarks[0], dataset.landmark_tensor(target))

    batch = expression_batch(dataset, pairs, "vanilla")
    assert torch.equal(batch.rotated, batch.source)
    assert torch.equal(batch.landmarks[0], dataset.landmark_tensor(driving))

    with pytest.raises(ConfigError):
        expression_batch(dataset, pairs, "random")


def test_reenact_training_networks():
    """The inference network of every stage"""

    config = tiny_config()
    assert isinstance(build_network("T", config), TransformerNet)
    assert isinstance(build_network("R", config), RotationNet)
    assert isinstance(build_network("G", config), ExpressionGenerator)
    with pytest.raises(ConfigError):
        build_network("X", config)

    assert g_input_mode(tiny_config(g_finetune_epochs=2), 0) == "ground_truth"
    assert g_input_mode(tiny_config(g_finetune_epochs=2), 1) == "frozen"
    for mode in ["vanilla", "vanilla_t"]:
        config = tiny_config(g_inputs=mode, g_finetune_epochs=2)
        assert g_input_mode(config, 2) == mode


def test_reenact_training_missing_prerequisites(tmp_path):
    """Training the generator on frozen inputs needs the trained T and R"""

    dataset = small_dataset()
    with pytest.raises(DependencyError):
        train_stage("G", tiny_config(g_inputs="frozen"), dataset, tmp_path)
    with pytest.raises(DependencyError):
        train_stage("G", tiny_config(g_finetune_epochs=1), dataset, None)
    with pytest.raises(ConfigError):
        train_stage("X", tiny_config(), dataset)


def test_reenact_training_smoke(tmp_path):
    """One step of every stage writes the three stage checkpoints"""

    dataset = small_dataset()
    config = tiny_config(g_inputs="frozen")
    checkpoints = train_all(config, dataset, tmp_path)

    assert sorted(checkpoints) == ["G", "R", "T"]
    for stage, checkpoint in checkpoints.items():
        assert os.path.isfile(os.path.join(tmp_path, f"{stage}.json"))
        assert os.path.isfile(os.path.join(tmp_path, f"{stage}.pt"))
        assert checkpoint.epoch == 0
        assert len(checkpoint.loss_history) == 1
        assert np.isfinite(checkpoint.loss_history[0]["total"])

        loaded = load_checkpoint(tmp_path, stage, config_hash=checkpoint.config_hash)
        network = network_from_checkpoint(loaded)
        assert not any(p.requires_grad for p in network.parameters())

    assert set(checkpoints["T"].loss_history[0]) >= {"l1", "rec", "cycle", "id", "adv"}
    assert set(checkpoints["R"].loss_history[0]) >= {"diff", "gan", "pose"}
    assert set(checkpoints["G"].loss_history[0]) >= {"pix", "per", "adv"}


def test_reenact_training_deterministic():
    """Two runs with the same seed produce the same losses and weights"""

    dataset = small_dataset()
    schedule = {"epochs": 2, "batch_size": 2, "steps_per_epoch": 2}
    config = tiny_config(seed=4, schedules={"T": schedule, "R": schedule, "G": schedule})

    first = train_stage("R", config, dataset)
    second = train_stage("R", config, dataset)
    assert first.loss_history == second.loss_history
    for name, value in first.state["networks"]["rotator"].items():
        assert torch.equal(value, second.state["networks"]["rotator"][name])


def test_reenact_training_resume(tmp_path):
    """A run resumed from an intermediate checkpoint continues exactly like the
    uninterrupted run"""

    dataset = small_dataset()
    schedule = {"epochs": 4, "batch_size": 2, "steps_per_epoch": 5, "checkpoint_every": 1}
    config = tiny_config(schedules={"T": schedule})

    full_dir = os.path.join(tmp_path, "full")
    full = train_stage("T", config, dataset, full_dir)
    assert len(full.loss_history) == 20
    for epoch in range(4):
        assert os.path.isfile(os.path.join(full_dir, f"T_epoch{epoch:04d}.json"))

    resumed = train_stage(
        "T",
        config,
        dataset,
        os.path.join(tmp_path, "resumed"),
        resume=os.path.join(full_dir, "T_epoch0001.json"),
    )
    assert resumed.epoch == 3
    assert len(resumed.loss_history) == 20
    assert resumed.loss_history[-10:] == full.loss_history[-10:]
    for name, value in full.state["networks"]["transformer"].items():
        assert torch.equal(value, resumed.state["networks"]["transformer"][name])

    with pytest.raises(DependencyError):
        train_stage("T", tiny_config(seed=1, schedules={"T": schedule}), dataset,
                    resume=os.path.join(full_dir, "T_epoch0001.json"))
