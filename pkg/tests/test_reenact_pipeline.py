# -*- coding: utf-8 -*-
"""Test the functionality of pipeline"""

import numpy as np
import pytest
import torch

from landmark_reenact.checkpoint import StageCheckpoint, save_checkpoint
from landmark_reenact.config import config_hash
from landmark_reenact.errors import ConfigError, VersionError
from landmark_reenact.pipeline import ReenactmentPipeline
from landmark_reenact.synthetic_faces import SyntheticOracle
from landmark_reenact.training import (
    STAGE_NETWORK_NAMES,
    build_network,
    sample_pairs,
)

from . import small_dataset, tiny_config


def _tiny_pipeline():
    config = tiny_config()
    torch.manual_seed(0)
    networks = [build_network(stage, config).eval() for stage in ["T", "R", "G"]]
    return ReenactmentPipeline(*networks)


def _save_stage(directory, stage, config, run_hash):
    torch.manual_seed(1)
    network = build_network(stage, config)
    checkpoint = StageCheckpoint(
        stage=stage,
        state={"networks": {STAGE_NETWORK_NAMES[stage]: network.state_dict()}},
        epoch=0,
        config_hash=run_hash,
        config=config.to_dict(),
    )
    save_checkpoint(checkpoint, directory)


def test_reenact_pipeline_oracle():
    """Chaining the oracle stages reproduces the ground truth reenactment"""

    dataset = small_dataset()
    oracle = SyntheticOracle(dataset)
    pipeline = ReenactmentPipeline(
        oracle.transform,
        oracle.rotate,
        lambda rotated, source, landmarks: rotated,
    )

    pairs = sample_pairs(dataset, 6, np.random.default_rng(0))
    sources = [source for source, _ in pairs]
    drivings = [driving for _, driving in pairs]
    targets = [dataset.find(s.identity, d.expression, d.pose) for s, d in pairs]

    face, intermediates = pipeline.reenact(
        dataset.faces(sources), dataset.landmarks(sources), dataset.landmarks(drivings)
    )
    assert torch.equal(face, dataset.faces(targets))
    assert torch.equal(
        intermediates["transformed_landmarks"], dataset.landmarks(targets)
    )


def test_reenact_pipeline_shapes():
    """Batched and unbatched reenactment with untrained networks"""

    dataset = small_dataset()
    records = dataset.records[:2]
    drivers = dataset.records[-2:]
    pipeline = _tiny_pipeline()

    faces = pipeline(
        dataset.faces(records), dataset.landmarks(records), dataset.landmarks(drivers)
    )
    assert faces.shape == (2, 3, 64, 64)
    assert faces.min() >= 0.0 and faces.max() <= 1.0

    face, intermediates = pipeline.reenact(
        dataset.face_tensor(records[0]),
        dataset.landmark_tensor(records[0]),
        dataset.landmark_tensor(drivers[0]),
    )
    assert face.shape == (3, 64, 64)
    assert intermediates["rotated"].shape == (3, 64, 64)
    # The untrained transformer passes the driving landmarks through.
    assert torch.equal(
        intermediates["transformed_landmarks"], dataset.landmark_tensor(drivers[0])
    )
    assert torch.allclose(face, faces[0], atol=1e-5)


def test_reenact_pipeline_deterministic():
    """Repeated reenactment gives the same faces"""

    dataset = small_dataset()
    records = dataset.records[3:6]
    pipeline = _tiny_pipeline()
    inputs = (
        dataset.faces(records),
        dataset.landmarks(records),
        dataset.landmarks(records[::-1]),
    )
    assert torch.equal(pipeline(*inputs), pipeline(*inputs))


def test_reenact_pipeline_variants():
    """Without T and R the generator sees the driving landmarks and the source face"""

    dataset = small_dataset()
    records = dataset.records[:2]
    drivers = dataset.records[-2:]
    seen = {}

    def generator(rotated, source, landmarks):
        seen["rotated"] = rotated
        seen["landmarks"] = landmarks
        return source

    pipeline = ReenactmentPipeline(None, None, generator)
    faces = pipeline(
        dataset.faces(records), dataset.landmarks(records), dataset.landmarks(drivers)
    )
    assert torch.equal(faces, dataset.faces(records))
    assert torch.equal(seen["rotated"], dataset.faces(records))
    assert torch.equal(seen["landmarks"], dataset.landmarks(drivers))


def test_reenact_pipeline_from_checkpoints(tmp_path):
    """Checkpoints of one configuration load, mixed configurations are rejected"""

    config = tiny_config()
    run_hash = config_hash(config)
    for stage in ["T", "R", "G"]:
        _save_stage(tmp_path, stage, config, run_hash)

    pipeline = ReenactmentPipeline.from_checkpoints(tmp_path, config=config)
    assert pipeline.transformer is not None and pipeline.rotator is not None
    pipeline = ReenactmentPipeline.from_checkpoints(tmp_path, variant="vanilla")
    assert pipeline.transformer is None and pipeline.rotator is None

    with pytest.raises(VersionError):
        ReenactmentPipeline.from_checkpoints(tmp_path, config=tiny_config(seed=5))
    with pytest.raises(ConfigError):
        ReenactmentPipeline.from_checkpoints(tmp_path, variant="half")

    _save_stage(tmp_path, "R", config, "0" * 64)
    with pytest.raises(VersionError):
        ReenactmentPipeline.from_checkpoints(tmp_path)
    ReenactmentPipeline.from_checkpoints(tmp_path, variant="vanilla_t")
