# -*- coding: utf-8 -*-
"""Stage checkpoints: a torch serialized state file and a JSON manifest."""

# Import python modules.
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import torch

# Import local stuff
from .config import STAGES
from .errors import ConfigError, DependencyError, ParseError, VersionError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class StageCheckpoint:
    """State of a stage after an epoch

    Args
    ----
    stage:
        Stage tag, "T", "R" or "G"
    state:
        Network and optimizer state dictionaries of the stage
    epoch:
        Last completed epoch (0 based)
    config_hash:
        Hash of the configuration the stage was trained with
    loss_history:
        Reported loss values of every training step
    config:
        Full configuration dictionary, used to rebuild the networks
    metadata:
        Additional stage data, e.g., the identity list of the classifier
    """

    stage: str
    state: Dict[str, Any]
    epoch: int
    config_hash: str
    loss_history: List[Dict[str, float]] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError(f"Unknown stage {self.stage}")

    def manifest(self):
        return {
            "stage": self.stage,
            "epoch": self.epoch,
            "config_hash": self.config_hash,
            "format_version": self.format_version,
            "config": self.config,
            "metadata": self.metadata,
        }


def checkpoint_paths(directory, name):
    """Paths of the state file and the manifest of a checkpoint"""
    return (
        os.path.join(directory, f"{name}.pt"),
        os.path.join(directory, f"{name}.json"),
    )


def save_checkpoint(checkpoint: StageCheckpoint, directory, *, name=None):
    """Write a checkpoint, by default under the name of its stage

    Return
    ----
    Path of the manifest
    """

    os.makedirs(directory, exist_ok=True)
    name = checkpoint.stage if name is None else name
    state_path, manifest_path = checkpoint_paths(directory, name)
    torch.save(
        {"state": checkpoint.state, "loss_history": checkpoint.loss_history},
        state_path,
    )
    with open(manifest_path, "w") as manifest_file:
        json.dump(checkpoint.manifest(), manifest_file, indent=2, sort_keys=True)
    logger.debug("Wrote checkpoint %s", manifest_path)
    return manifest_path


def read_manifest(manifest_path):
    if not os.path.isfile(manifest_path):
        raise DependencyError(f"Checkpoint manifest {manifest_path} does not exist")
    try:
        with open(manifest_path, "r") as manifest_file:
            manifest = json.load(manifest_file)
    except json.JSONDecodeError as error:
        raise ParseError(f"Malformed checkpoint manifest {manifest_path}") from error
    if manifest.get("format_version") != FORMAT_VERSION:
        raise VersionError(
            f"Checkpoint {manifest_path} has format version "
            f"{manifest.get('format_version')}, expected {FORMAT_VERSION}"
        )
    return manifest


def resolve_checkpoint(path, stage: Optional[str] = None):
    """Manifest path of a checkpoint given as a directory (with the stage), a
    manifest or a state file"""
    if os.path.isdir(path):
        if stage is None:
            raise ConfigError(f"Checkpoint directory {path} needs a stage")
        return checkpoint_paths(path, stage)[1]
    root, extension = os.path.splitext(path)
    if extension == ".pt":
        return root + ".json"
    return path


def load_checkpoint(
    path, stage: Optional[str] = None, *, config_hash: Optional[str] = None
) -> StageCheckpoint:
    """Load a checkpoint.

    Args
    ----
    path:
        Checkpoint directory, manifest or state file
    stage:
        Expected stage, required if path is a directory
    config_hash:
        If given, the checkpoint has to be trained with this configuration
    """

    manifest_path = resolve_checkpoint(path, stage)
    manifest = read_manifest(manifest_path)
    if stage is not None and manifest["stage"] != stage:
        raise VersionError(
            f"Checkpoint {manifest_path} belongs to stage {manifest['stage']}, "
            f"expected {stage}"
        )
    if config_hash is not None and manifest["config_hash"] != config_hash:
        raise VersionError(
            f"Checkpoint {manifest_path} was trained with a different configuration "
            f"({manifest['config_hash'][:12]} != {config_hash[:12]})"
        )

    state_path = os.path.splitext(manifest_path)[0] + ".pt"
    if not os.path.isfile(state_path):
        raise DependencyError(f"Checkpoint state file {state_path} does not exist")
    data = torch.load(state_path, map_location="cpu", weights_only=False)
    logger.debug("Loaded checkpoint %s", manifest_path)
    return StageCheckpoint(
        stage=manifest["stage"],
        state=data["state"],
        epoch=manifest["epoch"],
        config_hash=manifest["config_hash"],
        loss_history=data["loss_history"],
        config=manifest.get("config", {}),
        metadata=manifest.get("metadata", {}),
        format_version=manifest["format_version"],
    )
