# -*- coding: utf-8 -*-
"""Run configuration, learning rate schedules and the configuration hash."""

# Import python modules.
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

# Import local stuff
from .errors import ConfigError, MalformedConfig
from .network_blocks import BlockConfig

STAGES = ("T", "R", "G")
MODES = ("synthetic", "rafd-layout", "multiview-layout")
RESOLUTIONS = (64, 128, 256)
G_INPUT_MODES = ("ground_truth", "frozen", "vanilla", "vanilla_t")

# Fields that do not change the outcome of a run.
RUN_LOCAL_FIELDS = ("dataset_root", "output_dir", "progress")


@dataclass
class StageSchedule:
    """Epochs, batch size and learning rate decay of one stage

    Args
    ----
    decay_every:
        The learning rate is multiplied by decay_factor every decay_every epochs,
        None keeps it constant
    steps_per_epoch:
        Optimizer steps per epoch, None uses the number of training records divided
        by the batch size
    checkpoint_every:
        Write a numbered checkpoint every this many epochs, 0 disables them
    """

    epochs: int
    batch_size: int
    learning_rate: float
    decay_every: Optional[int] = None
    decay_factor: float = 0.1
    steps_per_epoch: Optional[int] = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError(f"Invalid epochs or batch size in {self}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"The learning rate has to be positive, got {self}")
        if self.decay_every is not None and self.decay_every < 1:
            raise ConfigError(f"decay_every has to be positive, got {self.decay_every}")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ConfigError(f"steps_per_epoch has to be positive, got {self}")

    def learning_rate_at(self, epoch: int) -> float:
        if epoch < 0:
            raise ConfigError(f"Epochs are non-negative, got {epoch}")
        if self.decay_every is None:
            return self.learning_rate
        return self.learning_rate * self.decay_factor ** (epoch // self.decay_every)


# Schedules of the full scale training.
FULL_SCALE_SCHEDULES = {
    "T": StageSchedule(epochs=2000, batch_size=128, learning_rate=1e-5),
    "R": StageSchedule(epochs=500, batch_size=32, learning_rate=2e-4, decay_every=100),
    "G": StageSchedule(epochs=500, batch_size=32, learning_rate=2e-4, decay_every=100),
}


def _default_schedules():
    return {
        "T": StageSchedule(epochs=20, batch_size=8, learning_rate=1e-5),
        "R": StageSchedule(epochs=20, batch_size=8, learning_rate=2e-4, decay_every=100),
        "G": StageSchedule(epochs=20, batch_size=8, learning_rate=2e-4, decay_every=100),
    }


def lr_schedule(stage: str, epoch: int, schedule: Optional[StageSchedule] = None):
    """Learning rate of a stage at an epoch, by default with the full scale schedule"""
    if stage not in STAGES:
        raise ConfigError(f"Unknown stage {stage}, expected one of {STAGES}")
    if schedule is None:
        schedule = FULL_SCALE_SCHEDULES[stage]
    return schedule.learning_rate_at(epoch)


@dataclass
class TransformerWeights:
    l1: float = 10.0
    rec: float = 1.0
    cycle: float = 1.0
    id: float = 1.0
    adv: float = 0.1


@dataclass
class RotationWeights:
    diff: float = 10.0
    gan: float = 1.0
    pose: float = 1.0


@dataclass
class ExpressionWeights:
    pix: float = 10.0
    per: float = 1e-4
    adv: float = 0.1


@dataclass
class ModelConfig:
    """Network layouts and feature sizes"""

    transformer: BlockConfig = field(default_factory=BlockConfig)
    classifier: BlockConfig = field(default_factory=BlockConfig)
    landmark_discriminator: BlockConfig = field(
        default_factory=lambda: BlockConfig(stages=3)
    )
    rotator: BlockConfig = field(default_factory=BlockConfig)
    pose_encoder: BlockConfig = field(default_factory=BlockConfig)
    face_discriminator: BlockConfig = field(default_factory=lambda: BlockConfig(stages=3))
    pose_discriminator: BlockConfig = field(default_factory=BlockConfig)
    generator: BlockConfig = field(default_factory=BlockConfig)
    expression_encoder: BlockConfig = field(default_factory=BlockConfig)
    pose_dim: int = 64
    style_dim: int = 64
    identity_feature_dim: int = 128
    perceptual_seed: int = 0
    perceptual_widths: Tuple[int, ...] = (16, 32, 64)


@dataclass
class RunConfig:
    """Complete configuration of a training or evaluation run

    Args
    ----
    g_inputs:
        Inputs of the generator during training, one of "ground_truth", "frozen",
        "vanilla" and "vanilla_t"
    g_finetune_epochs:
        Additional generator epochs on the outputs of the frozen T and R
    deterministic:
        Single threaded bit exact mode
    """

    dataset_root: str = ""
    mode: str = "synthetic"
    resolution: int = 64
    seed: int = 0
    output_dir: str = "runs"
    deterministic: bool = True
    progress: bool = True
    schedules: Dict[str, StageSchedule] = field(default_factory=_default_schedules)
    transformer_weights: TransformerWeights = field(default_factory=TransformerWeights)
    rotation_weights: RotationWeights = field(default_factory=RotationWeights)
    expression_weights: ExpressionWeights = field(default_factory=ExpressionWeights)
    g_inputs: str = "ground_truth"
    g_finetune_epochs: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"Unknown dataset mode {self.mode}, expected one of {MODES}")
        if self.resolution not in RESOLUTIONS:
            raise ConfigError(
                f"The resolution has to be one of {RESOLUTIONS}, got {self.resolution}"
            )
        if self.g_inputs not in G_INPUT_MODES:
            raise ConfigError(
                f"Unknown generator input mode {self.g_inputs}, expected one of "
                f"{G_INPUT_MODES}"
            )
        if self.g_finetune_epochs < 0:
            raise ConfigError("g_finetune_epochs has to be non-negative")
        if set(self.schedules) != set(STAGES):
            raise ConfigError(f"Schedules are needed for exactly the stages {STAGES}")
        for weights in [
            self.transformer_weights,
            self.rotation_weights,
            self.expression_weights,
        ]:
            for name, value in dataclasses.asdict(weights).items():
                if value < 0.0:
                    raise ConfigError(f"Loss weight {name} is negative: {value}")

    def weights(self, stage: str) -> Dict[str, float]:
        """Loss weights of a stage as a dictionary"""
        weights = {
            "T": self.transformer_weights,
            "R": self.rotation_weights,
            "G": self.expression_weights,
        }[stage]
        return dataclasses.asdict(weights)

    def to_dict(self):
        return dataclasses.asdict(self)


def _build(cls, data, path):
    """Create a (nested) dataclass from a dictionary, unknown keys are errors"""

    if not isinstance(data, dict):
        raise ConfigError(f"Expected an object for {path}, got {data!r}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"Unknown configuration keys in {path}: {sorted(unknown)}")

    kwargs = {}
    for name, value in data.items():
        field_type = fields[name].type
        if field_type in (BlockConfig, TransformerWeights, RotationWeights,
                          ExpressionWeights, ModelConfig):
            kwargs[name] = _build(field_type, value, f"{path}.{name}")
        elif name == "schedules":
            if not isinstance(value, dict):
                raise ConfigError(f"Expected an object for {path}.schedules")
            schedules = _default_schedules()
            for stage, schedule in value.items():
                if stage not in STAGES:
                    raise ConfigError(f"Unknown stage {stage} in {path}.schedules")
                merged = dataclasses.asdict(schedules[stage])
                if not isinstance(schedule, dict):
                    raise ConfigError(f"Expected an object for {path}.schedules.{stage}")
                unknown = set(schedule) - set(merged)
                if unknown:
                    raise ConfigError(
                        f"Unknown configuration keys in {path}.schedules.{stage}: "
                        f"{sorted(unknown)}"
                    )
                merged.update(schedule)
                schedules[stage] = StageSchedule(**merged)
            kwargs[name] = schedules
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as error:
        raise ConfigError(f"Invalid configuration in {path}: {error}") from error


def config_from_dict(data) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path) -> RunConfig:
    """Load a RunConfig from a JSON file, missing keys take their defaults"""
    try:
        with open(path, "r") as config_file:
            data = json.load(config_file)
    except FileNotFoundError as error:
        raise ConfigError(f"Config file {path} does not exist") from error
    except json.JSONDecodeError as error:
        raise MalformedConfig(f"Malformed config file {path}: {error}") from error
    return config_from_dict(data)


def save_config(path, config: RunConfig):
    with open(path, "w") as config_file:
        json.dump(config.to_dict(), config_file, indent=2, sort_keys=True)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON of the config without run local fields"""
    data = config.to_dict()
    for name in RUN_LOCAL_FIELDS:
        data.pop(name)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
