# -*- coding: utf-8 -*-
"""
Define the main namespace of landmark_reenact
"""

__version__ = "0.1.0"

from .checkpoint import StageCheckpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, config_hash, load_config, lr_schedule
from .dataset import (
    FaceDataset,
    SampleRecord,
    build_synthetic_dataset,
    generate_synthetic_dataset,
    ingest_dataset,
)
from .evaluation_metrics import FeatureStats, feature_stats, frechet_distance, ssim
from .evaluation_protocol import EvalReport, run_ablation, run_eval_protocol, write_panel
from .landmark_geometry import (
    AnnotationTriple,
    LandmarkSet,
    image_l1,
    normalize_landmarks,
    render_landmark_image,
)
from .pipeline import ReenactmentPipeline
from .synthetic_faces import (
    SynthFaceParams,
    SyntheticOracle,
    render_synthetic_face,
    synth_landmarks,
)
from .training import train_stage
