# -*- coding: utf-8 -*-
"""Command line interface landmark-reenact."""

# Import python modules.
import argparse
import logging
import os
import sys

import torch

# Import local stuff
from .checkpoint import load_checkpoint
from .config import STAGES, RunConfig, config_from_dict, config_hash, load_config
from .dataset import (
    MODES,
    generate_synthetic_dataset,
    ingest_dataset,
    load_face_image,
    save_image,
)
from .errors import ReenactmentError
from .evaluation_protocol import run_ablation, run_eval_protocol
from .landmark_geometry import load_landmarks, normalize_landmarks, render_landmark_image
from .landmark_polydata import landmark_polydata
from .pipeline import VARIANT_STAGES, ReenactmentPipeline
from .training import train_stage

logger = logging.getLogger(__name__)


def _synth_data(args):
    count = generate_synthetic_dataset(
        args.ids, args.exprs, args.poses, args.res, args.seed, args.out, n_test=args.test_ids
    )
    logger.info("Synthetic dataset with %d samples written to %s", count, args.out)


def _train(args):
    config = load_config(args.config)
    dataset = ingest_dataset(
        config.dataset_root, config.mode, resolution=config.resolution
    )
    checkpoint_dir = args.ckpt_dir or os.path.join(config.output_dir, "checkpoints")
    checkpoint = train_stage(
        args.stage, config, dataset, checkpoint_dir, resume=args.resume
    )
    logger.info(
        "Stage %s trained to epoch %d, checkpoint in %s",
        args.stage,
        checkpoint.epoch + 1,
        checkpoint_dir,
    )


def _checkpoint_config(checkpoint_dir) -> RunConfig:
    return config_from_dict(load_checkpoint(checkpoint_dir, "G").config)


def _reenact(args):
    config = _checkpoint_config(args.ckpt_dir)
    resolution = config.resolution
    pipeline = ReenactmentPipeline.from_checkpoints(args.ckpt_dir, variant=args.variant)

    source_points = normalize_landmarks(load_landmarks(args.source_landmarks))
    driving_points = normalize_landmarks(load_landmarks(args.driving_landmarks))
    source_face = torch.from_numpy(
        load_face_image(args.source, resolution).transpose(2, 0, 1).copy()
    ).float()
    source_landmarks = torch.from_numpy(
        render_landmark_image(source_points, resolution)[None]
    ).float()
    driving_landmarks = torch.from_numpy(
        render_landmark_image(driving_points, resolution)[None]
    ).float()

    face, intermediates = pipeline.reenact(source_face, source_landmarks, driving_landmarks)
    os.makedirs(args.out, exist_ok=True)
    save_image(os.path.join(args.out, "reenacted.png"), face)
    if args.dump_intermediates:
        save_image(
            os.path.join(args.out, "transformed_landmarks.png"),
            intermediates["transformed_landmarks"],
        )
        save_image(os.path.join(args.out, "rotated.png"), intermediates["rotated"])
        save_image(os.path.join(args.out, "source_landmarks.png"), source_landmarks)
        save_image(os.path.join(args.out, "driving_landmarks.png"), driving_landmarks)
        landmark_polydata(source_points).save(
            os.path.join(args.out, "source_landmarks.vtp")
        )
        landmark_polydata(driving_points).save(
            os.path.join(args.out, "driving_landmarks.vtp")
        )
    logger.info("Reenacted face written to %s", args.out)


def _evaluate(args):
    config = _checkpoint_config(args.ckpt_dir)
    pipeline = ReenactmentPipeline.from_checkpoints(args.ckpt_dir, variant=args.variant)
    dataset = ingest_dataset(args.dataset, args.mode, resolution=config.resolution)
    report = run_eval_protocol(
        pipeline,
        dataset,
        drivers_per_identity=args.drivers_per_id,
        seed=args.seed,
        run_hash=config_hash(config),
        panel_path=args.panel,
    )
    report.to_json(args.out)
    logger.info("Evaluation report written to %s", args.out)


def _ablate(args):
    config = RunConfig() if args.config is None else load_config(args.config)
    dataset = ingest_dataset(args.dataset, args.mode, resolution=config.resolution)
    run_ablation(
        dataset,
        config,
        seed=args.seed,
        drivers_per_identity=args.drivers_per_id,
        out_path=args.out,
        checkpoint_dir=args.ckpt_dir,
        panel_path=args.panel,
    )
    logger.info("Ablation table written to %s", args.out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="landmark-reenact",
        description="Landmark guided three stage face reenactment",
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth-data", help="Render a synthetic dataset")
    synth.add_argument("--ids", type=int, default=8)
    synth.add_argument("--exprs", type=int, default=8)
    synth.add_argument("--poses", type=int, default=5)
    synth.add_argument("--res", type=int, default=64)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--test-ids", type=int, default=None)
    synth.add_argument("--out", required=True)
    synth.set_defaults(function=_synth_data)

    train = commands.add_parser("train", help="Train one stage")
    train.add_argument("--stage", choices=STAGES, required=True)
    train.add_argument("--config", required=True)
    train.add_argument("--resume", default=None, help="Checkpoint to continue from")
    train.add_argument("--ckpt-dir", default=None)
    train.set_defaults(function=_train)

    reenact = commands.add_parser("reenact", help="Reenact a single face")
    reenact.add_argument("--source", required=True)
    reenact.add_argument("--source-landmarks", required=True)
    reenact.add_argument("--driving-landmarks", required=True)
    reenact.add_argument("--ckpt-dir", required=True)
    reenact.add_argument("--out", required=True)
    reenact.add_argument("--variant", choices=list(VARIANT_STAGES), default="full")
    reenact.add_argument("--dump-intermediates", action="store_true")
    reenact.set_defaults(function=_reenact)

    evaluate = commands.add_parser("evaluate", help="Run the evaluation protocol")
    evaluate.add_argument("--ckpt-dir", required=True)
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--mode", choices=MODES, default="synthetic")
    evaluate.add_argument("--drivers-per-id", type=int, default=400)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--variant", choices=list(VARIANT_STAGES), default="full")
    evaluate.add_argument("--out", required=True)
    evaluate.add_argument("--panel", default=None, help="PNG of the first reenacted pairs")
    evaluate.set_defaults(function=_evaluate)

    ablate = commands.add_parser("ablate", help="Run the ablation study")
    ablate.add_argument("--dataset", required=True)
    ablate.add_argument("--mode", choices=MODES, default="synthetic")
    ablate.add_argument("--config", default=None)
    ablate.add_argument("--seed", type=int, default=0)
    ablate.add_argument("--drivers-per-id", type=int, default=400)
    ablate.add_argument("--ckpt-dir", default=None)
    ablate.add_argument("--out", required=True)
    ablate.add_argument("--panel", default=None, help="PNG comparing the settings")
    ablate.set_defaults(function=_ablate)

    return parser


def main(argv=None) -> int:
    """Run the command line interface and return the exit code"""

    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.function(args)
    except ReenactmentError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return error.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
