# -*- coding: utf-8 -*-
"""Evaluation protocol and ablation study.

Every test identity is reenacted with a fixed number of driving landmarks sampled
from the test set. The reenacted faces are scored with SSIM against their ground
truth, and with the Frechet distance of the pooled reenacted faces to the pooled
ground truth faces.
"""

# Import python modules.
import csv
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch
from PIL import Image

# Import local stuff
from .config import RunConfig, config_hash
from .errors import ConfigError, PairingError, SplitError
from .evaluation_metrics import feature_stats, frechet_distance, ssim
from .perceptual import FixedRandomExtractor
from .pipeline import ReenactmentPipeline
from .training import network_from_checkpoint, train_stage

logger = logging.getLogger(__name__)

ABLATION_CONFIGS = ("vanilla", "vanilla+T", "vanilla+T+R")
PANEL_GAP = 2

# Published full scale (SSIM, FID) values of the three ablation settings.
PUBLISHED_REFERENCE = {
    "vanilla": (0.67, 83.30),
    "vanilla+T": (0.68, 89.98),
    "vanilla+T+R": (0.73, 80.45),
}


@dataclass
class EvalReport:
    """Scores of one evaluation run"""

    ssim_values: List[float]
    ssim_mean: float
    fid: float
    n_samples: int
    seed: int
    config_hash: str = ""

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as report_file:
                report_file.write(text)
        return text


def _default_extractor():
    return FixedRandomExtractor(seed=0)


def sample_drivers(dataset, drivers_per_identity: int, seed: int):
    """Sample (source, driving) record pairs of the protocol.

    For every test identity, drivers_per_identity distinct driving records are drawn
    from the test set and each is paired with a uniformly drawn source record of the
    identity.
    """

    overlap = set(dataset.train_ids) & set(dataset.test_ids)
    if overlap:
        raise SplitError(
            f"Identities {sorted(overlap)} are in the train and the test split"
        )
    test_records = dataset.split_records("test")
    if drivers_per_identity > len(test_records):
        raise ConfigError(
            f"{drivers_per_identity} drivers per identity requested, the test set has "
            f"only {len(test_records)} landmarks"
        )
    if drivers_per_identity < 1:
        raise ConfigError("At least one driver per identity is needed")

    rng = np.random.default_rng(seed)
    pairs = []
    for identity in dataset.test_ids:
        sources = dataset.identity_records(identity)
        driver_index = rng.choice(
            len(test_records), size=drivers_per_identity, replace=False
        )
        for i in driver_index:
            source = sources[int(rng.integers(len(sources)))]
            pairs.append((source, test_records[int(i)]))
    return pairs


def _ground_truth_records(dataset, pairs):
    records = []
    for source, driving in pairs:
        record = dataset.find(source.identity, driving.expression, driving.pose)
        if record is None:
            raise PairingError(
                f"No ground truth for identity {source.identity} with the motion of "
                f"{driving.identity}"
            )
        records.append(record)
    return records


def _reenact_pairs(model, dataset, pairs, batch_size=32) -> torch.Tensor:
    """Batched reenactment of (source, driving) record pairs"""
    generated = []
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start : start + batch_size]
            faces = model(
                dataset.faces([source for source, _ in chunk]),
                dataset.landmarks([source for source, _ in chunk]),
                dataset.landmarks([driving for _, driving in chunk]),
            )
            generated.append(faces.detach().float().cpu())
    return torch.cat(generated)


def _panel_tile(image) -> Image.Image:
    image = torch.as_tensor(image).detach().float().cpu()
    if image.shape[0] == 1:
        image = image.expand(3, -1, -1)
    pixels = torch.round(image.clamp(0.0, 1.0) * 255.0).to(torch.uint8)
    return Image.fromarray(pixels.permute(1, 2, 0).contiguous().numpy())


def write_panel(path, rows, *, gap: int = PANEL_GAP) -> None:
    """Tile rows of images into one 8 bit RGB PNG on a white background

    Args
    ----
    rows:
        Rows of equal length, each image is a C x H x W tensor in [0, 1] with one
        (landmark image) or three (face) channels
    gap:
        Width of the white separation between tiles in pixels
    """

    if len(rows) == 0 or len(rows[0]) == 0:
        raise ConfigError("A panel needs at least one row with one image")
    if any(len(row) != len(rows[0]) for row in rows):
        raise ConfigError("All rows of a panel need the same number of images")

    tiles = [[_panel_tile(image) for image in row] for row in rows]
    tile_width = max(tile.size[0] for row in tiles for tile in row)
    tile_height = max(tile.size[1] for row in tiles for tile in row)
    n_rows, n_columns = len(tiles), len(tiles[0])
    panel = Image.new(
        "RGB",
        (
            n_columns * tile_width + (n_columns - 1) * gap,
            n_rows * tile_height + (n_rows - 1) * gap,
        ),
        (255, 255, 255),
    )
    for i, row in enumerate(tiles):
        for j, tile in enumerate(row):
            panel.paste(tile, (j * (tile_width + gap), i * (tile_height + gap)))
    panel.save(path)
    logger.info("Panel of %d x %d images written to %s", n_rows, n_columns, path)


def _panel_rows(dataset, pairs, ground_truth_records, outputs):
    """source | driving landmarks | ground truth | one column per output"""
    return [
        [
            dataset.face_tensor(source),
            dataset.landmark_tensor(driving),
            dataset.face_tensor(record),
            *[faces[i] for faces in outputs],
        ]
        for i, ((source, driving), record) in enumerate(
            zip(pairs, ground_truth_records)
        )
    ]


def run_eval_protocol(
    model,
    dataset,
    *,
    drivers_per_identity: int = 400,
    seed: int = 0,
    extractor=None,
    run_hash: str = "",
    batch_size: int = 32,
    panel_path=None,
    panel_rows: int = 4,
) -> EvalReport:
    """Reenact the sampled protocol pairs and score them

    Args
    ----
    model:
        Callable (source faces, source landmarks, driving landmarks) -> reenacted faces on batched tensors
    dataset:
        FaceDataset with a factorial test set
    extractor:
        Feature network of the Frechet distance, by default the seeded fixed
        extractor of the perceptual loss
    panel_path:
        If given, a PNG of the first panel_rows pairs is written with the columns
        source, driving landmarks, ground truth and reenacted face
    """

    extractor = _default_extractor() if extractor is None else extractor
    pairs = sample_drivers(dataset, drivers_per_identity, seed)
    ground_truth_records = _ground_truth_records(dataset, pairs)
    generated = _reenact_pairs(model, dataset, pairs, batch_size)
    ground_truth = dataset.faces(ground_truth_records)

    if panel_path is not None:
        write_panel(
            panel_path,
            _panel_rows(
                dataset,
                pairs[:panel_rows],
                ground_truth_records[:panel_rows],
                [generated],
            ),
        )

    ssim_values = [
        ssim(fake.numpy(), real.numpy()) for fake, real in zip(generated, ground_truth)
    ]
    fid = frechet_distance(
        feature_stats(ground_truth, extractor), feature_stats(generated, extractor)
    )
    report = EvalReport(
        ssim_values=ssim_values,
        ssim_mean=float(np.mean(ssim_values)),
        fid=fid,
        n_samples=len(pairs),
        seed=seed,
        config_hash=run_hash,
    )
    logger.info(
        "Evaluated %d samples: SSIM %.4f, FID %.4f",
        report.n_samples,
        report.ssim_mean,
        report.fid,
    )
    return report


@dataclass
class AblationRow:
    config: str
    ssim: float
    fid: float


@dataclass
class AblationReport:
    rows: List[AblationRow] = field(default_factory=list)

    def write_csv(self, path):
        """Write the table and the published reference values next to it"""
        _write_rows(path, [(row.config, row.ssim, row.fid) for row in self.rows])
        reference = [
            (name, *PUBLISHED_REFERENCE[name]) for name in ABLATION_CONFIGS
        ]
        _write_rows(reference_path(path), reference)


def reference_path(path):
    """Path of the reference table of an ablation table"""
    root, _ = os.path.splitext(path)
    return root + ".reference.csv"


def _write_rows(path, rows):
    with open(path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(["config", "ssim", "fid"])
        for name, ssim_value, fid_value in rows:
            writer.writerow([name, f"{ssim_value:.6f}", f"{fid_value:.6f}"])


def run_ablation(
    dataset,
    config: RunConfig,
    *,
    seed: Optional[int] = None,
    drivers_per_identity: int = 400,
    out_path=None,
    checkpoint_dir=None,
    panel_path=None,
    panel_rows: int = 4,
) -> AblationReport:
    """Train and evaluate the three ablation settings with the same budget and seed.

    vanilla drives G with the raw driving landmarks and the source face, vanilla+T
    adds the landmark transformer, vanilla+T+R is the full pipeline. T and R are
    trained once and shared by the settings that use them. Every setting trains G
    for the same number of epochs, fine tuning epochs included.

    If panel_path is given, a PNG of the first panel_rows protocol pairs is written
    with the columns source, driving landmarks, ground truth and one reenacted face
    per setting.
    """

    if panel_path is not None and panel_rows < 1:
        raise ConfigError(f"A panel needs at least one row, got {panel_rows}")
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    drivers_per_identity = min(
        drivers_per_identity, len(dataset.split_records("test"))
    )

    networks = {}
    for stage in ["T", "R"]:
        checkpoint = train_stage(
            stage,
            config,
            dataset,
            None if checkpoint_dir is None else os.path.join(checkpoint_dir, "shared"),
        )
        networks[stage] = network_from_checkpoint(checkpoint)

    settings = {
        "vanilla": ("vanilla", None, None),
        "vanilla+T": ("vanilla_t", networks["T"], None),
        "vanilla+T+R": (config.g_inputs, networks["T"], networks["R"]),
    }
    panel_pairs = sample_drivers(dataset, drivers_per_identity, config.seed)[:panel_rows]
    panel_outputs = []
    report = AblationReport()
    for name in ABLATION_CONFIGS:
        g_inputs, transformer, rotator = settings[name]
        g_config = dataclasses.replace(config, g_inputs=g_inputs)
        checkpoint = train_stage(
            "G",
            g_config,
            dataset,
            None if checkpoint_dir is None else os.path.join(checkpoint_dir, name),
            networks=networks,
        )
        pipeline = ReenactmentPipeline(
            transformer, rotator, network_from_checkpoint(checkpoint)
        )
        evaluation = run_eval_protocol(
            pipeline,
            dataset,
            drivers_per_identity=drivers_per_identity,
            seed=config.seed,
            run_hash=config_hash(g_config),
        )
        report.rows.append(AblationRow(name, evaluation.ssim_mean, evaluation.fid))
        if panel_path is not None:
            panel_outputs.append(_reenact_pairs(pipeline, dataset, panel_pairs))
        logger.info(
            "Ablation %s: SSIM %.4f, FID %.4f", name, evaluation.ssim_mean, evaluation.fid
        )

    if out_path is not None:
        report.write_csv(out_path)
    if panel_path is not None:
        write_panel(
            panel_path,
            _panel_rows(
                dataset,
                panel_pairs,
                _ground_truth_records(dataset, panel_pairs),
                panel_outputs,
            ),
        )
    return report
