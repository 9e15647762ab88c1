# -*- coding: utf-8 -*-
"""Face datasets with identity, expression and pose annotations.

On disk a dataset has the layout

    <root>/images/<identity>/<expression>_<pose>.png
    <root>/landmarks/<identity>/<expression>_<pose>.json
    <root>/identities.json

where identities.json holds the identity disjoint splits {"train": [...], "test":
[...]}. Synthetic datasets write the pose as a signed value with two decimals, the
real dataset layout uses the camera angles 000 to 180 and the multi view layout
the camera labels 110 to 240 of a 15 degree yaw ring, for example 051 for the
frontal camera.
"""

# Import python modules.
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import torch
from PIL import Image

# Import local stuff
from .errors import ConfigError, IngestError, ParseError, SplitError
from .landmark_geometry import (
    AnnotationTriple,
    LandmarkSet,
    load_landmarks,
    normalize_landmarks,
    render_landmark_image,
    save_landmarks,
)
from .synthetic_faces import (
    EXPRESSION_PRESETS,
    SynthFaceParams,
    random_identity_vector,
    render_synthetic_face,
    synth_landmarks,
)

logger = logging.getLogger(__name__)

MODES = ("synthetic", "rafd-layout", "multiview-layout")
RAFD_ANGLES = {"000": -1.0, "045": -0.5, "090": 0.0, "135": 0.5, "180": 1.0}
IDENTITIES_FILE = "identities.json"
POSE_DECIMALS = 6

# Yaw in degrees of the cameras on the horizontal ring of the multi view layout,
# +-90 degrees map to the poses +-1.
MULTIVIEW_YAW_DEGREES = {
    "110": -90,
    "120": -75,
    "090": -60,
    "080": -45,
    "130": -30,
    "140": -15,
    "051": 0,
    "050": 15,
    "041": 30,
    "190": 45,
    "200": 60,
    "010": 75,
    "240": 90,
}
CAMERA_POSES = {
    "rafd-layout": RAFD_ANGLES,
    "multiview-layout": {
        token: round(yaw / 90.0, POSE_DECIMALS)
        for token, yaw in MULTIVIEW_YAW_DEGREES.items()
    },
}


def _camera_poses(mode):
    if mode not in MODES:
        raise ConfigError(f"Unknown dataset mode {mode}, expected one of {MODES}")
    return CAMERA_POSES.get(mode)


def pose_token(pose: float, mode: str = "synthetic") -> str:
    """File name token of a pose value"""
    cameras = _camera_poses(mode)
    if cameras is None:
        return f"{pose:+.2f}"
    for token, value in cameras.items():
        if abs(value - pose) <= 0.5 * 10.0**-POSE_DECIMALS:
            return token
    raise ParseError(f"Pose {pose} has no camera in the {mode} dataset layout")


def parse_pose_token(token: str, mode: str = "synthetic") -> float:
    """Pose value of a file name token"""
    cameras = _camera_poses(mode)
    if cameras is not None:
        if token not in cameras:
            raise ParseError(
                f"Unknown camera {token} in the {mode} layout, expected one of "
                f"{list(cameras)}"
            )
        return cameras[token]
    try:
        pose = float(token)
    except ValueError as error:
        raise ParseError(f"Invalid pose token {token}") from error
    if not -1.0 <= pose <= 1.0:
        raise ParseError(f"Pose token {token} is not in [-1, 1]")
    return pose


@dataclass(frozen=True)
class SampleRecord:
    """One face image with its landmarks and annotation"""

    annotation: AnnotationTriple
    face_path: Optional[str] = None
    landmark_path: Optional[str] = None

    @property
    def identity(self):
        return self.annotation.identity

    @property
    def expression(self):
        return self.annotation.expression

    @property
    def pose(self):
        return self.annotation.pose


def _key(identity, expression, pose):
    return (identity, expression, round(float(pose), POSE_DECIMALS))


def load_face_image(path, resolution: Optional[int] = None) -> np.ndarray:
    """Read an RGB image as a float64 H x W x 3 array in [0, 1]"""
    with Image.open(path) as image:
        image = image.convert("RGB")
        if resolution is not None and image.size != (resolution, resolution):
            image = image.resize((resolution, resolution), Image.BILINEAR)
        return np.asarray(image, dtype=np.float64) / 255.0


def save_image(path, image) -> None:
    """Write an image in [0, 1] (H x W, H x W x 3 or C x H x W) as 8 bit PNG"""
    if isinstance(image, torch.Tensor):
        image = image.detach().cpu().numpy()
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[0] in (1, 3) and image.shape[-1] not in (1, 3):
        image = np.moveaxis(image, 0, -1)
    if image.ndim == 3 and image.shape[-1] == 1:
        image = image[..., 0]
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(pixels).save(path)


class FaceDataset:
    """Indexed face dataset with identity disjoint train and test splits.

    Faces and landmark sets are either held in memory or read from the record
    paths. Rendered landmark images and tensors are cached.

    Args
    ----
    records:
        All samples of the dataset
    train_ids, test_ids:
        Identity disjoint splits
    resolution:
        Side length of faces and landmark images
    faces:
        Optional in memory face images per record
    landmark_sets:
        Normalized landmark set per record
    """

    def __init__(
        self,
        records: Sequence[SampleRecord],
        *,
        train_ids: Sequence[str],
        test_ids: Sequence[str],
        resolution: int,
        landmark_sets: Dict[SampleRecord, LandmarkSet],
        faces: Optional[Dict[SampleRecord, np.ndarray]] = None,
    ):
        overlap = set(train_ids) & set(test_ids)
        if overlap:
            raise SplitError(
                f"Identities {sorted(overlap)} are in the train and the test split"
            )

        self.records = sorted(
            records, key=lambda r: (r.identity, r.expression, r.pose)
        )
        self.train_ids = sorted(train_ids)
        self.test_ids = sorted(test_ids)
        self.resolution = resolution
        self.identity_index = {name: i for i, name in enumerate(self.train_ids)}

        self._landmark_sets = dict(landmark_sets)
        self._faces = {} if faces is None else dict(faces)
        self._landmark_images = {}
        self._face_tensors = {}
        self._landmark_tensors = {}
        self._index = {
            _key(r.identity, r.expression, r.pose): r for r in self.records
        }
        self._by_identity = {}
        for record in self.records:
            self._by_identity.setdefault(record.identity, []).append(record)

    def __len__(self):
        return len(self.records)

    @property
    def identities(self):
        return sorted(self._by_identity)

    @property
    def expressions(self):
        return sorted({record.expression for record in self.records})

    @property
    def poses(self):
        return sorted({record.pose for record in self.records})

    def split_records(self, split: str):
        """Records of the "train" or "test" identities"""
        if split == "train":
            identities = self.train_ids
        elif split == "test":
            identities = self.test_ids
        else:
            raise ConfigError(f"Unknown split {split}")
        return [
            record
            for identity in identities
            for record in self._by_identity.get(identity, [])
        ]

    def identity_records(self, identity):
        return list(self._by_identity.get(identity, []))

    def find(self, identity, expression, pose) -> Optional[SampleRecord]:
        """Record with the given annotation or None"""
        return self._index.get(_key(identity, expression, pose))

    def landmark_set(self, record) -> LandmarkSet:
        return self._landmark_sets[record]

    def landmark_image(self, record) -> np.ndarray:
        if record not in self._landmark_images:
            self._landmark_images[record] = render_landmark_image(
                self._landmark_sets[record], self.resolution
            )
        return self._landmark_images[record]

    def face_image(self, record) -> np.ndarray:
        if record in self._faces:
            return self._faces[record]
        return load_face_image(record.face_path, self.resolution)

    def face_tensor(self, record) -> torch.Tensor:
        """3 x R x R float32 face"""
        if record not in self._face_tensors:
            face = self.face_image(record)
            self._face_tensors[record] = torch.from_numpy(
                np.ascontiguousarray(face.transpose(2, 0, 1))
            ).float()
        return self._face_tensors[record]

    def landmark_tensor(self, record) -> torch.Tensor:
        """1 x R x R float32 landmark image"""
        if record not in self._landmark_tensors:
            self._landmark_tensors[record] = torch.from_numpy(
                self.landmark_image(record)[None]
            ).float()
        return self._landmark_tensors[record]

    def faces(self, records) -> torch.Tensor:
        return torch.stack([self.face_tensor(record) for record in records])

    def landmarks(self, records) -> torch.Tensor:
        return torch.stack([self.landmark_tensor(record) for record in records])


def read_identities(root):
    """Read the train and test identity lists of a dataset"""
    path = os.path.join(root, IDENTITIES_FILE)
    if not os.path.isfile(path):
        raise IngestError(f"Missing identity split file {path}")
    try:
        with open(path, "r") as identities_file:
            data = json.load(identities_file)
    except json.JSONDecodeError as error:
        raise ParseError(f"Malformed identity split file {path}: {error}") from error
    if not isinstance(data, dict) or set(data) != {"train", "test"}:
        raise ParseError(f"{path} has to contain exactly the keys 'train' and 'test'")
    overlap = set(data["train"]) & set(data["test"])
    if overlap:
        raise SplitError(
            f"Identities {sorted(overlap)} are in the train and the test split of {path}"
        )
    return list(data["train"]), list(data["test"])


def ingest_dataset(
    root, mode: str = "synthetic", *, resolution: Optional[int] = None
) -> FaceDataset:
    """Index a dataset tree.

    All landmark files are parsed and normalized, face images are read lazily.

    Args
    ----
    root:
        Dataset root directory
    mode:
        "synthetic", "rafd-layout" or "multiview-layout", selects the pose token format
    resolution:
        Resolution faces are resized to, by default the size of the first image
    """

    if mode not in MODES:
        raise ConfigError(f"Unknown dataset mode {mode}, expected one of {MODES}")
    train_ids, test_ids = read_identities(root)

    images_dir = os.path.join(root, "images")
    if not os.path.isdir(images_dir):
        raise IngestError(f"Missing image directory {images_dir}")

    records = []
    landmark_sets = {}
    for identity in sorted(os.listdir(images_dir)):
        identity_dir = os.path.join(images_dir, identity)
        if not os.path.isdir(identity_dir):
            continue
        for file_name in sorted(os.listdir(identity_dir)):
            stem, extension = os.path.splitext(file_name)
            if extension.lower() != ".png":
                continue
            if "_" not in stem:
                raise ParseError(
                    f"Image name {file_name} does not follow <expression>_<pose>.png"
                )
            expression, token = stem.rsplit("_", 1)
            pose = parse_pose_token(token, mode)
            landmark_path = os.path.join(root, "landmarks", identity, stem + ".json")
            if not os.path.isfile(landmark_path):
                raise IngestError(f"Missing landmark file {landmark_path}")

            record = SampleRecord(
                AnnotationTriple(identity, expression, pose),
                face_path=os.path.join(identity_dir, file_name),
                landmark_path=landmark_path,
            )
            records.append(record)
            landmark_sets[record] = normalize_landmarks(load_landmarks(landmark_path))

    found = {record.identity for record in records}
    missing = (set(train_ids) | set(test_ids)) - found
    if missing:
        raise IngestError(f"Identities {sorted(missing)} of the split have no images")
    unused = found - set(train_ids) - set(test_ids)
    if unused:
        logger.warning("Identities %s are in neither split", sorted(unused))

    if resolution is None:
        if len(records) == 0:
            raise IngestError(f"The dataset {root} contains no images")
        with Image.open(records[0].face_path) as image:
            resolution = image.size[0]

    logger.info(
        "Ingested %d samples of %d identities from %s", len(records), len(found), root
    )
    return FaceDataset(
        records,
        train_ids=train_ids,
        test_ids=test_ids,
        resolution=resolution,
        landmark_sets=landmark_sets,
    )


def default_test_count(n_ids: int) -> int:
    """Number of held out identities with the 55 / 12 split ratio of the real data"""
    return max(1, int(round(n_ids * 12 / 67)))


def synthetic_grid(n_ids, n_expr, n_poses, seed, *, n_test=None):
    """Factorial grid of synthetic face parameters

    Return
    ----
    (grid, train_ids, test_ids), grid is a list of (AnnotationTriple,
    SynthFaceParams)
    """

    if n_ids < 2:
        raise ConfigError(f"A synthetic dataset needs at least 2 identities, got {n_ids}")
    if not 1 <= n_expr <= len(EXPRESSION_PRESETS):
        raise ConfigError(
            f"The number of expressions has to be in [1, {len(EXPRESSION_PRESETS)}]"
        )
    if n_poses < 1:
        raise ConfigError(f"At least one pose is needed, got {n_poses}")
    n_test = default_test_count(n_ids) if n_test is None else n_test
    if not 1 <= n_test < n_ids:
        raise ConfigError(f"Invalid number of test identities {n_test} for {n_ids} ids")

    rng = np.random.default_rng(seed)
    identities = [f"id{i:03d}" for i in range(n_ids)]
    identity_vectors = [random_identity_vector(rng) for _ in identities]
    test_index = sorted(rng.choice(n_ids, size=n_test, replace=False).tolist())
    test_ids = [identities[i] for i in test_index]
    train_ids = [name for name in identities if name not in test_ids]

    expressions = list(EXPRESSION_PRESETS)[:n_expr]
    if n_poses == 1:
        poses = [0.0]
    else:
        poses = [round(float(p), 2) for p in np.linspace(-1.0, 1.0, n_poses)]

    grid = []
    for identity, identity_vector in zip(identities, identity_vectors):
        for expression in expressions:
            for pose in poses:
                grid.append(
                    (
                        AnnotationTriple(identity, expression, pose),
                        SynthFaceParams(
                            identity_vector, EXPRESSION_PRESETS[expression], pose
                        ),
                    )
                )
    return grid, train_ids, test_ids


def build_synthetic_dataset(
    n_ids: int = 8,
    n_expr: int = 8,
    n_poses: int = 5,
    resolution: int = 64,
    seed: int = 0,
    *,
    n_test: Optional[int] = None,
) -> FaceDataset:
    """Synthetic dataset held in memory"""

    grid, train_ids, test_ids = synthetic_grid(
        n_ids, n_expr, n_poses, seed, n_test=n_test
    )
    records = []
    faces = {}
    landmark_sets = {}
    for annotation, params in grid:
        record = SampleRecord(annotation)
        records.append(record)
        faces[record] = render_synthetic_face(params, resolution)
        landmark_sets[record] = synth_landmarks(params)
    return FaceDataset(
        records,
        train_ids=train_ids,
        test_ids=test_ids,
        resolution=resolution,
        landmark_sets=landmark_sets,
        faces=faces,
    )


def generate_synthetic_dataset(
    n_ids: int,
    n_expr: int,
    n_poses: int,
    resolution: int,
    seed: int,
    out_root,
    *,
    n_test: Optional[int] = None,
):
    """Render a synthetic dataset in the ingestion layout

    Return
    ----
    Number of written image and landmark pairs
    """

    grid, train_ids, test_ids = synthetic_grid(
        n_ids, n_expr, n_poses, seed, n_test=n_test
    )
    for annotation, params in grid:
        stem = f"{annotation.expression}_{pose_token(annotation.pose)}"
        image_dir = os.path.join(out_root, "images", annotation.identity)
        landmark_dir = os.path.join(out_root, "landmarks", annotation.identity)
        os.makedirs(image_dir, exist_ok=True)
        os.makedirs(landmark_dir, exist_ok=True)
        save_image(
            os.path.join(image_dir, stem + ".png"),
            render_synthetic_face(params, resolution),
        )
        save_landmarks(
            os.path.join(landmark_dir, stem + ".json"),
            synth_landmarks(params).points * resolution,
        )

    with open(os.path.join(out_root, IDENTITIES_FILE), "w") as identities_file:
        json.dump({"train": train_ids, "test": test_ids}, identities_file, indent=2)
    logger.info("Wrote %d synthetic samples to %s", len(grid), out_root)
    return len(grid)
