# -*- coding: utf-8 -*-
"""Parametric synthetic faces with complete identity x expression x pose ground
truth.

A canonical 3D template of the 68 landmarks (plus a few head outline points) is
shaped by the identity parameters, deformed by the expression parameters, rotated
about the vertical axis by the yaw, projected orthographically and normalized. The
template is built for one half of the face and mirrored, so symmetric parameters
give exactly mirror symmetric faces.
"""

# Import python modules.
import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image, ImageDraw

# Import local stuff
from .errors import ParamOutOfRange, PairingError
from .landmark_geometry import (
    DEFAULT_MARGIN,
    N_LANDMARKS,
    LandmarkSet,
    box_similarity,
    normalize_landmarks,
    rasterize_polylines,
)

IDENTITY_RANGES = (
    ("width_ratio", 0.8, 1.2),
    ("eye_spacing", 0.8, 1.2),
    ("nose_length", 0.8, 1.2),
    ("jaw_curvature", 0.0, 1.0),
    ("skin_tone", 0.0, 1.0),
    ("eye_color", 0.0, 1.0),
)
EXPRESSION_RANGES = (
    ("mouth_open", 0.0, 1.0),
    ("corner_lift", -1.0, 1.0),
    ("brow_raise", -1.0, 1.0),
    ("eye_open", 0.0, 1.0),
)

# Expression vectors of the eight expression classes of the real dataset layout.
EXPRESSION_PRESETS = {
    "neutral": (0.05, 0.0, 0.0, 0.6),
    "happy": (0.35, 0.9, 0.1, 0.5),
    "sad": (0.0, -0.7, 0.3, 0.45),
    "surprised": (0.9, 0.0, 1.0, 1.0),
    "angry": (0.1, -0.3, -0.9, 0.75),
    "fearful": (0.55, -0.3, 0.8, 0.95),
    "disgusted": (0.2, -0.5, -0.6, 0.3),
    "contemptuous": (0.0, 0.35, -0.2, 0.55),
}

# Yaw angle of the pose value 1.
MAX_YAW_DEGREES = 60.0

# Sub samples per pixel side of the filled shapes, odd so the canvas center is a
# sample row and column.
SUPERSAMPLE = 5

# Landmark pairs that are mirror images of each other, all other landmarks lie on
# the vertical midline.
MIRROR_PAIRS = (
    [(i, 16 - i) for i in range(8)]
    + [(17, 26), (18, 25), (19, 24), (20, 23), (21, 22)]
    + [(31, 35), (32, 34)]
    + [(36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46)]
    + [(48, 54), (49, 53), (50, 52), (59, 55), (58, 56)]
    + [(60, 64), (61, 63), (67, 65)]
)
MIDLINE = (8, 27, 28, 29, 30, 33, 51, 57, 62, 66)

# Number of head outline points (forehead arc from one temple to the other).
N_FOREHEAD = 9


def _mirror_index():
    """Index array mapping each landmark to its mirror landmark"""
    mirror = np.arange(N_LANDMARKS)
    for i, j in MIRROR_PAIRS:
        mirror[i] = j
        mirror[j] = i
    return mirror


MIRROR_INDEX = _mirror_index()


@dataclass(frozen=True)
class SynthFaceParams:
    """Parameters of a synthetic face

    Args
    ----
    identity_vector:
        (width_ratio, eye_spacing, nose_length, jaw_curvature, skin_tone, eye_color)
    expression_vector:
        (mouth_open, corner_lift, brow_raise, eye_open)
    yaw:
        Head yaw in [-1, 1], 1 corresponds to MAX_YAW_DEGREES
    """

    identity_vector: tuple
    expression_vector: tuple
    yaw: float = 0.0

    def __post_init__(self):
        identity = tuple(float(value) for value in self.identity_vector)
        expression = tuple(float(value) for value in self.expression_vector)
        object.__setattr__(self, "identity_vector", identity)
        object.__setattr__(self, "expression_vector", expression)
        object.__setattr__(self, "yaw", float(self.yaw))

        for values, ranges, kind in [
            (identity, IDENTITY_RANGES, "identity"),
            (expression, EXPRESSION_RANGES, "expression"),
        ]:
            if len(values) != len(ranges):
                raise ParamOutOfRange(
                    f"The {kind} vector needs {len(ranges)} entries, got {len(values)}"
                )
            for value, (name, lower, upper) in zip(values, ranges):
                if not lower <= value <= upper:
                    raise ParamOutOfRange(
                        f"{kind} parameter {name}={value} not in [{lower}, {upper}]"
                    )
        if not -1.0 <= self.yaw <= 1.0:
            raise ParamOutOfRange(f"yaw={self.yaw} not in [-1, 1]")


def random_identity_vector(rng: np.random.Generator) -> tuple:
    """Draw an identity vector uniformly from the parameter ranges"""
    return tuple(float(rng.uniform(lower, upper)) for _, lower, upper in IDENTITY_RANGES)


def _template_3d(params: SynthFaceParams):
    """Return the shaped and deformed 3D template.

    The first 68 rows are the landmarks, the following rows are the forehead
    outline. The face looks along +z, x points right (subject's left) and y down.
    """

    width, eye_spacing, nose_length, jaw_curvature = params.identity_vector[:4]
    mouth_open, corner_lift, brow_raise, eye_open = params.expression_vector

    points = np.zeros((N_LANDMARKS, 3))

    # Jaw from the right temple down to the chin.
    for i in range(9):
        phi = 0.5 * np.pi * i / 8
        cos_phi = max(np.cos(phi), 0.0)
        points[i] = [
            -(cos_phi ** (1.0 - 0.5 * jaw_curvature)),
            -0.25 + 1.2 * np.sin(phi),
            -0.9 * cos_phi,
        ]

    # Right eye and brow.
    eye_x, eye_y = -0.38 * eye_spacing, -0.3
    eye_height = 0.07 * (0.25 + 0.75 * eye_open)
    points[36:42] = [
        [eye_x - 0.16, eye_y, -0.2],
        [eye_x - 0.06, eye_y - eye_height, -0.15],
        [eye_x + 0.06, eye_y - eye_height, -0.15],
        [eye_x + 0.16, eye_y, -0.1],
        [eye_x + 0.06, eye_y + 0.8 * eye_height, -0.15],
        [eye_x - 0.06, eye_y + 0.8 * eye_height, -0.15],
    ]
    for j in range(5):
        points[17 + j] = [
            eye_x - 0.22 + 0.11 * j,
            -0.52 - 0.08 * brow_raise - 0.05 * np.sin(np.pi * j / 4),
            -0.15 + 0.025 * j,
        ]

    # Nose bridge and base.
    for j in range(4):
        points[27 + j] = [0.0, -0.28 + 0.14 * nose_length * j, 0.1 + 0.4 * j / 3]
    nose_base = -0.28 + 0.5 * nose_length
    points[31] = [-0.14, nose_base - 0.02, 0.15]
    points[32] = [-0.07, nose_base + 0.01, 0.25]
    points[33] = [0.0, nose_base + 0.03, 0.3]

    # Mouth, the gap between the inner lips grows with the mouth opening.
    mouth_y = 0.55
    corner_y = mouth_y - 0.06 * corner_lift
    gap = 0.02 + 0.2 * mouth_open
    drop = 0.8 * (gap - 0.02)
    points[48] = [-0.3, corner_y, 0.0]
    points[49] = [-0.18, mouth_y - 0.07, 0.08]
    points[50] = [-0.07, mouth_y - 0.09, 0.1]
    points[51] = [0.0, mouth_y - 0.08, 0.1]
    points[57] = [0.0, mouth_y + 0.1 + drop, 0.1]
    points[58] = [-0.07, mouth_y + 0.09 + drop, 0.1]
    points[59] = [-0.18, mouth_y + 0.07 + drop, 0.08]
    points[60] = [-0.24, corner_y, 0.02]
    points[61] = [-0.09, mouth_y - 0.02, 0.08]
    points[62] = [0.0, mouth_y - 0.02, 0.08]
    points[66] = [0.0, mouth_y - 0.02 + gap, 0.08]
    points[67] = [-0.09, mouth_y - 0.02 + gap, 0.08]

    # Fill the left half by mirroring, the midline gets x = 0 exactly.
    for i, j in MIRROR_PAIRS:
        points[j] = points[i] * [-1.0, 1.0, 1.0]
    points[list(MIDLINE), 0] = 0.0

    # Forehead arc, symmetric by construction of the sample angles.
    forehead = np.zeros((N_FOREHEAD, 3))
    for k in range(N_FOREHEAD):
        psi = np.pi * (k + 1) / (N_FOREHEAD + 1)
        forehead[k] = [np.cos(psi), -0.25 - 0.6 * np.sin(psi), -0.9 * abs(np.cos(psi))]
    for k in range(N_FOREHEAD // 2):
        forehead[N_FOREHEAD - 1 - k] = forehead[k] * [-1.0, 1.0, 1.0]
    forehead[N_FOREHEAD // 2, 0] = 0.0

    template = np.vstack([points, forehead])
    template[:, 0] *= width
    return template


def _project(template, yaw):
    """Rotate the template about the vertical axis and project it orthographically"""
    theta = np.deg2rad(MAX_YAW_DEGREES) * yaw
    cos_theta, sin_theta = np.cos(theta), np.sin(theta)
    x = template[:, 0] * cos_theta + template[:, 2] * sin_theta
    return np.stack([x, template[:, 1]], axis=1)


def _posed_geometry(params: SynthFaceParams, margin: float):
    """Return the normalized landmark set and the normalized forehead outline"""
    projected = _project(_template_3d(params), params.yaw)
    landmarks = normalize_landmarks(projected[:N_LANDMARKS], margin=margin)
    lower, scale, offset = box_similarity(projected[:N_LANDMARKS], margin=margin)
    forehead = (projected[N_LANDMARKS:] - lower) * scale + offset
    return landmarks, forehead


def synth_landmarks(
    params: SynthFaceParams, *, margin: float = DEFAULT_MARGIN
) -> LandmarkSet:
    """Return the normalized landmark set of a synthetic face"""
    landmarks, _ = _posed_geometry(params, margin)
    return landmarks


def _canvas_points(points, size):
    """Normalized points in the coordinates of a canvas with pixel centers at
    integers"""
    return [(x * size - 0.5, y * size - 0.5) for x, y in np.asarray(points)]


def _supersampled_coverage(draw_shape, resolution):
    """Coverage of a shape drawn on a supersampled canvas, averaged over the sub
    samples of each pixel"""
    size = resolution * SUPERSAMPLE
    canvas = Image.new("L", (size, size), 0)
    draw_shape(ImageDraw.Draw(canvas), size)
    mask = np.asarray(canvas, dtype=np.float64) / 255.0
    return mask.reshape(resolution, SUPERSAMPLE, resolution, SUPERSAMPLE).mean(
        axis=(1, 3)
    )


def _polygon_coverage(polygon, resolution):
    """Anti-aliased coverage of a filled polygon"""
    return _supersampled_coverage(
        lambda draw, size: draw.polygon(_canvas_points(polygon, size), fill=255),
        resolution,
    )


def _stroke_coverage(points, resolution, width, closed=False):
    """Anti-aliased stroke with pixel centers at (col + 0.5, row + 0.5) / R"""
    shifted = np.asarray(points) - 0.5 / resolution
    return rasterize_polylines([(shifted, closed)], resolution, width=width)


def _disk_coverage(center, radius, resolution):
    """Anti-aliased disk, center and radius in normalized coordinates"""

    def draw_disk(draw, size):
        (x, y), r = _canvas_points([center], size)[0], radius * size
        draw.ellipse([x - r, y - r, x + r, y + r], fill=255)

    return _supersampled_coverage(draw_disk, resolution)


def _blend(image, coverage, color):
    alpha = coverage[..., None]
    return image * (1.0 - alpha) + np.asarray(color) * alpha


def render_synthetic_face(
    params: SynthFaceParams, resolution: int, *, margin: float = DEFAULT_MARGIN
) -> np.ndarray:
    """Render a synthetic face image from its parameters.

    The renderer draws a skin colored head, eyes with identity colored irises,
    brows, nose and mouth from the same posed geometry as synth_landmarks.

    Return
    ----
    resolution x resolution x 3 float64 array with values in [0, 1]
    """

    landmarks, forehead = _posed_geometry(params, margin)
    points = landmarks.points
    skin_tone, eye_color = params.identity_vector[4:]

    skin = (1.0 - skin_tone) * np.array([0.96, 0.80, 0.69]) + skin_tone * np.array(
        [0.45, 0.30, 0.20]
    )
    iris = (1.0 - eye_color) * np.array([0.25, 0.45, 0.75]) + eye_color * np.array(
        [0.35, 0.22, 0.10]
    )
    stroke_width = resolution / 64.0

    image = np.empty((resolution, resolution, 3))
    image[:] = [0.2, 0.22, 0.25]

    head = np.vstack([points[0:17], forehead])
    image = _blend(image, _polygon_coverage(head, resolution), skin)

    for eye in [points[36:42], points[42:48]]:
        eye_coverage = _polygon_coverage(eye, resolution)
        image = _blend(image, eye_coverage, [0.95, 0.95, 0.95])
        eye_height = np.ptp(eye[:, 1])
        iris_coverage = _disk_coverage(
            eye.mean(axis=0), max(0.6 * eye_height, 0.5 / resolution), resolution
        )
        image = _blend(image, iris_coverage * eye_coverage, iris)

    for brow in [points[17:22], points[22:27]]:
        image = _blend(
            image, _stroke_coverage(brow, resolution, 2.0 * stroke_width), 0.35 * skin
        )
    for nose in [points[27:31], points[31:36]]:
        image = _blend(
            image, _stroke_coverage(nose, resolution, stroke_width), 0.7 * skin
        )

    lip_color = 0.5 * skin + 0.5 * np.array([0.75, 0.3, 0.3])
    image = _blend(image, _polygon_coverage(points[48:60], resolution), lip_color)
    image = _blend(
        image, _polygon_coverage(points[60:68], resolution), [0.25, 0.05, 0.05]
    )

    return np.clip(image, 0.0, 1.0)


def image_key(image) -> str:
    """Hash of an image, equal for the float32 numpy and the tensor version of it"""
    if isinstance(image, torch.Tensor):
        image = image.detach().cpu().numpy()
    array = np.ascontiguousarray(np.asarray(image, dtype=np.float32))
    return hashlib.sha1(array.tobytes()).hexdigest()


class SyntheticOracle:
    """Exact stand-ins for the three stages on a factorial synthetic dataset.

    Faces and landmark images are recognized by their content hash. The oracle
    works on batched channel-first tensors, as the networks do.

    Args
    ----
    dataset:
        FaceDataset with complete identity x expression x pose coverage
    """

    def __init__(self, dataset):
        self.dataset = dataset
        self._faces = {}
        self._landmarks = {}
        for record in dataset.records:
            self._faces.setdefault(image_key(dataset.face_tensor(record)), record)
            self._landmarks.setdefault(
                image_key(dataset.landmark_tensor(record)), record
            )

    def _lookup(self, table, image, kind):
        record = table.get(image_key(image))
        if record is None:
            raise PairingError(f"The oracle does not know this {kind} image")
        return record

    def _ground_truth(self, identity, motion_record, tensor):
        record = self.dataset.find(identity, motion_record.expression, motion_record.pose)
        if record is None:
            raise PairingError(
                f"No ground truth for identity {identity}, expression "
                f"{motion_record.expression}, pose {motion_record.pose}"
            )
        return tensor(record)

    def transform(self, source_landmarks, driving_landmarks):
        """Oracle landmark transformer"""
        outputs = []
        for source, driving in zip(source_landmarks, driving_landmarks):
            source_record = self._lookup(self._landmarks, source, "landmark")
            driving_record = self._lookup(self._landmarks, driving, "landmark")
            outputs.append(
                self._ground_truth(
                    source_record.identity, driving_record, self.dataset.landmark_tensor
                )
            )
        return torch.stack(outputs).to(driving_landmarks)

    def rotate(self, source_faces, pose_references):
        """Ground truth face of the source identity with the motion of the reference"""
        outputs = []
        for face, reference in zip(source_faces, pose_references):
            source_record = self._lookup(self._faces, face, "face")
            reference_record = self._lookup(self._landmarks, reference, "landmark")
            outputs.append(
                self._ground_truth(
                    source_record.identity, reference_record, self.dataset.face_tensor
                )
            )
        return torch.stack(outputs).to(source_faces)

    def __call__(self, source_faces, source_landmarks, driving_landmarks):
        """Ground truth reenactment"""
        return self.rotate(source_faces, driving_landmarks)
