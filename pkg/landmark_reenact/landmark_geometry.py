# -*- coding: utf-8 -*-
"""Facial landmark sets, their normalization and the rasterization to landmark
images.

Landmark sets follow the 68 point annotation scheme. Coordinates are normalized
face coordinates in [0, 1]^2 with x pointing right and y pointing down. A landmark
image of resolution R maps the normalized point (x, y) to the continuous pixel
coordinates (x * R, y * R), pixel (row, col) sits at the integer lattice point
(col, row).
"""

# Import python modules.
import json
from dataclasses import dataclass

import numpy as np
import torch

# Import local stuff
from .errors import (
    ConfigError,
    DegenerateLandmarks,
    ParseError,
    PoseOutOfRange,
    ResolutionTooSmall,
    ShapeMismatch,
)

N_LANDMARKS = 68
DEFAULT_MARGIN = 0.1
MIN_RESOLUTION = 16

# Polylines of the 8 facial part groups, each entry is (point indices, closed). The
# inner lip is folded into the lip group.
PART_GROUPS = {
    "jaw": ((tuple(range(0, 17)), False),),
    "right_brow": ((tuple(range(17, 22)), False),),
    "left_brow": ((tuple(range(22, 27)), False),),
    "nose_bridge": ((tuple(range(27, 31)), False),),
    "nose_base": ((tuple(range(31, 36)), False),),
    "right_eye": ((tuple(range(36, 42)), True),),
    "left_eye": ((tuple(range(42, 48)), True),),
    "lips": ((tuple(range(48, 60)), True), (tuple(range(60, 68)), True)),
}


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """68 facial landmarks in normalized face coordinates"""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.shape != (N_LANDMARKS, 2):
            raise ShapeMismatch(
                f"A landmark set needs {N_LANDMARKS} 2D points, got shape {points.shape}"
            )
        if not np.all(np.isfinite(points)):
            raise DegenerateLandmarks("Landmark coordinates have to be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def part_index(self):
        return PART_GROUPS

    def polylines(self):
        """Return a list of (points, closed) tuples, one for each part polyline"""
        return [
            (self.points[list(indices)], closed)
            for group in PART_GROUPS.values()
            for indices, closed in group
        ]


@dataclass(frozen=True)
class AnnotationTriple:
    """Identity, expression and pose label of a face or a landmark set

    The pose is a yaw value in [-1, 1]. The five camera angles of the real dataset
    layout map to -1, -0.5, 0, 0.5 and 1.
    """

    identity: str
    expression: str
    pose: float

    def __post_init__(self):
        check_pose(self.pose)


def check_pose(pose):
    """Raise PoseOutOfRange if a pose value is not in [-1, 1]"""
    pose = np.asarray(pose, dtype=np.float64)
    if not np.all(np.isfinite(pose)) or np.any(np.abs(pose) > 1.0):
        raise PoseOutOfRange(f"Pose values have to be in [-1, 1], got {pose}")


def box_similarity(points, *, margin: float = DEFAULT_MARGIN):
    """Return (lower, scale, offset) of the similarity transform
    p -> (p - lower) * scale + offset that fits the bounding box of the points into
    [margin, 1 - margin]^2"""

    lower = points.min(axis=0)
    extent = points.max(axis=0) - lower
    if np.any(extent <= 0.0):
        raise DegenerateLandmarks(
            f"The landmark bounding box is degenerate, extent {extent}"
        )

    target = 1.0 - 2.0 * margin
    scale = target / extent.max()
    offset = margin + 0.5 * (target - extent * scale)
    return lower, scale, offset


def normalize_landmarks(raw_points, *, margin: float = DEFAULT_MARGIN) -> LandmarkSet:
    """Map landmarks with a similarity transform into the normalized face box.

    The larger side of the landmark bounding box spans [margin, 1 - margin], the
    smaller side is centered, so the aspect ratio and the relative geometry are
    preserved.

    Args
    ----
    raw_points:
        68 x 2 array of point coordinates, e.g., pixel coordinates
    margin:
        Distance between the normalized bounding box and the unit square
    """

    if not 0.0 <= margin < 0.5:
        raise ConfigError(f"The margin has to be in [0, 0.5), got {margin}")

    points = np.array(raw_points, dtype=np.float64)
    if points.shape != (N_LANDMARKS, 2):
        raise ShapeMismatch(
            f"A landmark set needs {N_LANDMARKS} 2D points, got shape {points.shape}"
        )
    if not np.all(np.isfinite(points)):
        raise DegenerateLandmarks("Landmark coordinates have to be finite")

    lower, scale, offset = box_similarity(points, margin=margin)

    # Already normalized sets are returned unchanged, this makes the normalization
    # exactly idempotent.
    shift = offset - lower * scale
    if abs(scale - 1.0) <= 1e-12 and np.all(np.abs(shift) <= 1e-12):
        return LandmarkSet(points)

    return LandmarkSet((points - lower) * scale + offset)


def landmark_distance(lms_1: LandmarkSet, lms_2: LandmarkSet) -> float:
    """Mean Euclidean distance between corresponding landmarks"""
    return float(np.mean(np.linalg.norm(lms_1.points - lms_2.points, axis=1)))


def _segment_coverage(start, end, u, v, half_width, antialias):
    """Coverage of the pixel lattice (u, v) by a single stroke segment

    Without anti-aliasing the segment is half open: it has a round cap at the start
    point and no cap at the end point. Consecutive segments of a polyline therefore
    do not draw their shared vertex twice. With anti-aliasing the coverage falls off
    linearly over one pixel at the stroke boundary.
    """

    direction = end - start
    length2 = direction @ direction
    du = u - start[0]
    dv = v - start[1]
    if length2 > 0.0:
        t = (du * direction[0] + dv * direction[1]) / length2
    else:
        t = np.zeros_like(u)

    if antialias:
        t_clamped = np.clip(t, 0.0, 1.0)
        distance = np.hypot(du - t_clamped * direction[0], dv - t_clamped * direction[1])
        return np.clip(half_width + 0.5 - distance, 0.0, 1.0)

    t_clamped = np.maximum(t, 0.0)
    distance = np.hypot(du - t_clamped * direction[0], dv - t_clamped * direction[1])
    inside = (distance <= half_width) & (t < 1.0)
    return inside.astype(np.float64)


def rasterize_polylines(
    polylines, resolution: int, *, width: float = 1.0, antialias: bool = True
) -> np.ndarray:
    """Draw polylines onto a zero single channel canvas.

    Args
    ----
    polylines:
        Iterable of (points, closed) tuples, points in normalized coordinates
    resolution:
        Side length R of the square output image
    width:
        Stroke width in pixels
    antialias:
        Flag if the stroke boundary is anti-aliased

    Return
    ----
    R x R float64 array with values in [0, 1]
    """

    v, u = np.mgrid[0:resolution, 0:resolution].astype(np.float64)
    image = np.zeros((resolution, resolution), dtype=np.float64)
    half_width = 0.5 * width

    for points, closed in polylines:
        pixel_points = np.asarray(points, dtype=np.float64) * resolution
        if closed and len(pixel_points) > 2:
            pixel_points = np.vstack([pixel_points, pixel_points[:1]])
        if len(pixel_points) == 1:
            pixel_points = np.vstack([pixel_points, pixel_points])
        for start, end in zip(pixel_points[:-1], pixel_points[1:]):
            image = np.maximum(
                image, _segment_coverage(start, end, u, v, half_width, antialias)
            )

    return np.clip(image, 0.0, 1.0)


def render_landmark_image(
    lms: LandmarkSet,
    resolution: int,
    *,
    width: float = None,
    antialias: bool = True,
) -> np.ndarray:
    """Render a landmark image from a normalized landmark set.

    Args
    ----
    lms:
        Normalized landmark set
    resolution:
        Side length R of the landmark image, at least 16
    width:
        Stroke width in pixels, defaults to R / 64
    antialias:
        Flag if the strokes are anti-aliased
    """

    if resolution < MIN_RESOLUTION:
        raise ResolutionTooSmall(
            f"Landmark images need a resolution of at least {MIN_RESOLUTION}, "
            f"got {resolution}"
        )
    if width is None:
        width = resolution / 64.0
    return rasterize_polylines(
        lms.polylines(), resolution, width=width, antialias=antialias
    )


def image_l1(a, b):
    """Mean absolute pixel difference between two images of the same shape

    Torch tensors are compared with torch (the result keeps the autograd graph),
    everything else is compared in float64 numpy.
    """

    if tuple(a.shape) != tuple(b.shape):
        raise ShapeMismatch(
            f"Images have different shapes {tuple(a.shape)} and {tuple(b.shape)}"
        )
    if isinstance(a, torch.Tensor) or isinstance(b, torch.Tensor):
        return (torch.as_tensor(a) - torch.as_tensor(b)).abs().mean()
    return float(
        np.mean(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))
    )


def load_landmarks(path) -> np.ndarray:
    """Load a landmark file, a JSON array of 68 [x, y] pixel coordinate pairs"""

    try:
        with open(path, "r") as landmark_file:
            data = json.load(landmark_file)
    except json.JSONDecodeError as error:
        raise ParseError(f"Malformed landmark file {path}: {error}") from error

    try:
        points = np.array(data, dtype=np.float64)
    except (TypeError, ValueError) as error:
        raise ParseError(f"Malformed landmark file {path}: {error}") from error
    if points.shape != (N_LANDMARKS, 2):
        raise ParseError(
            f"Landmark file {path} has to contain {N_LANDMARKS} [x, y] pairs, "
            f"got shape {points.shape}"
        )
    return points


def save_landmarks(path, points) -> None:
    """Write landmark pixel coordinates as a JSON array of [x, y] pairs"""
    points = np.asarray(points, dtype=np.float64)
    data = [[round(float(x), 6), round(float(y), 6)] for x, y in points]
    with open(path, "w") as landmark_file:
        json.dump(data, landmark_file)
