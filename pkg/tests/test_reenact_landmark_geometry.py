# -*- coding: utf-8 -*-
"""Test the functionality of landmark_geometry"""

import os
import numpy as np
import pytest
import torch

from landmark_reenact.errors import (
    ConfigError,
    DegenerateLandmarks,
    ParseError,
    PoseOutOfRange,
    ResolutionTooSmall,
    ShapeMismatch,
)
from landmark_reenact.landmark_geometry import (
    AnnotationTriple,
    LandmarkSet,
    image_l1,
    landmark_distance,
    load_landmarks,
    normalize_landmarks,
    rasterize_polylines,
    render_landmark_image,
    save_landmarks,
)
from landmark_reenact.synthetic_faces import EXPRESSION_PRESETS, SynthFaceParams
from landmark_reenact.synthetic_faces import synth_landmarks

from . import TESTING_INPUT


def _raw_landmarks():
    return load_landmarks(os.path.join(TESTING_INPUT, "landmarks_256px.json"))


def test_reenact_landmark_geometry_normalize_box():
    """Normalized landmarks span [margin, 1 - margin] along the larger side of the
    bounding box and are centered along the smaller side"""

    lms = normalize_landmarks(_raw_landmarks(), margin=0.1)
    lower = lms.points.min(axis=0)
    upper = lms.points.max(axis=0)

    assert np.max(upper - lower) == pytest.approx(0.8, abs=1e-12)
    assert np.allclose(0.5 * (lower + upper), 0.5, atol=1e-12)
    assert np.all(lms.points >= 0.1 - 1e-12)
    assert np.all(lms.points <= 0.9 + 1e-12)


def test_reenact_landmark_geometry_normalize_idempotent():
    """Normalizing an already normalized landmark set returns it unchanged"""

    once = normalize_landmarks(_raw_landmarks())
    twice = normalize_landmarks(once.points)
    assert np.array_equal(once.points, twice.points)

    synthetic = synth_landmarks(SynthFaceParams((1.0,) * 3 + (0.5,) * 3, (0.2, 0, 0, 0.5)))
    assert np.array_equal(normalize_landmarks(synthetic.points).points, synthetic.points)


@pytest.mark.parametrize("scale,shift", [(0.5, (3.0, -7.0)), (4.0, (-100.0, 20.0))])
def test_reenact_landmark_geometry_normalize_similarity_invariance(scale, shift):
    """Scaled and translated copies of a landmark set normalize to the same set"""

    raw = _raw_landmarks()
    reference = normalize_landmarks(raw)
    moved = normalize_landmarks(scale * raw + np.array(shift))
    assert np.allclose(moved.points, reference.points, atol=1e-9)


def test_reenact_landmark_geometry_normalize_errors():
    """Degenerate, non finite and wrongly shaped inputs raise"""

    raw = _raw_landmarks()

    with pytest.raises(DegenerateLandmarks):
        normalize_landmarks(np.ones((68, 2)))

    flat = raw.copy()
    flat[:, 1] = 3.0
    with pytest.raises(DegenerateLandmarks):
        normalize_landmarks(flat)

    not_finite = raw.copy()
    not_finite[5, 0] = np.nan
    with pytest.raises(DegenerateLandmarks):
        normalize_landmarks(not_finite)

    with pytest.raises(ShapeMismatch):
        normalize_landmarks(raw[:60])

    with pytest.raises(ConfigError):
        normalize_landmarks(raw, margin=0.5)


def test_reenact_landmark_geometry_rasterize_segment():
    """A horizontal two point part without anti-aliasing sets exactly the pixels it
    passes, the end pixel belongs to the next segment"""

    segment = np.array([[0.25, 0.5], [0.75, 0.5]])
    image = rasterize_polylines([(segment, False)], 8, width=1.0, antialias=False)

    expected = np.zeros((8, 8))
    expected[4, 2:6] = 1.0
    assert np.array_equal(image, expected)


def test_reenact_landmark_geometry_render_pixel_shift():
    """Translating all landmarks by an integer number of pixels shifts the landmark
    image by the same number of columns"""

    resolution = 64
    k = 3
    points = synth_landmarks(
        SynthFaceParams((1.0, 1.0, 1.0, 0.5, 0.5, 0.5), EXPRESSION_PRESETS["happy"], 0.0)
    ).points
    # Dyadic coordinates keep the shifted pixel coordinates exact.
    points = np.round(points * 256.0) / 256.0
    shifted = points + np.array([k / resolution, 0.0])

    image = render_landmark_image(LandmarkSet(points), resolution, antialias=False)
    image_shifted = render_landmark_image(
        LandmarkSet(shifted), resolution, antialias=False
    )

    assert np.all(image[:, -k:] == 0.0)
    assert np.all(image_shifted[:, :k] == 0.0)
    assert np.array_equal(image_shifted[:, k:], image[:, :-k])


@pytest.mark.parametrize("antialias", [True, False])
def test_reenact_landmark_geometry_render_properties(antialias):
    """Landmark images are deterministic and in [0, 1]"""

    lms = normalize_landmarks(_raw_landmarks())
    image = render_landmark_image(lms, 64, antialias=antialias)

    assert image.shape == (64, 64)
    assert image.min() >= 0.0 and image.max() <= 1.0
    assert image.max() >= 0.5
    assert np.array_equal(image, render_landmark_image(lms, 64, antialias=antialias))


def test_reenact_landmark_geometry_render_resolution_too_small():
    """Landmark images below the minimum resolution are rejected"""
    with pytest.raises(ResolutionTooSmall):
        render_landmark_image(normalize_landmarks(_raw_landmarks()), 8)


def test_reenact_landmark_geometry_image_l1():
    """Mean absolute pixel difference on the trivial cases and against a brute force
    sum"""

    rng = np.random.default_rng(1)
    a = rng.random((16, 16))
    b = rng.random((16, 16))

    assert image_l1(a, a) == 0.0
    assert image_l1(np.zeros((16, 16)), np.ones((16, 16))) == 1.0

    brute_force = 0.0
    for i in range(16):
        for j in range(16):
            brute_force += abs(a[i, j] - b[i, j])
    assert abs(image_l1(a, b) - brute_force / 256.0) <= 1e-12

    with pytest.raises(ShapeMismatch):
        image_l1(a, b[:8])


def test_reenact_landmark_geometry_image_l1_torch():
    """Torch inputs give a differentiable tensor"""

    a = torch.rand(2, 1, 8, 8, dtype=torch.float64, requires_grad=True)
    b = torch.rand(2, 1, 8, 8, dtype=torch.float64)
    value = image_l1(a, b)
    value.backward()

    assert isinstance(value, torch.Tensor)
    assert value.item() == pytest.approx(
        image_l1(a.detach().numpy(), b.numpy()), abs=1e-12
    )
    assert torch.allclose(a.grad, torch.sign(a.detach() - b) / a.numel())


def test_reenact_landmark_geometry_distance():
    """Mean Euclidean landmark distance"""
    lms = normalize_landmarks(_raw_landmarks())
    moved = LandmarkSet(lms.points + np.array([0.03, 0.04]))
    assert landmark_distance(lms, lms) == 0.0
    assert landmark_distance(lms, moved) == pytest.approx(0.05, abs=1e-12)


def test_reenact_landmark_geometry_io(tmp_path):
    """Landmark files are read and written as JSON arrays of [x, y] pairs"""

    raw = _raw_landmarks()
    assert raw.shape == (68, 2)

    path = os.path.join(tmp_path, "landmarks.json")
    save_landmarks(path, raw)
    assert np.allclose(load_landmarks(path), raw, atol=1e-6)

    for name in ["landmarks_malformed.json", "landmarks_too_few.json"]:
        with pytest.raises(ParseError):
            load_landmarks(os.path.join(TESTING_INPUT, name))


def test_reenact_landmark_geometry_annotation_pose():
    """Annotations with a pose outside of [-1, 1] are rejected"""
    assert AnnotationTriple("id000", "happy", -1.0).pose == -1.0
    with pytest.raises(PoseOutOfRange):
        AnnotationTriple("id000", "happy", 1.5)
