# -*- coding: utf-8 -*-
"""Test the functionality of landmark_polydata"""

import os
import numpy as np
import pyvista

from landmark_reenact.landmark_geometry import PART_GROUPS, normalize_landmarks
from landmark_reenact.landmark_geometry import load_landmarks
from landmark_reenact.landmark_polydata import landmark_polydata

from . import TESTING_INPUT


def test_reenact_landmark_polydata(tmp_path):
    """Every part polyline becomes one line cell, closed parts repeat their first
    point"""

    lms = normalize_landmarks(
        load_landmarks(os.path.join(TESTING_INPUT, "landmarks_256px.json"))
    )
    poly = landmark_polydata(lms, z=0.5)

    assert poly.n_points == 68
    assert poly.n_lines == sum(len(group) for group in PART_GROUPS.values())
    assert np.allclose(poly.points[:, :2], lms.points)
    assert np.all(poly.points[:, 2] == 0.5)
    assert np.array_equal(poly.point_data["landmark_id"], np.arange(68))
    assert set(poly.point_data["part_id"]) == set(range(len(PART_GROUPS)))

    # Right eye, closed polyline of the landmarks 36 to 41.
    lines = poly.lines
    offset = 0
    cells = []
    while offset < len(lines):
        n = lines[offset]
        cells.append(list(lines[offset + 1 : offset + 1 + n]))
        offset += n + 1
    assert [36, 37, 38, 39, 40, 41, 36] in cells
    assert list(range(0, 17)) in cells

    path = os.path.join(tmp_path, "landmarks.vtp")
    poly.save(path)
    assert pyvista.read(path).n_points == 68
