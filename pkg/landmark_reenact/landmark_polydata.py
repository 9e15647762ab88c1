# -*- coding: utf-8 -*-
"""Export landmark sets as pyvista poly data."""

# Import python modules.
import numpy as np
import pyvista as pv

# Import local stuff
from .landmark_geometry import PART_GROUPS, LandmarkSet


def landmark_polydata(lms: LandmarkSet, *, z: float = 0.0) -> pv.PolyData:
    """Return the part polylines of a landmark set as a pyvista PolyData.

    Every polyline of a part group becomes one line cell, closed polylines repeat
    their first point id. The point data "part_id" holds the index of the part group
    of each landmark, the point data "landmark_id" the landmark index.

    Args
    ----
    lms:
        Landmark set in normalized coordinates
    z:
        Out of plane coordinate of all points
    """

    points = np.zeros((len(lms.points), 3))
    points[:, :2] = lms.points
    points[:, 2] = z

    part_id = np.zeros(len(lms.points), dtype=int)
    lines = []
    for i_part, group in enumerate(PART_GROUPS.values()):
        for indices, closed in group:
            part_id[list(indices)] = i_part
            cell = list(indices) + ([indices[0]] if closed else [])
            lines.extend([len(cell)] + cell)

    poly = pv.PolyData(points, lines=np.array(lines, dtype=int))
    poly.point_data["part_id"] = part_id
    poly.point_data["landmark_id"] = np.arange(len(lms.points))
    return poly
