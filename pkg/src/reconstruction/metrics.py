"""Reconstruction quality: voxel IoU and Chamfer distance between surface voxels.

Chamfer distance is the mean squared nearest-neighbour distance from each
surface to the other, summed over both directions and multiplied by 1000.
Distances are measured between voxel centers in normalized [-1, 1] space
unless ``index_space`` asks for raw voxel indices.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import MetricError
from .geometry import surface_indices, voxel_centers

logger = logging.getLogger(__name__)

CD_SCALE = 1000.0


@dataclass
class ReportMetrics:
    iou: float
    cd: Optional[float]
    size: int
    resolution: int
    runtime_seconds: float = 0.0
    compression_ratio: Optional[float] = None

    def to_dict(self):
        return {
            "iou": self.iou,
            "cd_x1000": self.cd,
            "size": self.size,
            "resolution": self.resolution,
            "runtime_seconds": self.runtime_seconds,
            "compression_ratio": self.compression_ratio,
        }


def _check_resolutions(pred, gt):
    if pred.resolution != gt.resolution:
        raise MetricError(f"resolution mismatch: {pred.resolution} vs {gt.resolution}")


def iou(pred, gt):
    _check_resolutions(pred, gt)
    union = np.count_nonzero(pred.occupancy | gt.occupancy)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred.occupancy & gt.occupancy) / union


def surface_points(grid, index_space=False):
    indices = surface_indices(grid)
    if index_space:
        return np.stack(np.unravel_index(indices, (grid.resolution,) * 3, order="F"), axis=1).astype(np.float64)
    return voxel_centers(grid.resolution, indices)


def _mean_squared_nearest(points, tree):
    distances, _ = tree.query(points, k=1)
    return float(np.mean(distances ** 2))


def chamfer(pred, gt, index_space=False):
    _check_resolutions(pred, gt)
    a = surface_points(pred, index_space)
    b = surface_points(gt, index_space)
    if len(a) == 0 or len(b) == 0:
        raise MetricError("undefined CD")
    return (_mean_squared_nearest(a, cKDTree(b)) + _mean_squared_nearest(b, cKDTree(a))) * CD_SCALE


def evaluate_reconstruction(pred, gt, size=0, runtime_seconds=0.0):
    """IoU and Chamfer of a reconstruction; ``cd`` is None when either surface is empty."""
    try:
        cd = chamfer(pred, gt)
    except MetricError as e:
        logger.warning("chamfer distance skipped: %s", e)
        cd = None
    return ReportMetrics(
        iou=iou(pred, gt),
        cd=cd,
        size=size,
        resolution=gt.resolution,
        runtime_seconds=runtime_seconds,
    )
