"""Class-balanced training sets with the boundary band oversampled.

A quarter of the voxels outside the support band is drawn at random; the
support voxels (surface plus outer layer) are replicated until they match
that count, so K = 2 * floor(O / 4) where O is the non-support voxel count.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .config import SamplingConfig
from .errors import SamplingError
from .geometry import voxel_centers

logger = logging.getLogger(__name__)


@dataclass
class TrainingSet:
    positions: np.ndarray
    labels: np.ndarray
    indices: np.ndarray
    seed: int
    resolution: int
    non_support_count: int

    @property
    def K(self):
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def to_dict(self):
        return {
            "K": self.K,
            "seed": self.seed,
            "resolution": self.resolution,
            "non_support_count": self.non_support_count,
            "occupied_fraction": float(self.labels.mean()) if self.K else 0.0,
        }

    def dump_csv(self, path):
        """Debug dump, one ``x,y,z,label`` row per sample."""
        rows = np.column_stack([self.positions, self.labels])
        np.savetxt(path, rows, delimiter=",", header="x,y,z,label", comments="", fmt=["%.8f"] * 3 + ["%d"])


def build_training_set(grid, support, seed=None, cfg=None):
    cfg = cfg or SamplingConfig()
    seed = cfg.seed if seed is None else seed
    support_indices = support.indices
    if len(support_indices) == 0:
        raise SamplingError("no boundary")

    total = grid.resolution ** 3
    in_support = np.zeros(total, dtype=bool)
    in_support[support_indices] = True
    non_support = np.flatnonzero(~in_support)
    o = len(non_support)
    if o < 4:
        raise SamplingError("grid too small")
    quarter = o // 4

    rng = np.random.default_rng(seed)
    drawn = rng.choice(non_support, size=quarter, replace=cfg.non_support_replacement)

    # Whole-set replication, then a seeded top-up without replacement.
    repeats, remainder = divmod(quarter, len(support_indices))
    copies = np.concatenate([
        np.tile(support_indices, repeats),
        rng.choice(support_indices, size=remainder, replace=False),
    ])

    indices = np.concatenate([drawn, copies]).astype(np.int64)
    labels = grid.bits[indices].astype(np.uint8)
    logger.info(
        "training set: K=%d (%d non-support of O=%d, %d support copies of %d)",
        len(indices), quarter, o, len(copies), len(support_indices),
    )
    return TrainingSet(
        positions=voxel_centers(grid.resolution, indices),
        labels=labels,
        indices=indices,
        seed=seed,
        resolution=grid.resolution,
        non_support_count=o,
    )
