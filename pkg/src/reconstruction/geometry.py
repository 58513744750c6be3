"""Meshes, normalization, voxelization and boundary (support) voxels.

Voxel grids cover the normalized domain [-1, 1]^3 split into N^3 cells.
Occupancy arrays are indexed ``[x, y, z]``; flat voxel indices run
x-fastest, then y, then z (``x + N*y + N*N*z``).
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_RADIUS, MIN_RESOLUTION
from .errors import GeometryError, SupportWarning, VoxelizationWarning

logger = logging.getLogger(__name__)

# Fraction of voxels on which the three axis votes may disagree before we warn.
VOTE_DISAGREEMENT_LIMIT = 0.05

# Constant sub-pitch offset of every ray origin, in units of the voxel pitch.
# Keeps rays off shared triangle edges of axis-aligned and symmetric meshes.
_RAY_JITTER = (1.3e-5, 2.9e-5)


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)

    def validate(self):
        if len(self.vertices) < 3:
            raise GeometryError("mesh needs at least 3 vertices")
        if len(self.triangles) < 1:
            raise GeometryError("mesh needs at least 1 triangle")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise GeometryError("triangle index out of range")
        if not np.all(np.isfinite(self.vertices)):
            raise GeometryError("mesh has non-finite vertices")
        return self

    def translated(self, offset):
        return Mesh(self.vertices + np.asarray(offset, dtype=np.float64), self.triangles.copy())

    def __repr__(self):
        return f"<Mesh {len(self.vertices)} vertices, {len(self.triangles)} triangles>"


@dataclass
class VoxelGrid:
    """Binary occupancy over N^3 voxels, indexed ``occupancy[x, y, z]``."""

    occupancy: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.ndim != 3 or len(set(occ.shape)) != 1 or occ.shape[0] < 1:
            raise GeometryError(f"occupancy must be a cube, got shape {occ.shape}")
        self.occupancy = occ

    @property
    def resolution(self):
        return self.occupancy.shape[0]

    @property
    def pitch(self):
        return 2.0 / self.resolution

    @property
    def bits(self):
        """Occupancy flattened in x-fastest order."""
        return self.occupancy.ravel(order="F")

    @classmethod
    def from_bits(cls, bits, resolution):
        bits = np.asarray(bits, dtype=bool)
        if bits.size != resolution ** 3:
            raise GeometryError(f"expected {resolution ** 3} bits, got {bits.size}")
        return cls(bits.reshape((resolution,) * 3, order="F"))

    @classmethod
    def empty(cls, resolution):
        return cls(np.zeros((resolution,) * 3, dtype=bool))

    def occupied_count(self):
        return int(self.occupancy.sum())

    def occupied_indices(self):
        return np.flatnonzero(self.bits)

    def centers(self, indices=None):
        return voxel_centers(self.resolution, indices)

    def labels_at(self, indices):
        return self.bits[np.asarray(indices, dtype=np.int64)]

    def __eq__(self, other):
        return isinstance(other, VoxelGrid) and np.array_equal(self.occupancy, other.occupancy)

    def __repr__(self):
        return f"<VoxelGrid N={self.resolution} occupied={self.occupied_count()}>"


@dataclass
class SupportSet:
    """Surface voxels and the unoccupied layer that touches them (flat indices)."""

    surface: np.ndarray
    outer: np.ndarray
    resolution: int = field(default=0)

    @property
    def indices(self):
        return np.concatenate([self.surface, self.outer])

    def __len__(self):
        return len(self.surface) + len(self.outer)


def voxel_centers(resolution, indices=None):
    """Centers of voxels in normalized space, shape (n, 3).

    With ``indices`` None, all N^3 centers in flat x-fastest order.
    """
    coords = -1.0 + (np.arange(resolution) + 0.5) * (2.0 / resolution)
    if indices is None:
        indices = np.arange(resolution ** 3)
    x, y, z = np.unravel_index(np.asarray(indices, dtype=np.int64), (resolution,) * 3, order="F")
    return np.stack([coords[x], coords[y], coords[z]], axis=1)


def position_to_index(positions, resolution):
    """Inverse of :func:`voxel_centers` for points inside the domain."""
    cells = np.floor((np.asarray(positions) + 1.0) * (resolution / 2.0)).astype(np.int64)
    cells = np.clip(cells, 0, resolution - 1)
    return np.ravel_multi_index((cells[:, 0], cells[:, 1], cells[:, 2]), (resolution,) * 3, order="F")


def normalize_mesh(mesh, radius=DEFAULT_RADIUS):
    """Center the mesh on its bounding-box center and scale it so the farthest vertex sits at ``radius``."""
    mesh.validate()
    if not 0.0 < radius <= 1.0:
        raise GeometryError(f"radius must lie in (0, 1], got {radius}")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    centered = mesh.vertices - (lo + hi) / 2.0
    extent = np.sqrt((centered ** 2).sum(axis=1)).max()
    if extent == 0.0:
        raise GeometryError("zero extent")
    return Mesh(centered * (radius / extent), mesh.triangles.copy())


def _axis_crossings(vertices, triangles, resolution, axis):
    """Parity of +axis ray crossings for every voxel center, indexed [x, y, z]."""
    n = resolution
    pitch = 2.0 / n
    u_axis, v_axis = [a for a in range(3) if a != axis]
    centers = -1.0 + (np.arange(n) + 0.5) * pitch
    ju, jv = _RAY_JITTER[0] * pitch, _RAY_JITTER[1] * pitch

    tri = vertices[triangles]  # (T, 3 corners, 3 coords)
    tu, tv, ta = tri[:, :, u_axis], tri[:, :, v_axis], tri[:, :, axis]

    # Range of ray rows/columns whose origin lies inside each triangle's (u, v) bounding box.
    i0 = np.clip(np.ceil((tu.min(axis=1) - ju + 1.0) / pitch - 0.5), 0, n).astype(np.int64)
    i1 = np.clip(np.floor((tu.max(axis=1) - ju + 1.0) / pitch - 0.5), -1, n - 1).astype(np.int64)
    j0 = np.clip(np.ceil((tv.min(axis=1) - jv + 1.0) / pitch - 0.5), 0, n).astype(np.int64)
    j1 = np.clip(np.floor((tv.max(axis=1) - jv + 1.0) / pitch - 0.5), -1, n - 1).astype(np.int64)
    ni = np.maximum(i1 - i0 + 1, 0)
    nj = np.maximum(j1 - j0 + 1, 0)
    counts = ni * nj

    diff = np.zeros((n, n, n + 1), dtype=np.int32)
    total = int(counts.sum())
    if total:
        owner = np.repeat(np.arange(len(triangles)), counts)
        local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        ri = i0[owner] + local // nj[owner]
        rj = j0[owner] + local % nj[owner]
        pu = centers[ri] + ju
        pv = centers[rj] + jv

        au, bu, cu = tu[owner, 0], tu[owner, 1], tu[owner, 2]
        av, bv, cv = tv[owner, 0], tv[owner, 1], tv[owner, 2]
        denom = (bu - au) * (cv - av) - (cu - au) * (bv - av)
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = ((pu - au) * (cv - av) - (cu - au) * (pv - av)) / denom
            l2 = ((bu - au) * (pv - av) - (pu - au) * (bv - av)) / denom
            # Triangles seen edge-on give inf or nan here; denom != 0 drops them.
            l0 = 1.0 - l1 - l2
            hit = (denom != 0.0) & (l0 > 0.0) & (l1 > 0.0) & (l2 > 0.0)

        owner, ri, rj = owner[hit], ri[hit], rj[hit]
        h = l0[hit] * ta[owner, 0] + l1[hit] * ta[owner, 1] + l2[hit] * ta[owner, 2]
        # Every voxel center below the hit point sees one more crossing.
        k = np.searchsorted(centers, h, side="left")
        np.add.at(diff, (ri, rj, np.zeros_like(k)), 1)
        np.add.at(diff, (ri, rj, k), -1)

    parity = (np.cumsum(diff, axis=2)[:, :, :n] % 2).astype(bool)  # [u, v, a]
    order = [0, 0, 0]
    order[u_axis], order[v_axis], order[axis] = 0, 1, 2
    return np.transpose(parity, order)


def voxelize(mesh, resolution):
    """Occupancy of voxel centers by ray parity, majority-voted over the three axes."""
    if resolution < MIN_RESOLUTION:
        raise GeometryError(f"resolution ≥ {MIN_RESOLUTION}")
    mesh.validate()
    votes = [_axis_crossings(mesh.vertices, mesh.triangles, resolution, axis) for axis in range(3)]
    tally = votes[0].astype(np.int8) + votes[1] + votes[2]
    occupancy = tally >= 2

    disagreement = float(np.mean((tally == 1) | (tally == 2)))
    if disagreement > VOTE_DISAGREEMENT_LIMIT:
        message = f"axis votes disagree on {disagreement:.1%} of voxels; mesh may not be watertight"
        logger.warning(message)
        warnings.warn(message, VoxelizationWarning, stacklevel=2)

    if not occupancy.any():
        raise GeometryError("voxelization produced empty model")
    grid = VoxelGrid(occupancy)
    logger.info("voxelized %s at N=%d: %d occupied", mesh, resolution, grid.occupied_count())
    return grid


def _any_neighbor(mask, outside):
    """True where at least one of the six face neighbours is True; out-of-grid cells read ``outside``."""
    padded = np.pad(mask, 1, mode="constant", constant_values=outside)
    c = slice(1, -1)
    return (
        padded[:-2, c, c] | padded[2:, c, c]
        | padded[c, :-2, c] | padded[c, 2:, c]
        | padded[c, c, :-2] | padded[c, c, 2:]
    )


def surface_mask(occupancy):
    """Occupied voxels with an unoccupied (or out-of-grid) 6-neighbour."""
    occupancy = np.asarray(occupancy, dtype=bool)
    return occupancy & _any_neighbor(~occupancy, outside=True)


def surface_indices(grid):
    return np.flatnonzero(surface_mask(grid.occupancy).ravel(order="F"))


def support_set(grid):
    if not grid.occupancy.any():
        raise GeometryError("support set needs at least one occupied voxel")
    surface = surface_mask(grid.occupancy)
    outer = ~grid.occupancy & _any_neighbor(surface, outside=False)
    support = SupportSet(
        surface=np.flatnonzero(surface.ravel(order="F")),
        outer=np.flatnonzero(outer.ravel(order="F")),
        resolution=grid.resolution,
    )
    if len(support.outer) == 0:
        message = "grid is fully occupied; support set has no outer layer"
        logger.warning(message)
        warnings.warn(message, SupportWarning, stacklevel=2)
    return support
