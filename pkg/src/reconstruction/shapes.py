"""Watertight analytic meshes: the reference shapes for voxelizer and end-to-end checks."""
import numpy as np

from .errors import ConfigurationError
from .geometry import Mesh


def icosphere(radius=0.9, subdivisions=4, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected onto a sphere; 20 * 4**subdivisions triangles."""
    t = (1.0 + 5 ** 0.5) / 2.0
    vertices = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    vertices = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in vertices]
    for _ in range(subdivisions):
        midpoints = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = refined
    return Mesh(np.array(vertices) * radius + np.asarray(center), np.array(faces))


def box(lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5)):
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    if np.any(hi <= lo):
        raise ConfigurationError("box needs hi > lo on every axis")
    corners = np.array([[(hi if (i >> axis) & 1 else lo)[axis] for axis in range(3)] for i in range(8)])
    # Corner i has bit 0 = x, bit 1 = y, bit 2 = z; faces wound outward.
    faces = [
        (0, 2, 3), (0, 3, 1),  # z = lo
        (4, 5, 7), (4, 7, 6),  # z = hi
        (0, 1, 5), (0, 5, 4),  # y = lo
        (2, 6, 7), (2, 7, 3),  # y = hi
        (0, 4, 6), (0, 6, 2),  # x = lo
        (1, 3, 7), (1, 7, 5),  # x = hi
    ]
    return Mesh(corners, np.array(faces))


def torus(major=0.6, minor=0.25, segments=96, rings=48):
    """Torus around the z axis."""
    if not 0 < minor < major:
        raise ConfigurationError("torus needs 0 < minor < major")
    u = np.arange(segments) * (2 * np.pi / segments)
    v = np.arange(rings) * (2 * np.pi / rings)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    r = major + minor * np.cos(vv)
    vertices = np.stack([r * np.cos(uu), r * np.sin(uu), minor * np.sin(vv)], axis=-1).reshape(-1, 3)

    i, j = np.meshgrid(np.arange(segments), np.arange(rings), indexing="ij")
    a = i * rings + j
    b = ((i + 1) % segments) * rings + j
    c = ((i + 1) % segments) * rings + (j + 1) % rings
    d = i * rings + (j + 1) % rings
    faces = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])
    return Mesh(vertices, faces)


SHAPES = {
    "sphere": icosphere,
    "box": box,
    "torus": torus,
}


def make_shape(name, **kwargs):
    if name not in SHAPES:
        raise ConfigurationError(f"unknown shape {name!r}; choose from {sorted(SHAPES)}")
    return SHAPES[name](**kwargs)
