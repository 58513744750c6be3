"""File formats: meshes in, voxel grids and models in and out, logs and reports.

VOXB (voxel grid):  b"VOXB", u32 N, then ceil(N^3 / 8) bytes of occupancy
                    packed LSB-first in x-fastest order.
NASV (model):       b"NASV", u8 version, u8 L, L x (u16 width, u8 activation
                    code), then f32 parameters layer by layer (weights
                    row-major out x in, then biases), output head last.
All integers and floats are little-endian.
"""
import json
import logging
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .geometry import Mesh, VoxelGrid, voxel_centers
from .nas import CandidateRecord
from .neuralnet import Activation, ActivationKind, ArchSpec, Layer, MlpNetwork, parameter_count

logger = logging.getLogger(__name__)

VOXB_MAGIC = b"VOXB"
NASV_MAGIC = b"NASV"
NASV_VERSION = 1

_STL_RECORD = np.dtype([("normal", "<f4", (3,)), ("v", "<f4", (3, 3)), ("attr", "<u2")])


# --- voxel grids -----------------------------------------------------------

def encode_voxels(grid):
    header = VOXB_MAGIC + struct.pack("<I", grid.resolution)
    return header + np.packbits(grid.bits, bitorder="little").tobytes()


def decode_voxels(payload):
    if payload[:4] != VOXB_MAGIC or len(payload) < 8:
        raise FormatError("not a VOXB file")
    (n,) = struct.unpack_from("<I", payload, 4)
    expected = -(-n ** 3 // 8)
    body = np.frombuffer(payload, dtype=np.uint8, offset=8)
    if n < 1 or len(body) != expected:
        raise FormatError(f"VOXB payload is {len(body)} bytes, expected {expected} for N={n}")
    bits = np.unpackbits(body, bitorder="little", count=n ** 3).astype(bool)
    return VoxelGrid.from_bits(bits, n)


def write_voxels(path, grid):
    Path(path).write_bytes(encode_voxels(grid))


def read_voxels(path):
    return decode_voxels(_read_bytes(path))


# --- models ----------------------------------------------------------------

def encode_model(net):
    parts = [NASV_MAGIC, struct.pack("<BB", NASV_VERSION, net.arch.depth)]
    for layer in net.arch.hidden:
        parts.append(struct.pack("<HB", layer.width, int(layer.activation.kind)))
    parts.append(np.concatenate([p.ravel() for p in net.parameters()]).astype("<f4").tobytes())
    return b"".join(parts)


def decode_model(payload):
    if payload[:4] != NASV_MAGIC or len(payload) < 6:
        raise FormatError("not a NASV file")
    version, depth = struct.unpack_from("<BB", payload, 4)
    if version != NASV_VERSION:
        raise FormatError(f"format version mismatch: expected {NASV_VERSION}, got {version}")
    offset = 6
    layers = []
    for _ in range(depth):
        width, code = struct.unpack_from("<HB", payload, offset)
        offset += 3
        try:
            layers.append(Layer(width, Activation(ActivationKind(code))))
        except ValueError:
            raise FormatError(f"unknown activation code {code}")
    arch = ArchSpec(tuple(layers))
    values = np.frombuffer(payload, dtype="<f4", offset=offset).astype(np.float64)
    if len(values) != parameter_count(arch):
        raise FormatError(f"expected {parameter_count(arch)} parameters for {arch}, found {len(values)}")
    net = MlpNetwork.zeros(arch)
    chunks, start = [], 0
    for p in net.parameters():
        chunks.append(values[start:start + p.size])
        start += p.size
    net.load_parameters(chunks)
    return net


def write_model(path, net):
    Path(path).write_bytes(encode_model(net))


def read_model(path):
    return decode_model(_read_bytes(path))


# --- meshes ----------------------------------------------------------------

def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"Failed to read {path}: {e}")


def parse_obj(text):
    """Vertices and faces of an ASCII OBJ; polygons are fan-triangulated, other records ignored."""
    vertices, triangles = [], []
    for number, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if fields[0] == "v" and len(fields) < 4:
            raise FormatError(f"OBJ line {number}: vertex needs 3 coordinates")
        try:
            if fields[0] == "v":
                vertices.append([float(v) for v in fields[1:4]])
            elif fields[0] == "f":
                refs = [int(f.split("/")[0]) for f in fields[1:]]
                refs = [r - 1 if r > 0 else len(vertices) + r for r in refs]
                triangles.extend([refs[0], refs[i], refs[i + 1]] for i in range(1, len(refs) - 1))
        except ValueError:
            raise FormatError(f"OBJ line {number}: cannot parse {line.strip()!r}")
    if not vertices or not triangles:
        raise FormatError("OBJ file has no faces")
    return Mesh(np.array(vertices), np.array(triangles)).validate()


def _weld(corners):
    """Merge identical corner positions into an indexed mesh."""
    vertices, inverse = np.unique(corners.reshape(-1, 3), axis=0, return_inverse=True)
    return Mesh(vertices, inverse.reshape(-1, 3))


def parse_stl(payload):
    if len(payload) >= 84:
        (count,) = struct.unpack_from("<I", payload, 80)
        if len(payload) == 84 + count * _STL_RECORD.itemsize:
            records = np.frombuffer(payload, dtype=_STL_RECORD, count=count, offset=84)
            if count == 0:
                raise FormatError("STL file has no triangles")
            return _weld(records["v"].astype(np.float64)).validate()
    if payload.lstrip()[:5] == b"solid":
        corners = [
            [float(v) for v in line.split()[1:4]]
            for line in payload.decode("ascii", errors="replace").splitlines()
            if line.strip().startswith("vertex")
        ]
        if corners and len(corners) % 3 == 0:
            return _weld(np.array(corners)).validate()
    raise FormatError("not a valid STL file")


def read_mesh(path):
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return parse_obj(_read_bytes(path).decode("utf-8", errors="replace"))
    if suffix == ".stl":
        return parse_stl(_read_bytes(path))
    raise FormatError(f"unsupported mesh format {suffix!r}; use .obj or .stl")


def write_obj(path, mesh):
    with open(path, "w") as f:
        f.write(f"# {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles\n")
        np.savetxt(f, mesh.vertices, fmt="v %.9g %.9g %.9g")
        np.savetxt(f, mesh.triangles + 1, fmt="f %d %d %d")


def write_stl(path, mesh):
    records = np.zeros(len(mesh.triangles), dtype=_STL_RECORD)
    corners = mesh.vertices[mesh.triangles]
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    records["normal"] = np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)
    records["v"] = corners
    with open(path, "wb") as f:
        f.write(b"binary STL".ljust(80, b"\0"))
        f.write(struct.pack("<I", len(records)))
        f.write(records.tobytes())


def write_mesh(path, mesh):
    suffix = Path(path).suffix.lower()
    if suffix == ".stl":
        write_stl(path, mesh)
    elif suffix == ".obj":
        write_obj(path, mesh)
    else:
        raise FormatError(f"unsupported mesh format {suffix!r}; use .obj or .stl")


# --- grid export -------------------------------------------------------------

# Face corners of the unit cube, counter-clockwise seen from outside, per face normal.
_CUBE_FACES = {
    (1, 0, 0): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    (-1, 0, 0): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    (0, 1, 0): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    (0, -1, 0): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    (0, 0, 1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
    (0, 0, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
}


def grid_to_cube_mesh(grid):
    """Voxel cubes in normalized space, keeping only faces between occupied and empty cells."""
    occ = grid.occupancy
    padded = np.pad(occ, 1, mode="constant", constant_values=False)
    n = grid.resolution
    quads = []
    for (dx, dy, dz), corners in _CUBE_FACES.items():
        neighbour = padded[1 + dx:1 + dx + n, 1 + dy:1 + dy + n, 1 + dz:1 + dz + n]
        cells = np.argwhere(occ & ~neighbour)
        if len(cells):
            quads.append(cells[:, None, :] + np.array(corners)[None, :, :])
    if not quads:
        raise FormatError("grid has no occupied voxels to export")
    quads = np.concatenate(quads)
    triangles = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]])
    mesh = _weld(triangles)
    mesh.vertices = mesh.vertices * grid.pitch - 1.0
    return mesh


def write_points(path, grid):
    np.savetxt(path, voxel_centers(grid.resolution, grid.occupied_indices()), fmt="%.8f")


def export_grid(path, grid, fmt="obj"):
    if fmt == "obj":
        write_obj(path, grid_to_cube_mesh(grid))
    elif fmt == "points":
        write_points(path, grid)
    else:
        raise FormatError(f"unknown export format {fmt!r}")


# --- logs and reports ------------------------------------------------------

def write_candidate_log(path, records, header):
    with open(path, "w") as f:
        f.write(json.dumps({"type": "header", **header}, sort_keys=True) + "\n")
        for record in records:
            f.write(json.dumps({"type": "candidate", **record.to_dict()}, sort_keys=True) + "\n")


def read_candidate_log(path):
    header, records = {}, []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise FormatError(f"Failed to read {path}: {e}")
    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            if entry.get("type") == "header":
                header = entry
            else:
                records.append(CandidateRecord.from_dict(entry))
        except (ValueError, KeyError) as e:
            raise FormatError(f"candidate log line {number}: {e}")
    return header, records


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise FormatError(f"Failed to read {path}: {e}")
