"""Vector/matrix math, triangle meshes, transforms, cameras, and a minimal OBJ loader.

Conventions, fixed repo-wide:

* Column vectors: a point transforms as ``p' = M @ (x, y, z, 1)``.
* Right-handed world space, +Y is up.
* View space looks down -Z (camera forward maps to -Z).
* NDC is the cube [-1, 1]^3; the near plane maps to z = -1, the far
  plane to z = +1.
* All angles are radians, all lengths are scene world units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

WORLD_UP = np.array([0.0, 1.0, 0.0])


class ObjParseError(ValueError):
    """Raised for malformed OBJ input; carries the 1-based source line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def vec3(x, y=None, z=None) -> np.ndarray:
    if y is None:
        return np.asarray(x, dtype=np.float64)
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
    if n == 0.0:
        raise ValueError("cannot normalize zero-length vector")
    return v / n


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def identity() -> np.ndarray:
    return np.eye(4, dtype=np.float64)


def translation(v) -> np.ndarray:
    m = identity()
    m[:3, 3] = v
    return m


def scaling(s) -> np.ndarray:
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (3,))
    m = identity()
    m[0, 0], m[1, 1], m[2, 2] = s
    return m


def rotation_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    m = identity()
    m[1, 1], m[1, 2] = c, -s
    m[2, 1], m[2, 2] = s, c
    return m


def rotation_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    m = identity()
    m[0, 0], m[0, 2] = c, s
    m[2, 0], m[2, 2] = -s, c
    return m


def rotation_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    m = identity()
    m[0, 0], m[0, 1] = c, -s
    m[1, 0], m[1, 1] = s, c
    return m


def transform_point(m: np.ndarray, p) -> np.ndarray:
    """Apply a 4x4 matrix to a world point (homogeneous w=1, divide by w')."""
    h = m @ np.array([p[0], p[1], p[2], 1.0])
    return h[:3] / h[3]


def transform_points(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Batched transform_point for an (N, 3) array."""
    h = pts @ m[:3, :3].T + m[:3, 3]
    w = pts @ m[3, :3] + m[3, 3]
    return h / w[:, None]


def normal_matrix(m: np.ndarray) -> np.ndarray:
    """Transpose of the inverse of the upper-left 3x3 block of ``m``."""
    try:
        return np.linalg.inv(m[:3, :3]).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate transform: upper 3x3 is singular") from exc


def transform_normal(m: np.ndarray, n) -> np.ndarray:
    """Transform a unit normal by the inverse-transpose of the 3x3 block, renormalized."""
    return normalize(normal_matrix(m) @ np.asarray(n, dtype=np.float64))


def transform_normals(m: np.ndarray, nrm: np.ndarray) -> np.ndarray:
    out = nrm @ normal_matrix(m).T
    lens = np.sqrt(np.sum(out * out, axis=1))
    return out / lens[:, None]


@dataclass
class Bounds:
    """Cubic axis-aligned region: center plus half edge length."""

    center: np.ndarray
    half_extent: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")

    @property
    def size(self) -> float:
        return 2.0 * self.half_extent

    @property
    def minimum(self) -> np.ndarray:
        return self.center - self.half_extent

    @property
    def maximum(self) -> np.ndarray:
        return self.center + self.half_extent

    @property
    def diagonal(self) -> float:
        return self.size * math.sqrt(3.0)

    def contains(self, p) -> bool:
        return bool(np.all(np.abs(np.asarray(p) - self.center) <= self.half_extent))


class Mesh:
    """Indexed triangle mesh: flat vertex array with stride 6 (position xyz, normal xyz)."""

    def __init__(self, vertex_data, indices):
        self.vertex_data = np.asarray(vertex_data, dtype=np.float64).reshape(-1)
        self.indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        if self.vertex_data.size % 6 != 0:
            raise ValueError("vertex_data length must be a multiple of 6")
        if self.indices.size % 3 != 0:
            raise ValueError("index count must be a multiple of 3")
        if self.indices.size and int(self.indices.max()) >= self.vertex_count:
            raise ValueError("index out of range")

    @property
    def vertex_count(self) -> int:
        return self.vertex_data.size // 6

    @property
    def triangle_count(self) -> int:
        return self.indices.size // 3

    @property
    def positions(self) -> np.ndarray:
        return self.vertex_data.reshape(-1, 6)[:, 0:3]

    @property
    def normals(self) -> np.ndarray:
        return self.vertex_data.reshape(-1, 6)[:, 3:6]

    def triangles(self):
        """Yield (positions (3,3), normals (3,3)) per triangle in index order."""
        pos, nrm = self.positions, self.normals
        idx = self.indices.reshape(-1, 3)
        for tri in idx:
            yield pos[tri], nrm[tri]


@dataclass
class Transform:
    """Composable model matrix; every call applies on top of the current state
    in world space (``M <- op @ M``)."""

    model_matrix: np.ndarray = field(default_factory=identity)

    def reset(self) -> "Transform":
        self.model_matrix = identity()
        return self

    def translate(self, v) -> "Transform":
        self.model_matrix = translation(v) @ self.model_matrix
        return self

    def scale(self, s) -> "Transform":
        self.model_matrix = scaling(s) @ self.model_matrix
        return self

    def rotate_x(self, a: float) -> "Transform":
        self.model_matrix = rotation_x(a) @ self.model_matrix
        return self

    def rotate_y(self, a: float) -> "Transform":
        self.model_matrix = rotation_y(a) @ self.model_matrix
        return self

    def rotate_z(self, a: float) -> "Transform":
        self.model_matrix = rotation_z(a) @ self.model_matrix
        return self

    def rotate_euler(self, rx: float, ry: float, rz: float) -> "Transform":
        """Rotate about X, then Y, then Z (fixed order for determinism)."""
        return self.rotate_x(rx).rotate_y(ry).rotate_z(rz)


@dataclass
class Camera:
    """Fly camera: yaw about +Y, pitch toward +Y; yaw=pitch=0 looks down -Z.

    Positive yaw turns toward -X (right-hand rotation about +Y).
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    pitch: float = 0.0
    fov_y: float = 1.0
    aspect: float = 1.0
    near: float = 0.1
    far: float = 100.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if not (0.0 < self.near < self.far):
            raise ValueError("camera requires 0 < near < far")

    @property
    def forward(self) -> np.ndarray:
        cp = math.cos(self.pitch)
        return np.array(
            [-math.sin(self.yaw) * cp, math.sin(self.pitch), -math.cos(self.yaw) * cp]
        )

    @property
    def right(self) -> np.ndarray:
        # Derived from yaw alone so the frame stays stable at pitch = +-pi/2.
        return np.array([math.cos(self.yaw), 0.0, -math.sin(self.yaw)])

    @property
    def up(self) -> np.ndarray:
        return cross(self.right, self.forward)

    @property
    def view_matrix(self) -> np.ndarray:
        r, u, f = self.right, self.up, self.forward
        m = identity()
        m[0, :3] = r
        m[1, :3] = u
        m[2, :3] = -f
        m[0, 3] = -float(r @ self.position)
        m[1, 3] = -float(u @ self.position)
        m[2, 3] = float(f @ self.position)
        return m

    @property
    def perspective_matrix(self) -> np.ndarray:
        return perspective_matrix(self)


def view_matrix(camera: Camera) -> np.ndarray:
    return camera.view_matrix


def perspective_matrix(camera: Camera) -> np.ndarray:
    f = 1.0 / math.tan(camera.fov_y / 2.0)
    n, fa = camera.near, camera.far
    m = np.zeros((4, 4))
    m[0, 0] = f / camera.aspect
    m[1, 1] = f
    m[2, 2] = (fa + n) / (n - fa)
    m[2, 3] = 2.0 * fa * n / (n - fa)
    m[3, 2] = -1.0
    return m


def orthographic_matrix(bounds: Bounds) -> np.ndarray:
    """Map the bounds cube onto the clip cube: ndc = (p - center) / half_extent."""
    h = bounds.half_extent
    m = identity()
    m[0, 0] = m[1, 1] = m[2, 2] = 1.0 / h
    m[:3, 3] = -bounds.center / h
    return m


def _quad_mesh(corners: np.ndarray, normal: np.ndarray) -> Mesh:
    data = np.concatenate(
        [np.concatenate([c, normal]) for c in corners]
    )
    return Mesh(data, np.array([0, 1, 2, 0, 2, 3]))


def unit_plane() -> Mesh:
    """Unit square in the XZ plane at y=0, facing +Y (floor-like)."""
    c = np.array([
        [-0.5, 0.0, -0.5], [0.5, 0.0, -0.5], [0.5, 0.0, 0.5], [-0.5, 0.0, 0.5],
    ])
    return _quad_mesh(c, np.array([0.0, 1.0, 0.0]))


def unit_quad() -> Mesh:
    """Unit square in the XY plane at z=0, facing +Z (wall-like)."""
    c = np.array([
        [-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0],
    ])
    return _quad_mesh(c, np.array([0.0, 0.0, 1.0]))


def unit_cube() -> Mesh:
    """Axis-aligned unit cube centered at the origin, outward face normals."""
    data: list[float] = []
    indices: list[int] = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            normal = np.zeros(3)
            normal[axis] = sign
            a, b = (axis + 1) % 3, (axis + 2) % 3
            base = len(data) // 6
            for da, db in ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)):
                p = np.zeros(3)
                p[axis] = 0.5 * sign
                p[a], p[b] = da, db
                data.extend(p)
                data.extend(normal)
            indices += [base, base + 1, base + 2, base, base + 2, base + 3]
    return Mesh(np.array(data), np.array(indices))


PRIMITIVES = {"plane": unit_plane, "quad": unit_quad, "cube": unit_cube}


def _parse_floats(parts, count, line_no):
    if len(parts) < count:
        raise ObjParseError(line_no, f"expected {count} numeric values")
    try:
        return [float(p) for p in parts[:count]]
    except ValueError:
        raise ObjParseError(line_no, f"non-numeric coordinate in {parts[:count]}") from None


def _resolve_index(raw: str, count: int, line_no: int, what: str) -> int:
    try:
        idx = int(raw)
    except ValueError:
        raise ObjParseError(line_no, f"non-numeric {what} index {raw!r}") from None
    if idx > 0:
        idx -= 1
    elif idx < 0:
        idx += count
    else:
        raise ObjParseError(line_no, f"{what} index 0 is invalid")
    if not 0 <= idx < count:
        raise ObjParseError(line_no, f"{what} index {raw} out of range (have {count})")
    return idx


def load_obj(text: str) -> Mesh:
    """Load the OBJ subset: v / vn / f lines, with f entries i, i//k or i/j/k.

    Texture indices are parsed and discarded. Faces with more than three
    vertices are fan-triangulated. Faces without normal indices get their
    geometric (cross-product) normal. Vertices are deduplicated by
    (position index, normal index) pair.
    """
    positions: list[list[float]] = []
    normals: list[list[float]] = []
    faces: list[tuple[list[tuple[int, int | None]], int]] = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "v":
            positions.append(_parse_floats(parts[1:], 3, line_no))
        elif kind == "vn":
            normals.append(_parse_floats(parts[1:], 3, line_no))
        elif kind == "f":
            if len(parts) < 4:
                raise ObjParseError(line_no, "face needs at least 3 vertices")
            corners = []
            for entry in parts[1:]:
                fields = entry.split("/")
                pi = _resolve_index(fields[0], len(positions), line_no, "vertex")
                ni = None
                if len(fields) >= 3 and fields[2] != "":
                    ni = _resolve_index(fields[2], len(normals), line_no, "normal")
                corners.append((pi, ni))
            faces.append((corners, line_no))
        # vt and any other keywords are accepted and ignored

    vertex_data: list[float] = []
    vertex_map: dict[tuple[int, int], int] = {}
    indices: list[int] = []
    pseudo_normals: list[np.ndarray] = []

    def emit(pi: int, ni: int, nvec: np.ndarray) -> int:
        key = (pi, ni)
        slot = vertex_map.get(key)
        if slot is None:
            slot = len(vertex_data) // 6
            vertex_map[key] = slot
            vertex_data.extend(positions[pi])
            vertex_data.extend(nvec)
        return slot

    for corners, line_no in faces:
        missing = any(ni is None for _, ni in corners)
        if missing:
            p0 = np.array(positions[corners[0][0]])
            p1 = np.array(positions[corners[1][0]])
            p2 = np.array(positions[corners[2][0]])
            n = cross(p1 - p0, p2 - p0)
            ln = math.sqrt(float(n @ n))
            if ln == 0.0:
                raise ObjParseError(line_no, "degenerate face: cannot derive a normal")
            pseudo_normals.append(n / ln)
            face_ni = -len(pseudo_normals)  # unique negative key per generated normal
        for t in range(1, len(corners) - 1):
            for pi, ni in (corners[0], corners[t], corners[t + 1]):
                if ni is None:
                    slot = emit(pi, face_ni, pseudo_normals[-1])
                else:
                    nvec = np.array(normals[ni])
                    ln = math.sqrt(float(nvec @ nvec))
                    if ln == 0.0:
                        raise ObjParseError(line_no, "zero-length normal")
                    slot = emit(pi, ni, nvec / ln)
                indices.append(slot)

    return Mesh(np.array(vertex_data), np.array(indices, dtype=np.int64))
