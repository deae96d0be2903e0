"""Populate the voxel grid with the scene's direct diffuse+ambient light.

Each world-space triangle is rotated so its dominant normal axis faces the
raster direction (a coordinate swizzle), orthographically projected against
the grid bounds, and rasterized at grid resolution with depth testing off;
fragments store their Phong direct light (glossy discarded, computed with the
pre-swizzle world position and normal) into the voxel their world position
falls in, alpha 1, last write wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import transform_normals, transform_points
from .lighting import phong_direct_batch
from .mipvolume import VoxelGrid, clear, world_to_texel_batch
from .raster import Framebuffer, ProjectedTriangle, rasterize

AXIS_X = 0
AXIS_Y = 1
AXIS_Z = 2

_SWIZZLE = {
    AXIS_X: (2, 1, 0),  # (z, y, x)
    AXIS_Y: (0, 2, 1),  # (x, z, y)
    AXIS_Z: (0, 1, 2),
}


@dataclass
class VoxelizeStats:
    triangles: int = 0
    fragments: int = 0
    discarded: int = 0   # fragments whose world position left the bounds
    degenerate: int = 0  # collinear triangles


def triangle_normal(v1, v2, v3) -> np.ndarray:
    """Unnormalized geometric normal (v2-v1) x (v3-v1)."""
    a = np.asarray(v2, dtype=np.float64) - np.asarray(v1, dtype=np.float64)
    b = np.asarray(v3, dtype=np.float64) - np.asarray(v1, dtype=np.float64)
    return np.cross(a, b)


def dominant_axis(v1, v2, v3) -> int:
    """Axis with the largest absolute normal component; ties pick the later
    axis in X < Y < Z order (sequential overwrite semantics)."""
    n = np.abs(triangle_normal(v1, v2, v3))
    if n[2] >= n[1] and n[2] >= n[0]:
        return AXIS_Z
    if n[1] >= n[0]:
        return AXIS_Y
    return AXIS_X


def swizzle_for_axis(axis: int, p) -> np.ndarray:
    """Rotate coordinates so the given axis lands on Z; self-inverse."""
    order = _SWIZZLE[axis]
    p = np.asarray(p, dtype=np.float64)
    return p[..., order]


class _VoxelSink:
    """Raster sink of one triangle; scatters lit fragments into the grid."""

    def __init__(self, grid: VoxelGrid, lights, store_ambient: bool,
                 stats: VoxelizeStats):
        self.grid = grid
        self.material = None
        self.lights = lights
        self.store_ambient = store_ambient
        self.stats = stats

    # Interpolated positions of geometry lying exactly on a voxel boundary can
    # land a few ulp outside it; snap within this tolerance (texel units).
    BOUNDARY_EPS = 1e-6

    def process_batch(self, ix, iy, depth, world_pos, world_nrm):
        n = self.grid.resolution
        texel = world_to_texel_batch(self.grid, world_pos)
        eps = self.BOUNDARY_EPS
        idx = np.floor(texel + eps).astype(np.int64)
        # Geometry on (or a hair past) a max face belongs to the last layer.
        np.minimum(idx, n - 1, out=idx)
        valid = np.all((texel >= -eps) & (texel <= n + eps), axis=1)
        bad = int(np.count_nonzero(~valid))
        if bad:
            self.stats.discarded += bad
            if not valid.any():
                return None
            idx, world_pos, world_nrm = idx[valid], world_pos[valid], world_nrm[valid]

        m = self.material
        count = world_pos.shape[0]
        colors = np.broadcast_to(m.color, (count, 3))
        amb = np.full(count, m.ambient_str)
        dif = np.full(count, m.diffuse_str)
        spec = np.full(count, m.specular_str)
        shin = np.full(count, m.shininess)
        lit = np.zeros((count, 3), dtype=np.float64)
        for light in self.lights:
            lit += phong_direct_batch(
                world_pos, world_nrm, world_pos, colors, amb, dif, spec, shin,
                light, include_ambient=self.store_ambient, include_glossy=False,
            )
        rgba = np.empty((count, 4), dtype=np.float32)
        rgba[:, :3] = np.clip(lit, 0.0, 1.0)
        rgba[:, 3] = 1.0
        self.grid.level0[idx[:, 2], idx[:, 1], idx[:, 0]] = rgba
        return None


def voxelize_scene(scene, grid: VoxelGrid, store_ambient: bool = True,
                   stats: VoxelizeStats | None = None) -> VoxelGrid:
    """Clear the grid and rasterize every model triangle into it, in submission
    order, storing summed direct light (glossy off) with alpha 1."""
    stats = stats if stats is not None else VoxelizeStats()
    clear(grid)
    n = grid.resolution
    fb = Framebuffer(n, n)
    center = grid.bounds.center
    half = grid.bounds.half_extent
    sink = _VoxelSink(grid, scene.lights, store_ambient, stats)

    for model in scene.models:
        m = model.transform.model_matrix
        mesh = model.mesh
        world = transform_points(m, mesh.positions)
        normals = transform_normals(m, mesh.normals)
        sink.material = model.material
        for tri in mesh.indices.reshape(-1, 3):
            stats.triangles += 1
            wp = world[tri]
            wn = normals[tri]
            nvec = triangle_normal(wp[0], wp[1], wp[2])
            if not np.any(nvec):
                stats.degenerate += 1
                continue
            axis = dominant_axis(wp[0], wp[1], wp[2])
            ndc = swizzle_for_axis(axis, (wp - center) / half)
            clip = np.concatenate([ndc, np.ones((3, 1))], axis=1)
            tri_proj = ProjectedTriangle(clip=clip, world_pos=wp, world_normal=wn)
            stats.fragments += rasterize(
                tri_proj, fb, mode="orthographic", depth_test=False, sink=sink,
            )
    return grid
