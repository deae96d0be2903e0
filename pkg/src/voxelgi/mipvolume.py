"""Dense cubic RGBA voxel volume, box-filtered mip pyramid, and LOD sampling.

Level arrays are indexed ``[z, y, x, channel]`` so the flat memory order is
x-fastest, matching the VXG dump layout. Voxel (x, y, z) at level L covers the
level-0 cube [x*2^L, (x+1)*2^L) per axis; its center sits at (x + 0.5) * 2^L
in level-0 texel units.
"""

from __future__ import annotations

from typing import BinaryIO

import numpy as np

from .geometry import Bounds


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class VoxelGrid:
    """Cubic RGBA volume of direct light; alpha 1 marks solid voxels."""

    def __init__(self, resolution: int, bounds: Bounds):
        if not _is_pow2(resolution):
            raise ValueError(f"resolution must be a power of two, got {resolution}")
        self.resolution = resolution
        self.bounds = bounds
        self.level0 = np.zeros((resolution,) * 3 + (4,), dtype=np.float32)
        self.pyramid: MipPyramid | None = None

    @property
    def voxel_edge(self) -> float:
        return self.bounds.size / self.resolution

    def set_voxel(self, x: int, y: int, z: int, rgba) -> None:
        self.level0[z, y, x] = rgba
        self.pyramid = None

    def get_voxel(self, x: int, y: int, z: int) -> np.ndarray:
        return np.asarray(self.level0[z, y, x], dtype=np.float64)


class MipPyramid:
    """Box-filtered level chain down to 1^3; immutable once built."""

    def __init__(self, grid: VoxelGrid, levels: list[np.ndarray]):
        self.grid = grid
        self.levels = levels

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    @property
    def bounds(self) -> Bounds:
        return self.grid.bounds

    @property
    def voxel_edge(self) -> float:
        return self.grid.voxel_edge


def clear(grid: VoxelGrid) -> VoxelGrid:
    """Reset every voxel to (0, 0, 0, 0) and drop any cached pyramid."""
    grid.level0[:] = 0.0
    grid.pyramid = None
    return grid


def build_mipmaps(grid: VoxelGrid) -> MipPyramid:
    """Average 2x2x2 children into each parent voxel, all channels independently."""
    levels = [grid.level0]
    cur = grid.level0
    while cur.shape[0] > 1:
        n2 = cur.shape[0] // 2
        nxt = (
            cur.astype(np.float64)
            .reshape(n2, 2, n2, 2, n2, 2, 4)
            .mean(axis=(1, 3, 5))
            .astype(np.float32)
        )
        levels.append(nxt)
        cur = nxt
    pyramid = MipPyramid(grid, levels)
    grid.pyramid = pyramid
    return pyramid


def world_to_texel(grid: VoxelGrid, p) -> np.ndarray:
    """Continuous texel coordinate: (p - bounds_min) / scene_size * N."""
    p = np.asarray(p, dtype=np.float64)
    return (p - grid.bounds.minimum) / grid.bounds.size * grid.resolution


def world_to_texel_batch(grid: VoxelGrid, pts: np.ndarray) -> np.ndarray:
    return (pts - grid.bounds.minimum) / grid.bounds.size * grid.resolution


def _trilinear_level(level: np.ndarray, scale: float, texel: np.ndarray) -> np.ndarray:
    """Trilinear fetch from one level for (M, 3) level-0 texel coordinates.

    Texel centers sit at (i + 0.5) * scale; corners outside the level read the
    transparent-black border.
    """
    n = level.shape[0]
    u = texel / scale - 0.5
    i0 = np.floor(u).astype(np.int64)
    fr = u - i0
    flat = level.reshape(-1, 4)
    out = np.zeros((texel.shape[0], 4), dtype=np.float64)
    for dz in (0, 1):
        wz = fr[:, 2] if dz else 1.0 - fr[:, 2]
        for dy in (0, 1):
            wy = fr[:, 1] if dy else 1.0 - fr[:, 1]
            for dx in (0, 1):
                wx = fr[:, 0] if dx else 1.0 - fr[:, 0]
                ix = i0[:, 0] + dx
                iy = i0[:, 1] + dy
                iz = i0[:, 2] + dz
                valid = (
                    (ix >= 0) & (ix < n)
                    & (iy >= 0) & (iy < n)
                    & (iz >= 0) & (iz < n)
                )
                idx = (np.clip(iz, 0, n - 1) * n + np.clip(iy, 0, n - 1)) * n + np.clip(
                    ix, 0, n - 1
                )
                w = wx * wy * wz * valid
                out += w[:, None] * flat[idx].astype(np.float64)
    return out


def sample_lod_batch(pyramid: MipPyramid, texel: np.ndarray, lod: np.ndarray) -> np.ndarray:
    """Quadrilinear sample for (M, 3) texel coordinates and (M,) LOD values.

    Trilinear inside level floor(lod) and level ceil(lod), blended linearly by
    frac(lod). The LOD is clamped to [0, max level].
    """
    texel = np.asarray(texel, dtype=np.float64)
    lod = np.clip(np.asarray(lod, dtype=np.float64), 0.0, float(pyramid.max_level))
    l0 = np.floor(lod).astype(np.int64)
    frac = lod - l0
    l1 = np.where(frac > 0.0, l0 + 1, l0)

    out = np.zeros((texel.shape[0], 4), dtype=np.float64)
    acc0 = np.zeros_like(out)
    acc1 = np.zeros_like(out)
    for lev in np.unique(np.concatenate([l0, l1])):
        scale = float(2 ** int(lev))
        m0 = l0 == lev
        m1 = l1 == lev
        sel = m0 | m1
        if not sel.any():
            continue
        tri = _trilinear_level(pyramid.levels[int(lev)], scale, texel[sel])
        dst = np.flatnonzero(sel)
        acc0[dst[m0[sel]]] = tri[m0[sel]]
        acc1[dst[m1[sel]]] = tri[m1[sel]]
    out = acc0 * (1.0 - frac)[:, None] + acc1 * frac[:, None]
    return out


def sample_lod(pyramid: MipPyramid, texel, lod: float) -> np.ndarray:
    """Single-point quadrilinear sample; see ``sample_lod_batch``."""
    t = np.asarray(texel, dtype=np.float64).reshape(1, 3)
    return sample_lod_batch(pyramid, t, np.array([lod], dtype=np.float64))[0]


def export_visualization(grid: VoxelGrid, lod: int = 0,
                         pyramid: MipPyramid | None = None):
    """List every voxel with alpha > 0 at the given level as
    (world center, world edge length, RGBA), in z-, y-, x-ascending order."""
    if lod == 0:
        level = grid.level0
    else:
        if pyramid is None:
            pyramid = grid.pyramid or build_mipmaps(grid)
        if not 0 <= lod <= pyramid.max_level:
            raise ValueError(f"lod {lod} outside [0, {pyramid.max_level}]")
        level = pyramid.levels[lod]
    n = level.shape[0]
    edge = grid.bounds.size / n
    origin = grid.bounds.minimum
    zz, yy, xx = np.nonzero(level[..., 3] > 0)
    boxes = []
    for z, y, x in zip(zz.tolist(), yy.tolist(), xx.tolist()):
        center = origin + (np.array([x, y, z], dtype=np.float64) + 0.5) * edge
        boxes.append((center, edge, np.asarray(level[z, y, x], dtype=np.float64)))
    return boxes


def dump_vxg(grid: VoxelGrid, sink: BinaryIO) -> None:
    """Write the level-0 volume: header ``VXG1 N`` then N^3 RGBA little-endian
    float32 quadruples, x-fastest."""
    sink.write(f"VXG1 {grid.resolution}\n".encode("ascii"))
    sink.write(grid.level0.astype("<f4").tobytes())


def load_vxg(source: BinaryIO, bounds: Bounds) -> VoxelGrid:
    header = b""
    while not header.endswith(b"\n"):
        ch = source.read(1)
        if not ch:
            raise ValueError("truncated VXG header")
        header += ch
    parts = header.decode("ascii").split()
    if len(parts) != 2 or parts[0] != "VXG1":
        raise ValueError(f"bad VXG header {header!r}")
    n = int(parts[1])
    raw = source.read(n * n * n * 4 * 4)
    if len(raw) != n * n * n * 16:
        raise ValueError("truncated VXG payload")
    grid = VoxelGrid(n, bounds)
    grid.level0 = np.frombuffer(raw, dtype="<f4").reshape(n, n, n, 4).copy()
    return grid
