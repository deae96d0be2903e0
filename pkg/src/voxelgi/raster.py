"""Software triangle rasterizer shared by the screen pass and the voxelizer.

Raster space: x grows right, y grows down, the top row is row 0, and pixel
(ix, iy) is sampled at its center (ix + 0.5, iy + 0.5). Coverage follows a
top-left fill rule so that pixels on shared edges are claimed exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import transform_normals, transform_points


@dataclass
class Fragment:
    px: int
    py: int
    depth: float
    world_pos: np.ndarray
    world_normal: np.ndarray


@dataclass
class RasterStats:
    near_rejected: int = 0
    fragments: int = 0


class Framebuffer:
    """RGBA color target plus a depth buffer, row-major with the top row first."""

    FAR = np.inf

    def __init__(self, width: int, height: int, clear_color=(0.0, 0.0, 0.0, 0.0)):
        if width < 1 or height < 1:
            raise ValueError("framebuffer must be at least 1x1")
        self.width = width
        self.height = height
        self.color = np.empty((height, width, 4), dtype=np.float64)
        self.depth = np.empty((height, width), dtype=np.float64)
        self.clear(clear_color)

    def clear(self, clear_color=(0.0, 0.0, 0.0, 0.0)):
        self.color[:] = np.asarray(clear_color, dtype=np.float64)
        self.depth[:] = self.FAR


@dataclass
class ProjectedTriangle:
    clip: np.ndarray          # (3, 4) clip-space positions
    world_pos: np.ndarray     # (3, 3)
    world_normal: np.ndarray  # (3, 3)


def project_triangle(m: np.ndarray, v: np.ndarray, p: np.ndarray,
                     positions: np.ndarray, normals: np.ndarray) -> ProjectedTriangle:
    """Run the vertex stage: local -> world -> clip, normals by inverse-transpose."""
    world = transform_points(m, np.asarray(positions, dtype=np.float64))
    pv = p @ v
    clip = np.concatenate([world, np.ones((3, 1))], axis=1) @ pv.T
    wn = transform_normals(m, np.asarray(normals, dtype=np.float64))
    return ProjectedTriangle(clip=clip, world_pos=world, world_normal=wn)


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _top_left(ax, ay, bx, by) -> bool:
    dx, dy = bx - ax, by - ay
    return (dy == 0.0 and dx > 0.0) or dy < 0.0


def rasterize(tri: ProjectedTriangle, target: Framebuffer, mode: str = "perspective",
              depth_test: bool = True, sink=None, stats: RasterStats | None = None) -> int:
    """Rasterize one clip-space triangle into ``target``; returns the fragment count.

    A pixel is covered iff its center lies inside the triangle (top-left rule
    for ties). Attributes interpolate perspective-correct in perspective mode
    and affinely in orthographic mode. With depth_test on, strictly closer
    fragments overwrite and ties keep the earlier write. The sink receives
    each surviving fragment; if it returns a color, that color (and depth) is
    written to the target. Sinks may instead expose ``process_batch`` taking
    (px, py, depth, world_pos, world_normal) arrays.
    """
    if mode not in ("perspective", "orthographic"):
        raise ValueError(f"unknown raster mode {mode!r}")
    clip = tri.clip
    w = clip[:, 3]
    if mode == "perspective":
        if np.any(w <= 1e-12) or np.any(clip[:, 2] < -w):
            # Near-plane crossing: full polygon clipping is out of scope.
            if stats is not None:
                stats.near_rejected += 1
            return 0
        ndc = clip[:, :3] / w[:, None]
    else:
        ndc = clip[:, :3].copy()

    width, height = target.width, target.height
    sx = (ndc[:, 0] + 1.0) * 0.5 * width
    sy = (1.0 - ndc[:, 1]) * 0.5 * height
    zs = ndc[:, 2]

    order = [0, 1, 2]
    area2 = _edge(sx[0], sy[0], sx[1], sy[1], sx[2], sy[2])
    if area2 == 0.0:
        return 0
    if area2 < 0.0:
        order = [0, 2, 1]
        area2 = -area2
    ax, ay = sx[order], sy[order]

    x_lo = max(0, int(np.ceil(ax.min() - 0.5)))
    x_hi = min(width - 1, int(np.floor(ax.max() - 0.5)))
    y_lo = max(0, int(np.ceil(ay.min() - 0.5)))
    y_hi = min(height - 1, int(np.floor(ay.max() - 0.5)))
    if x_lo > x_hi or y_lo > y_hi:
        return 0

    pxs = np.arange(x_lo, x_hi + 1)
    pys = np.arange(y_lo, y_hi + 1)
    cx = pxs + 0.5
    cy = pys + 0.5
    gx, gy = np.meshgrid(cx, cy)

    # Edge i is opposite vertex i; interior is strictly positive, ties follow
    # the top-left rule.
    lam = np.empty((3,) + gx.shape)
    covered = np.ones(gx.shape, dtype=bool)
    for i in range(3):
        a, b = (i + 1) % 3, (i + 2) % 3
        e = _edge(ax[a], ay[a], ax[b], ay[b], gx, gy)
        inc = _top_left(ax[a], ay[a], ax[b], ay[b])
        covered &= (e > 0.0) | ((e == 0.0) & inc)
        lam[i] = e / area2
    if not covered.any():
        return 0

    l0, l1, l2 = lam[0][covered], lam[1][covered], lam[2][covered]
    ix = np.broadcast_to(pxs, gx.shape)[covered]
    iy = np.broadcast_to(pys[:, None], gx.shape)[covered]

    depth = l0 * zs[order[0]] + l1 * zs[order[1]] + l2 * zs[order[2]]

    if depth_test:
        keep = depth < target.depth[iy, ix]
        if not keep.any():
            return 0
        l0, l1, l2 = l0[keep], l1[keep], l2[keep]
        ix, iy, depth = ix[keep], iy[keep], depth[keep]

    wp = tri.world_pos[order]
    wn = tri.world_normal[order]
    if mode == "perspective":
        iw = 1.0 / w[order]
        den = l0 * iw[0] + l1 * iw[1] + l2 * iw[2]
        b0, b1, b2 = l0 * iw[0] / den, l1 * iw[1] / den, l2 * iw[2] / den
    else:
        b0, b1, b2 = l0, l1, l2
    world_pos = b0[:, None] * wp[0] + b1[:, None] * wp[1] + b2[:, None] * wp[2]
    world_nrm = b0[:, None] * wn[0] + b1[:, None] * wn[1] + b2[:, None] * wn[2]
    lens = np.sqrt(np.sum(world_nrm * world_nrm, axis=1))
    world_nrm = world_nrm / np.where(lens > 0, lens, 1.0)[:, None]

    count = ix.size
    if stats is not None:
        stats.fragments += count

    if sink is None:
        if depth_test:
            target.depth[iy, ix] = depth
        return count

    if hasattr(sink, "process_batch"):
        colors = sink.process_batch(ix, iy, depth, world_pos, world_nrm)
        if depth_test:
            target.depth[iy, ix] = depth
        if colors is not None:
            target.color[iy, ix] = colors
        return count

    for k in range(count):
        frag = Fragment(int(ix[k]), int(iy[k]), float(depth[k]),
                        world_pos[k], world_nrm[k])
        color = sink(frag)
        if depth_test:
            target.depth[frag.py, frag.px] = frag.depth
        if color is not None:
            target.color[frag.py, frag.px] = np.asarray(color, dtype=np.float64)
    return count
