"""Frame orchestration: voxelize on schedule, G-buffer raster pass, per-pixel
cone-traced shading, component-isolation render modes, PPM output, and the
benchmark harness.

Determinism: shading always runs over a fixed partition of the visible pixels
into 4096-pixel chunks, each computed by the same pure function; worker count
only changes which process computes a chunk, never its value. Voxelization is
sequential in triangle submission order.
"""

from __future__ import annotations

import dataclasses
import multiprocessing
import time
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .conetracer import ConeSettings, cones_per_fragment, shade_fragments_batch
from .geometry import Bounds, Camera, transform_points
from .lighting import phong_direct_batch
from .mipvolume import VoxelGrid, build_mipmaps, export_visualization
from .raster import Framebuffer, ProjectedTriangle, RasterStats, project_triangle, rasterize
from .scene_parser import Scene
from .voxelizer import VoxelizeStats, voxelize_scene

RENDER_MODES = (
    "phong", "vxct", "occlusion_only",
    "indirect_diffuse_only", "indirect_specular_only", "voxels",
)
ALLOWED_GRID_SIZES = (16, 32, 64, 128, 256)
SHADE_CHUNK = 4096


class ConfigurationError(ValueError):
    pass


@dataclass
class RenderJob:
    scene: Scene
    width: int = 256
    height: int = 256
    mode: str = "vxct"
    grid_resolution: int = 64
    lod: int = 0
    vox_freq: int | None = None   # None: first frame only; 0: every frame; K: every K frames
    threads: int = 1
    gamma: float | None = None
    camera: Camera | None = None
    settings: ConeSettings | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("image must be at least 1x1")
        if self.mode not in RENDER_MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.grid_resolution not in ALLOWED_GRID_SIZES:
            raise ConfigurationError(
                f"grid resolution must be one of {ALLOWED_GRID_SIZES}")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if self.lod < 0:
            raise ConfigurationError("lod must be >= 0")


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, top row first


def write_ppm(image: Image, sink: BinaryIO) -> None:
    """Binary PPM: ``P6\\n{w} {h}\\n255\\n`` then w*h*3 bytes, top row first."""
    sink.write(f"P6\n{image.width} {image.height}\n255\n".encode("ascii"))
    sink.write(image.pixels.astype(np.uint8).tobytes())


def read_ppm(source: BinaryIO) -> Image:
    magic = source.readline().strip()
    if magic != b"P6":
        raise ValueError("not a binary PPM")
    dims = source.readline().split()
    maxval = source.readline().strip()
    w, h = int(dims[0]), int(dims[1])
    if maxval != b"255":
        raise ValueError("only 8-bit PPM supported")
    data = source.read(w * h * 3)
    return Image(w, h, np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy())


def compute_scene_bounds(scene: Scene) -> Bounds:
    """Tight cube around all transformed geometry (unit cube if there is none)."""
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for model in scene.models:
        world = transform_points(model.transform.model_matrix, model.mesh.positions)
        lo = np.minimum(lo, world.min(axis=0))
        hi = np.maximum(hi, world.max(axis=0))
    if not np.all(np.isfinite(lo)):
        return Bounds(np.zeros(3), 1.0)
    center = (lo + hi) / 2.0
    half = float(np.max(hi - lo)) / 2.0
    return Bounds(center, max(half, 1e-6))


def resolve_settings(scene: Scene, grid: VoxelGrid,
                     override: ConeSettings | None = None) -> ConeSettings:
    """Defaults scaled to the grid, then scene-file overrides, then caller's."""
    if override is not None:
        return override.copy().validate()
    settings = ConeSettings.defaults(grid.voxel_edge, grid.bounds.diagonal)
    if scene.settings:
        settings.apply_flat(scene.settings)
    return settings


class _GBufferSink:
    """Raster sink that records world position, normal, and material id."""

    def __init__(self, width: int, height: int):
        self.world_pos = np.zeros((height, width, 3), dtype=np.float64)
        self.world_nrm = np.zeros((height, width, 3), dtype=np.float64)
        self.material = np.full((height, width), -1, dtype=np.int32)
        self.current = 0

    def process_batch(self, ix, iy, depth, world_pos, world_nrm):
        self.world_pos[iy, ix] = world_pos
        self.world_nrm[iy, ix] = world_nrm
        self.material[iy, ix] = self.current
        return None


class _FlatColorSink:
    """Raster sink painting a constant color (voxel visualization boxes)."""

    def __init__(self, rgba):
        self.rgba = np.asarray(rgba, dtype=np.float64)

    def process_batch(self, ix, iy, depth, world_pos, world_nrm):
        return np.broadcast_to(self.rgba, (ix.size, 4))


# Fork-shared shading context: set by the parent right before mapping chunks.
_SHADE_CTX = None


def _shade_chunk(chunk_index: int) -> np.ndarray:
    ctx = _SHADE_CTX
    sl = slice(chunk_index * SHADE_CHUNK, (chunk_index + 1) * SHADE_CHUNK)
    x = ctx["x"][sl]
    if ctx["mode"] == "phong":
        out = np.zeros((x.shape[0], 3))
        s: ConeSettings = ctx["settings"]
        if s.direct_diffuse or s.direct_glossy:
            for light in ctx["lights"]:
                out += phong_direct_batch(
                    x, ctx["n"][sl], ctx["view_pos"], ctx["colors"][sl],
                    ctx["amb"][sl], ctx["dif"][sl], ctx["spec"][sl], ctx["shin"][sl],
                    light, include_ambient=False,
                    include_glossy=s.direct_glossy, include_diffuse=s.direct_diffuse,
                )
        return np.clip(out, 0.0, 1.0)
    return shade_fragments_batch(
        ctx["pyramid"], x, ctx["n"][sl],
        np.broadcast_to(ctx["view_pos"], x.shape),
        ctx["colors"][sl], ctx["amb"][sl], ctx["dif"][sl], ctx["spec"][sl],
        ctx["shin"][sl], ctx["lights"], ctx["settings"],
        components=ctx["components"],
    )


class Engine:
    """Holds the per-session render state: grid, pyramid, and frame counter."""

    def __init__(self, job: RenderJob):
        self.job = job
        self.scene = job.scene
        self.bounds = compute_scene_bounds(self.scene)
        self.grid = VoxelGrid(job.grid_resolution, self.bounds)
        self.settings = resolve_settings(self.scene, self.grid, job.settings)
        self.pyramid = None
        self.frame_index = 0
        self.raster_stats = RasterStats()
        self.voxelize_stats = VoxelizeStats()
        self.last_voxelize_seconds = 0.0
        self.last_frame_seconds = 0.0

    # -- voxelization schedule ------------------------------------------------

    def _should_voxelize(self) -> bool:
        if self.pyramid is None:
            return True
        freq = self.job.vox_freq
        if freq is None:
            return False
        if freq == 0:
            return True
        return self.frame_index % freq == 0

    def voxelize(self) -> float:
        started = time.perf_counter()
        voxelize_scene(self.scene, self.grid, stats=self.voxelize_stats)
        self.pyramid = build_mipmaps(self.grid)
        self.last_voxelize_seconds = time.perf_counter() - started
        return self.last_voxelize_seconds

    # -- camera ---------------------------------------------------------------

    def active_camera(self) -> Camera:
        cam = self.job.camera or self.scene.camera or Camera(
            position=np.array([0.0, 0.0, 5.0]))
        return dataclasses.replace(
            cam, position=np.array(cam.position, dtype=np.float64),
            aspect=self.job.width / self.job.height)

    # -- frame ----------------------------------------------------------------

    def render_frame(self) -> Image:
        started = time.perf_counter()
        job = self.job
        needs_grid = job.mode != "phong"
        if needs_grid and self._should_voxelize():
            self.voxelize()

        camera = self.active_camera()
        fb = Framebuffer(job.width, job.height)

        if job.mode == "voxels":
            rgb = self._render_voxel_boxes(fb, camera)
        else:
            rgb = self._render_shaded(fb, camera)

        if job.gamma and job.gamma > 0 and job.gamma != 1.0:
            rgb = rgb ** (1.0 / job.gamma)
        pixels = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
        self.frame_index += 1
        self.last_frame_seconds = time.perf_counter() - started
        return Image(job.width, job.height, pixels)

    def _raster_scene(self, fb: Framebuffer, camera: Camera) -> _GBufferSink:
        sink = _GBufferSink(fb.width, fb.height)
        v = camera.view_matrix
        p = camera.perspective_matrix
        for mi, model in enumerate(self.scene.models):
            sink.current = mi
            m = model.transform.model_matrix
            mesh = model.mesh
            pos, nrm = mesh.positions, mesh.normals
            for tri in mesh.indices.reshape(-1, 3):
                projected = project_triangle(m, v, p, pos[tri], nrm[tri])
                rasterize(projected, fb, mode="perspective", depth_test=True,
                          sink=sink, stats=self.raster_stats)
        return sink

    def _render_shaded(self, fb: Framebuffer, camera: Camera) -> np.ndarray:
        global _SHADE_CTX
        job = self.job
        gbuf = self._raster_scene(fb, camera)
        rgb = np.zeros((fb.height, fb.width, 3), dtype=np.float64)
        ys, xs = np.nonzero(gbuf.material >= 0)
        if ys.size == 0:
            return rgb

        models = self.scene.models
        mat_colors = np.stack([m.material.color for m in models]) if models else np.zeros((1, 3))
        mat_amb = np.array([m.material.ambient_str for m in models] or [0.0])
        mat_dif = np.array([m.material.diffuse_str for m in models] or [0.0])
        mat_spec = np.array([m.material.specular_str for m in models] or [0.0])
        mat_shin = np.array([m.material.shininess for m in models] or [0.0])
        ids = gbuf.material[ys, xs]

        components = {
            "vxct": "all",
            "occlusion_only": "occlusion",
            "indirect_diffuse_only": "indirect_diffuse",
            "indirect_specular_only": "indirect_specular",
        }.get(job.mode, "all")

        _SHADE_CTX = {
            "mode": job.mode,
            "components": components,
            "pyramid": self.pyramid,
            "settings": self.settings,
            "lights": self.scene.lights,
            "view_pos": camera.position,
            "x": gbuf.world_pos[ys, xs],
            "n": gbuf.world_nrm[ys, xs],
            "colors": mat_colors[ids],
            "amb": mat_amb[ids],
            "dif": mat_dif[ids],
            "spec": mat_spec[ids],
            "shin": mat_shin[ids],
        }
        chunk_count = (ys.size + SHADE_CHUNK - 1) // SHADE_CHUNK
        try:
            if job.threads > 1 and chunk_count > 1:
                ctx = multiprocessing.get_context("fork")
                with ctx.Pool(processes=min(job.threads, chunk_count)) as pool:
                    results = pool.map(_shade_chunk, range(chunk_count), chunksize=1)
            else:
                results = [_shade_chunk(i) for i in range(chunk_count)]
        finally:
            _SHADE_CTX = None
        shaded = np.concatenate(results, axis=0)
        rgb[ys, xs] = shaded
        return rgb

    def _render_voxel_boxes(self, fb: Framebuffer, camera: Camera) -> np.ndarray:
        from .geometry import unit_cube

        lod = self.job.lod
        boxes = export_visualization(self.grid, lod, self.pyramid)
        v = camera.view_matrix
        p = camera.perspective_matrix
        cube = unit_cube()
        pos, nrm = cube.positions, cube.normals
        tris = cube.indices.reshape(-1, 3)
        for center, edge, rgba in boxes:
            sink = _FlatColorSink(rgba)
            scaled = pos * edge + center
            for tri in tris:
                world = scaled[tri]
                clip = np.concatenate([world, np.ones((3, 1))], axis=1) @ (p @ v).T
                projected = ProjectedTriangle(clip=clip, world_pos=world,
                                              world_normal=nrm[tri])
                rasterize(projected, fb, mode="perspective", depth_test=True,
                          sink=sink, stats=self.raster_stats)
        return fb.color[..., :3]

    # -- stats ----------------------------------------------------------------

    def cones_per_fragment(self) -> int:
        return cones_per_fragment(self.settings, len(self.scene.lights))


def render_frame(job: RenderJob) -> Image:
    """One-shot render: fresh engine, voxelize, raster, shade, quantize."""
    return Engine(job).render_frame()


def benchmark(job: RenderJob, frames: int, warmup: int = 3) -> float:
    """Mean wall-clock seconds per frame over ``frames`` renders after warm-up."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    engine = Engine(job)
    for _ in range(warmup):
        engine.render_frame()
    started = time.perf_counter()
    for _ in range(frames):
        engine.render_frame()
    return (time.perf_counter() - started) / frames
