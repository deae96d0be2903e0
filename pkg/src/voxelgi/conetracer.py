"""Cone marching over the mip pyramid: front-to-back accumulation, the three
customized cone families (diffuse first-hit, specular with angular-grace BRDF,
distance-weighted occlusion), cone direction sets, and per-fragment combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import normalize
from .lighting import Material, PointLight, phong_direct, phong_direct_batch, reflect
from .mipvolume import MipPyramid, sample_lod_batch, world_to_texel_batch

# Front-to-back accumulation stops once this much of the cone is blocked.
ALPHA_SATURATION = 1.0 - 1e-3
# A diffuse cone grabs the color of the first sample more solid than 1/100.
DIFFUSE_HIT_THRESHOLD = 0.01
# Angular grace per unit of Phong shininess in the specular BRDF.
SPECULAR_GRACE_FACTOR = 0.008 * math.pi

KIND_ACCUM = 0
KIND_FIRST_HIT = 1
KIND_OCCLUSION = 2


@dataclass
class ConeFamily:
    aperture: float       # full opening angle, radians
    offset: float         # initial march distance t0, world units
    step_factor: float    # fraction of the local diameter advanced per step

    def validate(self, name: str):
        if not 0.0 < self.aperture < math.pi:
            raise ValueError(f"{name}_aperture must lie in (0, pi)")
        if not self.offset > 0.0:
            raise ValueError(f"{name}_offset must be positive")
        if not 0.0 < self.step_factor <= 1.0:
            raise ValueError(f"{name}_step_factor must lie in (0, 1]")


@dataclass
class ConeSettings:
    """All cone-march tunables. The flat field names double as the wire format."""

    diffuse: ConeFamily = field(default_factory=lambda: ConeFamily(0.55, 0.2, 0.5))
    specular: ConeFamily = field(default_factory=lambda: ConeFamily(0.10, 0.2, 0.5))
    occlusion: ConeFamily = field(default_factory=lambda: ConeFamily(0.30, 0.2, 1.0 / 3.0))
    shadow_str: float = 1.0
    shininess_falloff: float = 10.0
    max_dist: float = 10.0
    front_cones: bool = True
    intermediate_cones: bool = True
    side_cones: bool = False
    direct_diffuse: bool = True
    direct_glossy: bool = True
    indirect_diffuse: bool = True
    indirect_specular: bool = True
    occlusion_enabled: bool = True

    TOGGLE_NAMES = (
        "front_cones", "intermediate_cones", "side_cones",
        "direct_diffuse", "direct_glossy",
        "indirect_diffuse", "indirect_specular", "occlusion_enabled",
    )

    def validate(self):
        self.diffuse.validate("diffuse")
        self.specular.validate("specular")
        self.occlusion.validate("occlusion")
        if self.shadow_str < 0:
            raise ValueError("shadow_str must be >= 0")
        if self.shininess_falloff < 0:
            raise ValueError("shininess_falloff must be >= 0")
        if not self.max_dist > 0:
            raise ValueError("max_dist must be positive")
        return self

    @classmethod
    def defaults(cls, voxel_edge: float, max_dist: float) -> "ConeSettings":
        """Experimentally-tuned defaults, scaled to the grid: offsets of two
        voxel edges, marches capped at the given distance."""
        t0 = 2.0 * voxel_edge
        return cls(
            diffuse=ConeFamily(0.55, t0, 0.5),
            specular=ConeFamily(0.10, t0, 0.5),
            occlusion=ConeFamily(0.30, t0, 1.0 / 3.0),
            max_dist=max_dist,
        ).validate()

    def to_flat(self) -> dict:
        doc = {}
        for fam_name in ("diffuse", "specular", "occlusion"):
            fam: ConeFamily = getattr(self, fam_name)
            doc[f"{fam_name}_aperture"] = fam.aperture
            doc[f"{fam_name}_offset"] = fam.offset
            doc[f"{fam_name}_step_factor"] = fam.step_factor
        doc["shadow_str"] = self.shadow_str
        doc["shininess_falloff"] = self.shininess_falloff
        doc["max_dist"] = self.max_dist
        for name in self.TOGGLE_NAMES:
            doc[name] = bool(getattr(self, name))
        return doc

    def apply_flat(self, doc: dict) -> "ConeSettings":
        """Update from a flat document; unknown keys raise KeyError."""
        for key, value in doc.items():
            if key in self.TOGGLE_NAMES:
                setattr(self, key, bool(value))
                continue
            if key in ("shadow_str", "shininess_falloff", "max_dist"):
                setattr(self, key, float(value))
                continue
            matched = False
            for fam_name in ("diffuse", "specular", "occlusion"):
                for attr in ("aperture", "offset", "step_factor"):
                    if key == f"{fam_name}_{attr}":
                        setattr(getattr(self, fam_name), attr, float(value))
                        matched = True
            if not matched:
                raise KeyError(key)
        return self.validate()

    @classmethod
    def from_flat(cls, doc: dict) -> "ConeSettings":
        return cls().apply_flat(doc)

    def copy(self) -> "ConeSettings":
        return ConeSettings.from_flat(self.to_flat())


@dataclass
class TraceStats:
    """Counts cone marches and march steps, for instrumentation tests and /stats."""

    marches: int = 0
    steps: int = 0


def cone_diameter(t: float, aperture: float) -> float:
    """Cone cross-section diameter after travelling ``t``: 2 t tan(aperture/2)."""
    return 2.0 * t * math.tan(aperture / 2.0)


def smoothstep(e0: float, e1: float, x: float) -> float:
    """Hermite interpolation: 0 below e0, 1 above e1, 3u^2 - 2u^3 between."""
    u = min(max((x - e0) / (e1 - e0), 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_arr(e0, e1, x):
    u = np.clip((x - e0) / (e1 - e0), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def march_cones_batch(
    pyramid: MipPyramid,
    origins: np.ndarray,
    directions: np.ndarray,
    aperture: np.ndarray,
    t0: np.ndarray,
    step_factor: np.ndarray,
    max_dist: np.ndarray,
    kind: int,
    shadow_str: float = 0.0,
    stats: TraceStats | None = None,
):
    """March K cones in lockstep; returns (color (K,3), alpha (K,)).

    Every step samples the pyramid at the cone axis with the LOD matching the
    local cone diameter (floored at one voxel edge) and advances by
    step_factor * diameter, also floored at one voxel edge. A cone stops when
    its accumulator saturates, it travels past max_dist, or it leaves the
    volume bounds by more than its own radius.

    kind selects the per-sample update:
      KIND_ACCUM      front-to-back pair  c <- a*c + (1-a)*a_s*c_s,
                      a <- a + (1-a)*a_s
      KIND_FIRST_HIT  color of the first sample with a_s > 1/100, no
                      accumulation
      KIND_OCCLUSION  a <- a + (1-a) * a_s * smoothstep(0, max_dist,
                      sqrt(t) * shadow_str)
    """
    k = origins.shape[0]
    if stats is not None:
        stats.marches += k
    color = np.zeros((k, 3), dtype=np.float64)
    alpha = np.zeros(k, dtype=np.float64)
    if k == 0:
        return color, alpha

    grid = pyramid.grid
    edge = pyramid.voxel_edge
    center = grid.bounds.center
    half = grid.bounds.half_extent
    tan_half = np.tan(aperture * 0.5)
    t = t0.astype(np.float64).copy()
    active = np.ones(k, dtype=bool)
    # Worst case one voxel edge per step across the whole volume diagonal,
    # plus slack for the offset phase.
    max_steps = int(np.ceil(float(np.max(max_dist)) / edge)) + 8

    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ti = t[idx]
        over = ti > max_dist[idx]
        if over.any():
            active[idx[over]] = False
            idx = idx[~over]
            if idx.size == 0:
                continue
            ti = t[idx]

        d = 2.0 * ti * tan_half[idx]
        p = origins[idx] + ti[:, None] * directions[idx]
        outside = np.max(np.abs(p - center), axis=1) > half + 0.5 * d
        if outside.any():
            active[idx[outside]] = False
            keep = ~outside
            idx, ti, d, p = idx[keep], ti[keep], d[keep], p[keep]
            if idx.size == 0:
                continue

        if stats is not None:
            stats.steps += idx.size
        lod = np.log2(np.maximum(d, edge) / edge)
        sample = sample_lod_batch(pyramid, world_to_texel_batch(grid, p), lod)
        a_s = sample[:, 3]
        c_s = sample[:, :3]

        if kind == KIND_ACCUM:
            a = alpha[idx]
            color[idx] = a[:, None] * color[idx] + ((1.0 - a) * a_s)[:, None] * c_s
            alpha[idx] = a + (1.0 - a) * a_s
            active[idx[alpha[idx] >= ALPHA_SATURATION]] = False
        elif kind == KIND_FIRST_HIT:
            hit = a_s > DIFFUSE_HIT_THRESHOLD
            if hit.any():
                color[idx[hit]] = c_s[hit]
                alpha[idx[hit]] = a_s[hit]
                active[idx[hit]] = False
        elif kind == KIND_OCCLUSION:
            occ_r = a_s * _smoothstep_arr(0.0, max_dist[idx], np.sqrt(ti) * shadow_str)
            a = alpha[idx]
            alpha[idx] = a + (1.0 - a) * occ_r
            active[idx[alpha[idx] >= ALPHA_SATURATION]] = False
        else:
            raise ValueError(f"unknown cone kind {kind}")

        t[idx] = ti + np.maximum(step_factor[idx] * d, edge)

    return color, alpha


def _family_arrays(fam: ConeFamily, k: int, max_dist: float):
    return (
        np.full(k, fam.aperture),
        np.full(k, fam.offset),
        np.full(k, fam.step_factor),
        np.full(k, max_dist),
    )


def march_cone(pyramid: MipPyramid, origin, direction, aperture: float, t0: float,
               step_factor: float, max_dist: float,
               stats: TraceStats | None = None):
    """Single accumulating cone march; returns (color (3,), occlusion in [0,1])."""
    o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    d = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    color, alpha = march_cones_batch(
        pyramid, o, d,
        np.array([aperture]), np.array([t0]), np.array([step_factor]),
        np.array([max_dist]), KIND_ACCUM, stats=stats,
    )
    return color[0], float(alpha[0])


def trace_diffuse(pyramid: MipPyramid, origin, direction, settings: ConeSettings,
                  stats: TraceStats | None = None) -> np.ndarray:
    """Diffuse cone: the stored color of the first sample more solid than 1/100,
    (0,0,0) on a miss."""
    o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    d = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    fam = settings.diffuse
    color, _ = march_cones_batch(
        pyramid, o, d, *_family_arrays(fam, 1, settings.max_dist),
        KIND_FIRST_HIT, stats=stats,
    )
    return color[0]


def specular_brdf(omega, light_dir, shininess: float, falloff: float) -> float:
    """Reflectance of the specular cone by angle to the light.

    An angular grace of 0.008*pi per shininess unit is forgiven before the
    remaining angle, normalized by pi, decays with the given exponent.
    """
    grace = SPECULAR_GRACE_FACTOR * shininess
    angle = math.acos(min(max(float(np.dot(omega, light_dir)), -1.0), 1.0))
    residual = max(0.0, angle - grace)
    return (1.0 - residual / math.pi) ** falloff


def trace_specular(pyramid: MipPyramid, origin, view_dir, n, light_dir,
                   material: Material, settings: ConeSettings,
                   stats: TraceStats | None = None) -> np.ndarray:
    """Specular cone along the mirrored view direction, scaled by the angular
    BRDF toward the given light and the material's specular strength."""
    r = reflect(np.asarray(view_dir, dtype=np.float64), np.asarray(n, dtype=np.float64))
    fam = settings.specular
    o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    color, _ = march_cones_batch(
        pyramid, o, r.reshape(1, 3), *_family_arrays(fam, 1, settings.max_dist),
        KIND_ACCUM, stats=stats,
    )
    brdf = specular_brdf(r, light_dir, material.shininess, settings.shininess_falloff)
    return brdf * color[0] * material.specular_str


def trace_occlusion(pyramid: MipPyramid, origin, light_pos, settings: ConeSettings,
                    stats: TraceStats | None = None) -> float:
    """Occlusion cone toward a light; returns visibility in [0,1] (1 = clear)."""
    origin = np.asarray(origin, dtype=np.float64)
    light_pos = np.asarray(light_pos, dtype=np.float64)
    to_light = light_pos - origin
    dist = math.sqrt(float(to_light @ to_light))
    if dist == 0.0:
        raise ValueError("occlusion cone requires origin != light position")
    fam = settings.occlusion
    capped = min(settings.max_dist, dist)
    _, occ = march_cones_batch(
        pyramid, origin.reshape(1, 3), (to_light / dist).reshape(1, 3),
        np.array([fam.aperture]), np.array([fam.offset]),
        np.array([fam.step_factor]), np.array([capped]),
        KIND_OCCLUSION, shadow_str=settings.shadow_str, stats=stats,
    )
    return 1.0 - float(occ[0])


def tangent_frame(n: np.ndarray):
    """Deterministic (tangent, bitangent) for a unit normal: built from world-up,
    or world-x when the normal is nearly vertical."""
    up = np.array([0.0, 1.0, 0.0])
    if abs(float(n @ up)) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    t = normalize(np.cross(n, up))
    b = np.cross(n, t)
    return t, b


def cone_directions(n, settings: ConeSettings) -> np.ndarray:
    """Unit directions of the enabled diffuse cone sets, (u, 3).

    Order: front (the normal), intermediate (45 degrees off the normal:
    n+t, n-t, n+b, n-b normalized), side (90 degrees: +t, -t, +b, -b).
    """
    n = np.asarray(n, dtype=np.float64)
    t, b = tangent_frame(n)
    dirs = []
    if settings.front_cones:
        dirs.append(n)
    if settings.intermediate_cones:
        s = 1.0 / math.sqrt(2.0)
        dirs += [(n + t) * s, (n - t) * s, (n + b) * s, (n - b) * s]
    if settings.side_cones:
        dirs += [t, -t, b, -b]
    if not dirs:
        return np.zeros((0, 3))
    return np.stack(dirs)


def cone_directions_batch(normals: np.ndarray, settings: ConeSettings) -> np.ndarray:
    """Vectorized ``cone_directions`` for (P, 3) unit normals; returns (P, u, 3)."""
    p = normals.shape[0]
    up = np.broadcast_to(np.array([0.0, 1.0, 0.0]), (p, 3)).copy()
    vertical = np.abs(normals[:, 1]) > 0.99
    up[vertical] = np.array([1.0, 0.0, 0.0])
    t = np.cross(normals, up)
    t /= np.sqrt(np.sum(t * t, axis=1))[:, None]
    b = np.cross(normals, t)
    dirs = []
    if settings.front_cones:
        dirs.append(normals)
    if settings.intermediate_cones:
        s = 1.0 / math.sqrt(2.0)
        dirs += [(normals + t) * s, (normals - t) * s, (normals + b) * s, (normals - b) * s]
    if settings.side_cones:
        dirs += [t, -t, b, -b]
    if not dirs:
        return np.zeros((p, 0, 3))
    return np.stack(dirs, axis=1)


def cones_per_fragment(settings: ConeSettings, light_count: int) -> int:
    """Cone marches shade_fragment performs: occlusion + specular per light
    plus one per enabled diffuse direction."""
    u = 0
    if settings.indirect_diffuse:
        u = (1 if settings.front_cones else 0) \
            + (4 if settings.intermediate_cones else 0) \
            + (4 if settings.side_cones else 0)
    n_occ = light_count if settings.occlusion_enabled else 0
    n_spec = light_count if settings.indirect_specular else 0
    return n_occ + n_spec + u


def shade_fragment(pyramid: MipPyramid, x, n, view_pos, material: Material,
                   lights: list[PointLight], settings: ConeSettings,
                   stats: TraceStats | None = None,
                   normalize_diffuse: bool = True) -> np.ndarray:
    """Combine cone traces and direct Phong light for one surface point.

    result = o_min * sum_q C_diff(q) * diffuse_str * color / u
           + sum_s brdf * C_spec(s) * specular_str
           + sum_s C_occ(s) * phong(s, ambient off)
    clamped to [0,1]; o_min is the minimum occlusion-cone visibility over all
    lights (1 when occlusion is disabled). Marches start from the surface
    point pushed out along the normal by the diffuse cone offset.
    """
    x = np.asarray(x, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    view_pos = np.asarray(view_pos, dtype=np.float64)
    origin = x + settings.diffuse.offset * n

    if settings.occlusion_enabled and lights:
        occ_vis = [trace_occlusion(pyramid, origin, l.position, settings, stats)
                   for l in lights]
        o_min = min(occ_vis)
    else:
        occ_vis = [1.0] * len(lights)
        o_min = 1.0

    result = np.zeros(3)
    if settings.indirect_diffuse:
        dirs = cone_directions(n, settings)
        if len(dirs):
            acc = np.zeros(3)
            for d in dirs:
                acc = acc + trace_diffuse(pyramid, origin, d, settings, stats)
            scale = 1.0 / len(dirs) if normalize_diffuse else 1.0
            result = result + o_min * acc * material.diffuse_str * material.color * scale

    if settings.indirect_specular and lights:
        view_dir = normalize(x - view_pos)
        for light in lights:
            to_light = light.position - x
            dist = math.sqrt(float(to_light @ to_light))
            if dist == 0.0:
                continue
            result = result + trace_specular(
                pyramid, origin, view_dir, n, to_light / dist,
                material, settings, stats,
            )

    if settings.direct_diffuse or settings.direct_glossy:
        for vis, light in zip(occ_vis, lights):
            result = result + vis * phong_direct(
                x, n, view_pos, material, light,
                include_ambient=False,
                include_glossy=settings.direct_glossy,
                include_diffuse=settings.direct_diffuse,
            )

    return np.clip(result, 0.0, 1.0)


def shade_fragments_batch(
    pyramid: MipPyramid,
    x: np.ndarray,
    n: np.ndarray,
    view_pos: np.ndarray,
    colors: np.ndarray,
    ambient_str: np.ndarray,
    diffuse_str: np.ndarray,
    specular_str: np.ndarray,
    shininess: np.ndarray,
    lights: list[PointLight],
    settings: ConeSettings,
    stats: TraceStats | None = None,
    normalize_diffuse: bool = True,
    components: str = "all",
) -> np.ndarray:
    """Vectorized ``shade_fragment`` over (P, 3) points with per-point materials.

    ``components`` narrows the output for the isolation render modes:
    "all", "occlusion" (o_min replicated to gray), "indirect_diffuse",
    or "indirect_specular".
    """
    p = x.shape[0]
    view_pos = np.broadcast_to(np.asarray(view_pos, dtype=np.float64), x.shape)
    origin = x + settings.diffuse.offset * n

    occ_vis = np.ones((p, len(lights)), dtype=np.float64)
    if settings.occlusion_enabled and lights:
        fam = settings.occlusion
        for i, light in enumerate(lights):
            to_light = light.position - origin
            dist = np.sqrt(np.sum(to_light * to_light, axis=1))
            safe = np.where(dist > 0, dist, 1.0)
            capped = np.minimum(settings.max_dist, dist)
            _, occ = march_cones_batch(
                pyramid, origin, to_light / safe[:, None],
                np.full(p, fam.aperture), np.full(p, fam.offset),
                np.full(p, fam.step_factor), capped,
                KIND_OCCLUSION, shadow_str=settings.shadow_str, stats=stats,
            )
            occ_vis[:, i] = 1.0 - occ
    o_min = occ_vis.min(axis=1) if lights else np.ones(p)

    if components == "occlusion":
        return np.repeat(o_min[:, None], 3, axis=1)

    result = np.zeros((p, 3), dtype=np.float64)

    if settings.indirect_diffuse and components in ("all", "indirect_diffuse"):
        dirs = cone_directions_batch(n, settings)
        u = dirs.shape[1]
        if u:
            fam = settings.diffuse
            flat_o = np.repeat(origin, u, axis=0)
            flat_d = dirs.reshape(-1, 3)
            color, _ = march_cones_batch(
                pyramid, flat_o, flat_d,
                *_family_arrays(fam, p * u, settings.max_dist),
                KIND_FIRST_HIT, stats=stats,
            )
            acc = color.reshape(p, u, 3).sum(axis=1)
            scale = 1.0 / u if normalize_diffuse else 1.0
            result += (o_min * diffuse_str)[:, None] * acc * colors * scale
        if components == "indirect_diffuse":
            return np.clip(result, 0.0, 1.0)

    if settings.indirect_specular and lights and components in ("all", "indirect_specular"):
        view = x - view_pos
        vlen = np.sqrt(np.sum(view * view, axis=1))
        view_dir = view / np.where(vlen > 0, vlen, 1.0)[:, None]
        r = view_dir - 2.0 * np.sum(view_dir * n, axis=1)[:, None] * n
        fam = settings.specular
        for light in lights:
            to_light = light.position - x
            dist = np.sqrt(np.sum(to_light * to_light, axis=1))
            l_dir = to_light / np.where(dist > 0, dist, 1.0)[:, None]
            color, _ = march_cones_batch(
                pyramid, origin, r, *_family_arrays(fam, p, settings.max_dist),
                KIND_ACCUM, stats=stats,
            )
            grace = SPECULAR_GRACE_FACTOR * shininess
            angle = np.arccos(np.clip(np.sum(r * l_dir, axis=1), -1.0, 1.0))
            residual = np.maximum(0.0, angle - grace)
            brdf = (1.0 - residual / math.pi) ** settings.shininess_falloff
            brdf = np.where(dist > 0, brdf, 0.0)
            result += (brdf * specular_str)[:, None] * color
        if components == "indirect_specular":
            return np.clip(result, 0.0, 1.0)

    if settings.direct_diffuse or settings.direct_glossy:
        for i, light in enumerate(lights):
            direct = phong_direct_batch(
                x, n, view_pos,
                colors, ambient_str, diffuse_str, specular_str, shininess, light,
                include_ambient=False,
                include_glossy=settings.direct_glossy,
                include_diffuse=settings.direct_diffuse,
            )
            result += occ_vis[:, i][:, None] * direct

    return np.clip(result, 0.0, 1.0)
