"""Phong direct illumination, distance attenuation, and the material/light model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import normalize

# Degenerate shading events (fragment exactly at a light position) are counted
# here so callers can notice without per-call plumbing.
degenerate_light_events = 0


@dataclass
class Material:
    """Phong surface: base color times {ambient, diffuse, specular} strengths
    plus a shininess exponent."""

    color: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.8, 0.8]))
    ambient_str: float = 0.1
    diffuse_str: float = 0.7
    specular_str: float = 0.2
    shininess: float = 32.0

    def __post_init__(self):
        self.color = np.asarray(self.color, dtype=np.float64)
        for name in ("ambient_str", "diffuse_str", "specular_str", "shininess"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"material {name} must be finite and >= 0, got {v}")


@dataclass
class PointLight:
    """Isotropic point light with constant/linear/quadratic falloff constants."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    color: np.ndarray = field(default_factory=lambda: np.ones(3))
    att_constant: float = 1.0
    att_linear: float = 0.09
    att_quadratic: float = 0.032

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.color = np.asarray(self.color, dtype=np.float64)
        if np.any(self.color < 0):
            raise ValueError("light color components must be >= 0")
        ks = (self.att_constant, self.att_linear, self.att_quadratic)
        if any(k < 0 for k in ks) or sum(ks) <= 0:
            raise ValueError("attenuation constants must be >= 0 with positive sum")


def attenuation(light: PointLight, d: float) -> float:
    """Distance falloff 1 / (K_c + K_l*d + K_q*d^2)."""
    return 1.0 / (light.att_constant + light.att_linear * d + light.att_quadratic * d * d)


def reflect(incident: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror ``incident`` across the plane with unit normal ``n``."""
    incident = np.asarray(incident, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return incident - 2.0 * float(incident @ n) * n


def phong_direct(
    x,
    n,
    view_pos,
    material: Material,
    light: PointLight,
    include_ambient: bool = True,
    include_glossy: bool = True,
    include_diffuse: bool = True,
) -> np.ndarray:
    """Single-light Phong value at surface point ``x`` with unit normal ``n``.

    attenuation * (ambient + diffuse * max(L.n, 0) + glossy * max(R.w, 0)^shininess)
    modulated by the material color. The glossy term is additionally gated on
    the light being on the front side (max(L.n, 0) > 0), which the classic
    shader formulation omits; without the gate, back-facing highlights appear.
    """
    global degenerate_light_events
    x = np.asarray(x, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    to_light = light.position - x
    d = math.sqrt(float(to_light @ to_light))
    att = attenuation(light, d)

    result = np.zeros(3)
    if include_ambient:
        result = result + material.ambient_str * light.color

    if d == 0.0:
        degenerate_light_events += 1
        return att * result * material.color

    l_s = to_light / d
    lambert = max(float(l_s @ n), 0.0)
    if include_diffuse:
        result = result + material.diffuse_str * lambert * light.color
    if include_glossy and lambert > 0.0:
        omega = normalize(np.asarray(view_pos, dtype=np.float64) - x)
        r_s = reflect(-l_s, n)
        spec = max(float(r_s @ omega), 0.0) ** material.shininess
        result = result + material.specular_str * spec * light.color
    return att * result * material.color


def phong_direct_batch(
    x: np.ndarray,
    n: np.ndarray,
    view_pos: np.ndarray,
    colors: np.ndarray,
    ambient_str: np.ndarray,
    diffuse_str: np.ndarray,
    specular_str: np.ndarray,
    shininess: np.ndarray,
    light: PointLight,
    include_ambient: bool = True,
    include_glossy: bool = True,
    include_diffuse: bool = True,
) -> np.ndarray:
    """Vectorized ``phong_direct`` over (P, 3) points with per-point materials.

    Matches the scalar routine including the front-side gate on the glossy
    term; points coincident with the light fall back to the ambient term.
    """
    to_light = light.position - x
    d = np.sqrt(np.sum(to_light * to_light, axis=1))
    att = 1.0 / (light.att_constant + light.att_linear * d + light.att_quadratic * d * d)

    result = np.zeros_like(x)
    if include_ambient:
        result = result + ambient_str[:, None] * light.color

    ok = d > 0.0
    safe_d = np.where(ok, d, 1.0)
    l_s = to_light / safe_d[:, None]
    lambert = np.maximum(np.sum(l_s * n, axis=1), 0.0)
    lambert = np.where(ok, lambert, 0.0)
    if include_diffuse:
        result = result + (diffuse_str * lambert)[:, None] * light.color
    if include_glossy:
        omega = view_pos - x
        wlen = np.sqrt(np.sum(omega * omega, axis=1))
        omega = omega / np.where(wlen > 0, wlen, 1.0)[:, None]
        r_s = -l_s - 2.0 * np.sum(-l_s * n, axis=1)[:, None] * n
        rdotw = np.maximum(np.sum(r_s * omega, axis=1), 0.0)
        spec = np.where(lambert > 0.0, rdotw**shininess, 0.0)
        result = result + (specular_str * spec)[:, None] * light.color
    return att[:, None] * result * colors
