import math

import numpy as np
import pytest

from voxelgi import lighting as lt
from voxelgi.geometry import normalize, rotation_x, rotation_y, rotation_z


def phong_oracle(x, n, view_pos, mat, light, ambient=True, glossy=True):
    """Term-by-term scalar evaluation of the Phong formula, kept deliberately
    independent of the library implementation."""
    lx, ly, lz = light.position
    dx, dy, dz = lx - x[0], ly - x[1], lz - x[2]
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    att = 1.0 / (light.att_constant + light.att_linear * d + light.att_quadratic * d * d)
    out = [0.0, 0.0, 0.0]
    if ambient:
        for c in range(3):
            out[c] += mat.ambient_str * light.color[c]
    if d > 0:
        L = (dx / d, dy / d, dz / d)
        lam = max(L[0] * n[0] + L[1] * n[1] + L[2] * n[2], 0.0)
        for c in range(3):
            out[c] += mat.diffuse_str * lam * light.color[c]
        if glossy and lam > 0:
            wx, wy, wz = view_pos[0] - x[0], view_pos[1] - x[1], view_pos[2] - x[2]
            wl = math.sqrt(wx * wx + wy * wy + wz * wz)
            w = (wx / wl, wy / wl, wz / wl)
            minus_l = (-L[0], -L[1], -L[2])
            dot = minus_l[0] * n[0] + minus_l[1] * n[1] + minus_l[2] * n[2]
            r = tuple(minus_l[c] - 2 * dot * n[c] for c in range(3))
            rv = max(r[0] * w[0] + r[1] * w[1] + r[2] * w[2], 0.0)
            s = rv ** mat.shininess
            for c in range(3):
                out[c] += mat.specular_str * s * light.color[c]
    return np.array([att * out[c] * mat.color[c] for c in range(3)])


# --- attenuation ---------------------------------------------------------------

@pytest.mark.parametrize("ks,d,expected", [
    ((1, 0, 0), 7.0, 1.0),
    ((1, 1, 0), 1.0, 0.5),
    ((1, 0, 1), 3.0, 0.1),
])
def test_attenuation_examples(ks, d, expected):
    light = lt.PointLight(att_constant=ks[0], att_linear=ks[1], att_quadratic=ks[2])
    assert lt.attenuation(light, d) == pytest.approx(expected)


def test_attenuation_strictly_decreasing():
    light = lt.PointLight(att_constant=1.0, att_linear=0.2, att_quadratic=0.05)
    ds = np.linspace(0, 10, 50)
    vals = [lt.attenuation(light, d) for d in ds]
    assert all(a > b for a, b in zip(vals, vals[1:]))


# --- reflect --------------------------------------------------------------------

def test_reflect_head_on():
    assert np.allclose(lt.reflect((0, -1, 0), (0, 1, 0)), (0, 1, 0))


def test_reflect_grazing_unchanged():
    assert np.allclose(lt.reflect((1, 0, 0), (0, 1, 0)), (1, 0, 0))


def test_reflect_mirror_across_normal():
    s = 1 / math.sqrt(2)
    assert np.allclose(lt.reflect((s, -s, 0), (0, 1, 0)), (s, s, 0))


# --- phong_direct ----------------------------------------------------------------

def white_material(**kw):
    args = dict(color=(1, 1, 1), ambient_str=0.0, diffuse_str=1.0,
                specular_str=0.0, shininess=1.0)
    args.update(kw)
    return lt.Material(**args)


def test_phong_light_directly_above():
    mat = white_material()
    light = lt.PointLight(position=(0, 1, 0), att_constant=1, att_linear=0,
                          att_quadratic=0)
    got = lt.phong_direct((0, 0, 0), (0, 1, 0), (0, 0, 5), mat, light)
    assert np.allclose(got, (1, 1, 1))


def test_phong_light_behind_surface_is_black():
    mat = white_material(specular_str=1.0)
    light = lt.PointLight(position=(0, -2, 0), att_constant=1, att_linear=0,
                          att_quadratic=0)
    got = lt.phong_direct((0, 0, 0), (0, 1, 0), (0, 3, 3), mat, light,
                          include_ambient=False)
    assert np.allclose(got, (0, 0, 0))


def test_phong_full_case_matches_oracle():
    # 45 degree incidence, viewer exactly along the mirror direction, d = 2.
    mat = lt.Material(color=(1, 1, 1), ambient_str=0.2, diffuse_str=0.5,
                      specular_str=0.4, shininess=32.0)
    x = np.zeros(3)
    n = np.array([0.0, 1.0, 0.0])
    s = math.sqrt(2.0)
    light = lt.PointLight(position=(s, s, 0), color=(1.0, 0.9, 0.8),
                          att_constant=1.0, att_linear=0.1, att_quadratic=0.01)
    view = np.array([-s, s, 0.0]) * 3.0
    got = lt.phong_direct(x, n, view, mat, light)
    want = phong_oracle(x, n, view, mat, light)
    assert np.allclose(got, want, atol=1e-12)


def test_phong_random_cases_match_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        mat = lt.Material(color=rng.uniform(0, 1, 3),
                          ambient_str=rng.uniform(0, 1),
                          diffuse_str=rng.uniform(0, 1),
                          specular_str=rng.uniform(0, 1),
                          shininess=rng.uniform(0, 64))
        light = lt.PointLight(position=rng.normal(size=3),
                              color=rng.uniform(0, 2, 3),
                              att_constant=rng.uniform(0.5, 2),
                              att_linear=rng.uniform(0, 0.5),
                              att_quadratic=rng.uniform(0, 0.2))
        x = rng.normal(size=3)
        n = normalize(rng.normal(size=3))
        view = rng.normal(size=3) * 3
        got = lt.phong_direct(x, n, view, mat, light)
        want = phong_oracle(x, n, view, mat, light)
        assert np.allclose(got, want, atol=1e-12)


def test_phong_degenerate_light_at_surface():
    mat = lt.Material(color=(1, 1, 1), ambient_str=0.3, diffuse_str=1.0,
                      specular_str=1.0, shininess=8.0)
    light = lt.PointLight(position=(1, 2, 3), att_constant=2.0, att_linear=0,
                          att_quadratic=0)
    before = lt.degenerate_light_events
    got = lt.phong_direct((1, 2, 3), (0, 1, 0), (5, 5, 5), mat, light)
    assert lt.degenerate_light_events == before + 1
    assert np.allclose(got, 0.5 * 0.3 * np.ones(3))  # attenuated ambient only


def test_phong_monotone_in_strengths():
    light = lt.PointLight(position=(1, 3, 0.5))
    x, n, view = np.zeros(3), np.array([0, 1.0, 0]), np.array([0, 2, 2.0])
    base = lt.phong_direct(x, n, view, white_material(ambient_str=0.1,
                                                      specular_str=0.1), light)
    for kw in ("ambient_str", "diffuse_str", "specular_str"):
        bumped = white_material(ambient_str=0.1, specular_str=0.1)
        setattr(bumped, kw, getattr(bumped, kw) + 0.5)
        more = lt.phong_direct(x, n, view, bumped, light)
        assert np.all(more >= base - 1e-15)


def test_phong_rigid_rotation_invariance():
    rng = np.random.default_rng(5)
    mat = lt.Material(color=(0.2, 0.5, 0.4), ambient_str=0.1, diffuse_str=0.6,
                      specular_str=0.3, shininess=16.0)
    for _ in range(20):
        x = rng.normal(size=3)
        n = normalize(rng.normal(size=3))
        view = rng.normal(size=3)
        lpos = rng.normal(size=3)
        light = lt.PointLight(position=lpos)
        base = lt.phong_direct(x, n, view, mat, light)
        rot = (rotation_z(rng.uniform(0, 6)) @ rotation_y(rng.uniform(0, 6))
               @ rotation_x(rng.uniform(0, 6)))[:3, :3]
        light2 = lt.PointLight(position=rot @ lpos)
        got = lt.phong_direct(rot @ x, rot @ n, rot @ view, mat, light2)
        assert np.allclose(got, base, atol=1e-6)


def test_phong_view_independent_without_glossy():
    mat = lt.Material(color=(1, 0.6, 0.3), ambient_str=0.2, diffuse_str=0.7,
                      specular_str=0.9, shininess=4.0)
    light = lt.PointLight(position=(0, 4, 0))
    x, n = np.zeros(3), np.array([0, 1.0, 0])
    a = lt.phong_direct(x, n, (9, 1, -4), mat, light, include_glossy=False)
    b = lt.phong_direct(x, n, (-2, 8, 1), mat, light, include_glossy=False)
    assert np.array_equal(a, b)


def test_phong_batch_matches_scalar():
    rng = np.random.default_rng(23)
    p = 64
    x = rng.normal(size=(p, 3))
    n = rng.normal(size=(p, 3))
    n /= np.linalg.norm(n, axis=1)[:, None]
    view = rng.normal(size=(p, 3))
    colors = rng.uniform(0, 1, (p, 3))
    amb = rng.uniform(0, 1, p)
    dif = rng.uniform(0, 1, p)
    spec = rng.uniform(0, 1, p)
    shin = rng.uniform(0, 64, p)
    light = lt.PointLight(position=(0.3, 2.0, -1.0), color=(1, 0.8, 0.6))
    batch = lt.phong_direct_batch(x, n, view, colors, amb, dif, spec, shin, light)
    for i in range(p):
        mat = lt.Material(colors[i], amb[i], dif[i], spec[i], shin[i])
        assert np.allclose(batch[i], lt.phong_direct(x[i], n[i], view[i], mat, light),
                           atol=1e-12)


def test_material_invariants():
    with pytest.raises(ValueError):
        lt.Material(ambient_str=-0.1)
    with pytest.raises(ValueError):
        lt.PointLight(att_constant=0, att_linear=0, att_quadratic=0)
