import io
import time

import numpy as np
import pytest

from voxelgi import engine as eng
from voxelgi.geometry import Camera
from voxelgi.lighting import phong_direct
from voxelgi.scene_parser import loads_scene

LIGHT_ONLY = "pointlight { position: (0, 4, 0); }"

WALL_SCENE = """
camera { position: (0, 0, 3); yaw: 0; pitch: 0; fov: 1.0; near: 0.1; far: 20; }
model {
  shape: "quad"; name: "wall"; position: (0, 0, 0); scale: (4, 4, 1);
  material { color: (0.8, 0.3, 0.2); ambient: 0.1; diffuse: 0.7; specular: 0.4; shininess: 24; }
}
pointlight { position: (0.5, 1.0, 2.0); color: (1, 0.95, 0.9); attenuation: (1, 0.09, 0.032); }
"""

BOX_SCENE = """
camera { position: (0, 0, 3.0); fov: 1.0; }
model {
  shape: "plane"; name: "floor"; position: (0, -1, 0); scale: (2, 1, 2);
  material { color: (0.9, 0.9, 0.9); }
}
model {
  shape: "cube"; name: "box"; position: (0.1, -0.55, 0.05); scale: (0.6, 0.9, 0.6);
  material { color: (0.4, 0.6, 0.9); }
}
pointlight { position: (0, 0.8, 0.4); }
"""


def job(text, **kw):
    args = dict(scene=loads_scene(text), width=48, height=48, mode="vxct",
                grid_resolution=16)
    args.update(kw)
    return eng.RenderJob(**args)


# --- write_ppm -----------------------------------------------------------------

def test_write_ppm_single_black_pixel():
    img = eng.Image(1, 1, np.zeros((1, 1, 3), dtype=np.uint8))
    buf = io.BytesIO()
    eng.write_ppm(img, buf)
    assert buf.getvalue() == b"P6\n1 1\n255\n\x00\x00\x00"
    assert len(buf.getvalue()) == 11 + 3  # header + one RGB triple


def test_write_ppm_two_pixels_documented_stream():
    px = np.array([[[255, 0, 0], [0, 255, 0]]], dtype=np.uint8)
    img = eng.Image(2, 1, px)
    buf = io.BytesIO()
    eng.write_ppm(img, buf)
    want = b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0])
    assert buf.getvalue() == want
    assert len(want) == 11 + 6


def test_ppm_roundtrip():
    rng = np.random.default_rng(2)
    px = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    img = eng.Image(7, 5, px)
    buf = io.BytesIO()
    eng.write_ppm(img, buf)
    buf.seek(0)
    back = eng.read_ppm(buf)
    assert back.width == 7 and back.height == 5
    assert np.array_equal(back.pixels, px)


# --- render_frame basics ----------------------------------------------------------

def test_empty_scene_single_pixel_is_clear_color():
    image = eng.render_frame(job(LIGHT_ONLY, width=1, height=1, mode="phong"))
    assert image.pixels.shape == (1, 1, 3)
    assert np.array_equal(image.pixels[0, 0], (0, 0, 0))


def test_phong_center_pixel_matches_analytic_hit():
    # Odd resolution puts the center pixel exactly on the optical axis; the
    # camera looks down -Z at a wall in the z=0 plane, so the analytically
    # intersected hit point is the world origin.
    width = height = 65
    scene = loads_scene(WALL_SCENE)
    image = eng.render_frame(job(WALL_SCENE, width=width, height=height, mode="phong"))
    center = image.pixels[height // 2, width // 2].astype(np.float64)

    hit = np.zeros(3)
    normal = np.array([0.0, 0.0, 1.0])
    cam_pos = np.array([0.0, 0.0, 3.0])
    model = scene.models[0]
    want = np.zeros(3)
    for light in scene.lights:
        want += phong_direct(hit, normal, cam_pos, model.material, light,
                             include_ambient=False, include_glossy=True)
    want_px = np.round(np.clip(want, 0, 1) * 255)
    assert np.all(np.abs(center - want_px) <= 1.0), (center, want_px)


def test_render_deterministic_all_modes():
    for mode in eng.RENDER_MODES:
        j = job(BOX_SCENE, mode=mode, width=32, height=32)
        a = eng.render_frame(j)
        b = eng.render_frame(job(BOX_SCENE, mode=mode, width=32, height=32))
        assert np.array_equal(a.pixels, b.pixels), mode


def test_threaded_render_byte_identical():
    one = eng.render_frame(job(BOX_SCENE, threads=1, width=40, height=40))
    four = eng.render_frame(job(BOX_SCENE, threads=4, width=40, height=40))
    assert np.array_equal(one.pixels, four.pixels)


def test_vxct_with_everything_off_equals_phong():
    from voxelgi.conetracer import ConeSettings

    base = job(BOX_SCENE, mode="phong", width=32, height=32)
    phong = eng.render_frame(base)

    j = job(BOX_SCENE, mode="vxct", width=32, height=32)
    engine = eng.Engine(j)
    engine.settings.indirect_diffuse = False
    engine.settings.indirect_specular = False
    engine.settings.occlusion_enabled = False
    vxct = engine.render_frame()
    assert np.array_equal(phong.pixels, vxct.pixels)


def test_occlusion_mode_white_when_shadow_str_zero():
    j = job(BOX_SCENE, mode="occlusion_only", width=24, height=24)
    engine = eng.Engine(j)
    engine.settings.shadow_str = 0.0
    img = engine.render_frame()
    covered = img.pixels.max(axis=2) > 0
    assert covered.any()
    assert np.all(img.pixels[covered] == 255)


def test_voxels_mode_nonempty_iff_grid_has_solid_voxels():
    img = eng.render_frame(job(BOX_SCENE, mode="voxels", width=32, height=32))
    assert img.pixels.max() > 0
    empty = eng.render_frame(job(LIGHT_ONLY, mode="voxels", width=32, height=32))
    assert empty.pixels.max() == 0


def test_gamma_flag_brightens():
    dark = eng.render_frame(job(BOX_SCENE, mode="phong", width=16, height=16))
    bright = eng.render_frame(job(BOX_SCENE, mode="phong", width=16, height=16,
                                  gamma=2.2))
    assert bright.pixels.astype(int).sum() > dark.pixels.astype(int).sum()


def test_bad_job_configuration():
    with pytest.raises(eng.ConfigurationError):
        job(BOX_SCENE, width=0)
    with pytest.raises(eng.ConfigurationError):
        job(BOX_SCENE, mode="raytrace")
    with pytest.raises(eng.ConfigurationError):
        job(BOX_SCENE, grid_resolution=48)


# --- voxelization schedule ----------------------------------------------------------

def test_vox_freq_schedule():
    j = job(BOX_SCENE, width=8, height=8, vox_freq=None)
    engine = eng.Engine(j)
    for _ in range(3):
        engine.render_frame()
    assert engine.voxelize_stats.triangles > 0
    once = engine.voxelize_stats.triangles

    j0 = job(BOX_SCENE, width=8, height=8, vox_freq=0)
    engine0 = eng.Engine(j0)
    for _ in range(3):
        engine0.render_frame()
    assert engine0.voxelize_stats.triangles == 3 * once

    j2 = job(BOX_SCENE, width=8, height=8, vox_freq=2)
    engine2 = eng.Engine(j2)
    for _ in range(4):
        engine2.render_frame()  # voxelizes on frames 0 and 2
    assert engine2.voxelize_stats.triangles == 2 * once


# --- benchmark -----------------------------------------------------------------------

def test_benchmark_mean_of_constant_stub(monkeypatch):
    target = 0.003

    def busy_render(self):
        deadline = time.perf_counter() + target
        while time.perf_counter() < deadline:
            pass
        return eng.Image(1, 1, np.zeros((1, 1, 3), dtype=np.uint8))

    monkeypatch.setattr(eng.Engine, "render_frame", busy_render)
    avg = eng.benchmark(job(LIGHT_ONLY, width=1, height=1), frames=10, warmup=1)
    assert avg == pytest.approx(target, rel=0.05)


def test_benchmark_single_frame():
    avg = eng.benchmark(job(BOX_SCENE, width=8, height=8), frames=1, warmup=0)
    assert avg > 0


# --- bounds ---------------------------------------------------------------------------

def test_scene_bounds_cover_geometry():
    scene = loads_scene(BOX_SCENE)
    bounds = eng.compute_scene_bounds(scene)
    assert bounds.half_extent == pytest.approx(1.0)  # x/z span dominates
    from voxelgi.geometry import transform_points
    for model in scene.models:
        world = transform_points(model.transform.model_matrix, model.mesh.positions)
        assert np.all(np.abs(world - bounds.center) <= bounds.half_extent + 1e-9)
