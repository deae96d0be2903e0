"""voxelgi: deterministic CPU voxel-cone-traced global illumination.

Pipeline: voxelize a triangle scene's direct Phong light into a mipmapped
cubic RGBA grid, then shade each pixel by combining direct light with
diffuse / specular / occlusion cone marches over the pyramid.
"""

from .conetracer import (
    ConeFamily,
    ConeSettings,
    TraceStats,
    cone_diameter,
    cone_directions,
    march_cone,
    shade_fragment,
    smoothstep,
    specular_brdf,
    trace_diffuse,
    trace_occlusion,
    trace_specular,
)
from .engine import Engine, Image, RenderJob, benchmark, render_frame, write_ppm
from .geometry import (
    Bounds,
    Camera,
    Mesh,
    Transform,
    load_obj,
    orthographic_matrix,
    perspective_matrix,
    transform_normal,
    transform_point,
    view_matrix,
)
from .lighting import Material, PointLight, attenuation, phong_direct, reflect
from .mipvolume import (
    MipPyramid,
    VoxelGrid,
    build_mipmaps,
    clear,
    dump_vxg,
    export_visualization,
    load_vxg,
    sample_lod,
    world_to_texel,
)
from .raster import Framebuffer, Fragment, project_triangle, rasterize
from .scene_parser import Scene, SceneError, build, lex, load_scene, parse, serialize
from .voxelizer import dominant_axis, swizzle_for_axis, voxelize_scene

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
