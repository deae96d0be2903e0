"""Command line interface: render, bench, and voxelize subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import ALLOWED_GRID_SIZES, Engine, RenderJob, benchmark, write_ppm
from .mipvolume import dump_vxg
from .scene_parser import SceneError, load_scene


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scene", required=True, help="scene description file")
    p.add_argument("--grid", default="64",
                   help="voxel grid resolution (bench accepts a comma list)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxelgi",
                                     description="CPU voxel cone tracing renderer")
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser("render", help="render one frame to a PPM file")
    _add_common(render)
    render.add_argument("--out", required=True, help="output .ppm path")
    render.add_argument("--width", type=int, default=256)
    render.add_argument("--height", type=int, default=256)
    render.add_argument("--mode", default="vxct",
                        choices=["phong", "vxct", "occlusion_only",
                                 "indirect_diffuse_only", "indirect_specular_only",
                                 "voxels"])
    render.add_argument("--lod", type=int, default=0, help="mip level for voxels mode")
    render.add_argument("--vox-freq", type=int, default=None,
                        help="frames between revoxelizations (0 = every frame)")
    render.add_argument("--threads", type=int, default=1)
    render.add_argument("--gamma", type=float, default=None)

    bench = sub.add_parser("bench", help="average frametime over repeated renders")
    _add_common(bench)
    bench.add_argument("--frames", type=int, default=100)
    bench.add_argument("--width", type=int, default=128)
    bench.add_argument("--height", type=int, default=128)
    bench.add_argument("--mode", default="vxct")
    bench.add_argument("--threads", type=int, default=1)
    bench.add_argument("--revoxelize", action="store_true",
                       help="revoxelize every frame (vox_freq = 0)")

    vox = sub.add_parser("voxelize", help="voxelize a scene and dump the grid")
    _add_common(vox)
    vox.add_argument("--dump", required=True, help="output .vxg path")
    return parser


def _load(path: str):
    try:
        return load_scene(path)
    except FileNotFoundError:
        print(f"scene file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    except SceneError as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _grid_sizes(spec: str) -> list[int]:
    sizes = [int(s) for s in spec.split(",") if s]
    for n in sizes:
        if n not in ALLOWED_GRID_SIZES:
            print(f"grid size {n} not in {ALLOWED_GRID_SIZES}", file=sys.stderr)
            raise SystemExit(2)
    return sizes


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "render":
        scene = _load(args.scene)
        job = RenderJob(scene=scene, width=args.width, height=args.height,
                        mode=args.mode, grid_resolution=_grid_sizes(args.grid)[0],
                        lod=args.lod, vox_freq=args.vox_freq,
                        threads=args.threads, gamma=args.gamma)
        image = Engine(job).render_frame()
        with open(args.out, "wb") as fh:
            write_ppm(image, fh)
        print(f"wrote {args.out} ({image.width}x{image.height}, mode {args.mode})")
        return 0

    if args.command == "bench":
        scene = _load(args.scene)
        label = "with revoxelization" if args.revoxelize else "voxelize once"
        print(f"{'voxel map size':>16} | avg. frametime ({label}, "
              f"{args.frames} frames)")
        for n in _grid_sizes(args.grid):
            job = RenderJob(scene=scene, width=args.width, height=args.height,
                            mode=args.mode, grid_resolution=n,
                            vox_freq=0 if args.revoxelize else None,
                            threads=args.threads)
            avg = benchmark(job, args.frames)
            print(f"{f'{n}x{n}x{n}':>16} | {avg:.5f}s")
        return 0

    if args.command == "voxelize":
        scene = _load(args.scene)
        job = RenderJob(scene=scene, grid_resolution=_grid_sizes(args.grid)[0])
        engine = Engine(job)
        seconds = engine.voxelize()
        with open(args.dump, "wb") as fh:
            dump_vxg(engine.grid, fh)
        print(f"voxelized {Path(args.scene).name} into {args.dump} "
              f"({engine.grid.resolution}^3) in {seconds:.3f}s")
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
