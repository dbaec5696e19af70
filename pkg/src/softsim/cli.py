"""Command-line interface.

Subcommands: run, bench, replay, align, noise, serve, snapshot.
Environment: GL_SEED overrides the default seed, GL_THREADS sets the
benchmark worker count.  Failures print one machine-readable line
`error: <Type>: <message>` and exit non-zero (replay divergence exits 3).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod, episode as episode_mod, scene_io
from .engine import run as run_steps
from .errors import SnapshotDivergence, SoftsimError
from .sim2real import NoiseParams, add_depth_noise, chamfer, fit_affine

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3


def _seed_default() -> int:
    return int(os.environ.get("GL_SEED", "0"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softsim",
                                     description="deformable-object simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scene, optionally recording an episode")
    p.add_argument("scene")
    p.add_argument("--steps", type=int, default=120)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="episode output path")
    p.add_argument("--snapshot-interval", type=int, default=10)

    p = sub.add_parser("bench", help="run a benchmark taskset to CSV")
    p.add_argument("taskset")
    p.add_argument("--split", choices=["train", "val", "test"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("replay", help="replay a recorded episode and verify snapshots")
    p.add_argument("episode")

    p = sub.add_parser("align", help="fit an affine transform between two point clouds")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--out", default="transform.json")

    p = sub.add_parser("noise", help="perturb a 16-bit depth PNG")
    p.add_argument("depth")
    p.add_argument("--sigma", type=float, default=0.005)
    p.add_argument("--p-gauss", type=float, default=0.0)
    p.add_argument("--p-salt", type=float, default=0.0)
    p.add_argument("--p-pepper", type=float, default=0.0)
    p.add_argument("--salt", type=float, default=0.05)
    p.add_argument("--pepper", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")

    p = sub.add_parser("serve", help="serve the scene over WebSocket")
    p.add_argument("scene")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("snapshot", help="simulate and export particle state")
    p.add_argument("scene")
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("--format", choices=["ply", "obj"], default="ply")
    p.add_argument("--out")
    return parser


def _load_cloud(path):
    path = str(path)
    if path.endswith(".ply"):
        return scene_io.load_ply(path)
    return scene_io.load_xyz(path)


def _cmd_run(args) -> int:
    config = scene_io.load_config(args.scene)
    if args.seed is not None or "GL_SEED" in os.environ:
        config["seed"] = args.seed if args.seed is not None else _seed_default()
    if args.out:
        record = episode_mod.record_episode(config, [{"type": "step", "n": args.steps}],
                                            snapshot_interval=args.snapshot_interval)
        episode_mod.save_episode(args.out, record)
        print(f"recorded {args.steps} steps -> {args.out}")
    else:
        scene = scene_io.build_scene(config, base_dir=Path(args.scene).parent)
        run_steps(scene, args.steps)
        print(f"simulated {args.steps} steps, t={scene.sim_time:.4f}s, "
              f"ke={scene.kinetic_energy_per_particle():.3e}")
    return 0


def _cmd_bench(args) -> int:
    doc = bench_mod.load_taskset(args.taskset)
    if args.seed is not None:
        doc["base_seed"] = args.seed
    elif "GL_SEED" in os.environ:
        doc["base_seed"] = _seed_default()
    rows = bench_mod.run_benchmark_to_csv(doc, args.out, split=args.split,
                                          workers=args.workers)
    successes = sum(1 for r in rows if r["success"])
    print(f"{len(rows)} episodes, {successes} successes -> {args.out}")
    return 0


def _cmd_replay(args) -> int:
    record = episode_mod.load_episode(args.episode)
    episode_mod.replay_episode(record)
    print(f"replayed {len(record.commands)} commands, "
          f"{len(record.snapshots)} snapshots verified")
    return 0


def _cmd_align(args) -> int:
    source = _load_cloud(args.source)
    target = _load_cloud(args.target)
    before = chamfer(source, target)
    transform, after = fit_affine(source, target)
    Path(args.out).write_text(json.dumps(
        {"matrix": transform.as_4x4().tolist(),
         "chamfer_before": before, "chamfer_after": after}, indent=2))
    print(f"chamfer {before:.6g} -> {after:.6g}, transform -> {args.out}")
    return 0


def _cmd_noise(args) -> int:
    img, intrinsics = scene_io.load_depth_png(args.depth)
    params = NoiseParams(sigma=args.sigma, p_gaussian=args.p_gauss,
                         p_salt=args.p_salt, p_pepper=args.p_pepper,
                         salt_magnitude=args.salt, pepper_magnitude=args.pepper)
    seed = args.seed if args.seed is not None else _seed_default()
    rng = np.random.Generator(np.random.Philox(key=(seed, 0xDEB7)))
    noisy = add_depth_noise(img, params, rng)
    out = args.out or str(Path(args.depth).with_suffix("")) + "_noisy.png"
    scene_io.save_depth_png(out, noisy, intrinsics)
    print(f"noisy depth -> {out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    config = scene_io.load_config(args.scene)
    print(f"serving {args.scene} on ws://{args.host}:{args.port}/ws")
    serve(config, port=args.port, host=args.host)
    return 0


def _cmd_snapshot(args) -> int:
    config = scene_io.load_config(args.scene)
    scene = scene_io.build_scene(config, base_dir=Path(args.scene).parent)
    run_steps(scene, args.steps)
    out = args.out or str(Path(args.scene).with_suffix("")) + f".{args.format}"
    if args.format == "ply":
        scene_io.save_ply(out, scene.particles.positions)
    else:
        tris = (np.vstack([g.triangles for g in scene.garments])
                if scene.garments else np.zeros((0, 3), np.int64))
        scene_io.save_obj(out, scene.particles.positions, tris)
    print(f"{len(scene.particles)} particles -> {out}")
    return 0


_COMMANDS = {"run": _cmd_run, "bench": _cmd_bench, "replay": _cmd_replay,
             "align": _cmd_align, "noise": _cmd_noise, "serve": _cmd_serve,
             "snapshot": _cmd_snapshot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SnapshotDivergence as exc:
        print(f"error: SnapshotDivergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except SoftsimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: FileNotFoundError: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
