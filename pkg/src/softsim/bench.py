"""Batch benchmark runner: executes independent seeded episodes from a
taskset file, optionally across worker processes, and merges results in
submission order so the output CSV is identical at any worker count."""
from __future__ import annotations

import json
import multiprocessing
import os
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .scene_io import build_scene, normalize_config, write_results_csv
from .tasks import (GoalState, RandomizeMode, TaskKind, TaskSpec,
                    randomize_initial_state, run_episode, split_dataset)

_TASK_FIELDS = ("distance_threshold", "iou_threshold", "coverage_tolerance",
                "pass_fraction", "hold_duration", "grid_resolution",
                "place_radius", "ground_clearance")


def load_taskset(path) -> dict:
    doc = json.loads(Path(path).read_text())
    return normalize_taskset(doc)


def normalize_taskset(doc: dict) -> dict:
    for key in ("scene", "task"):
        if key not in doc:
            raise SchemaError(f"taskset missing {key!r}")
    if "kind" not in doc["task"]:
        raise SchemaError("taskset task needs a kind")
    doc.setdefault("count", 10)
    doc.setdefault("base_seed", 0)
    doc.setdefault("split_seed", 0)
    doc.setdefault("randomize_mode",
                   RandomizeMode.FlatWithDisturbance.value
                   if doc["task"]["kind"] == "fold"
                   else RandomizeMode.DropFromRandomPose.value)
    doc.setdefault("episode_ids",
                   [f"ep{i:04d}" for i in range(int(doc["count"]))])
    normalize_config(doc["scene"])
    return doc


def _task_from(doc: dict, seed: int, goal: GoalState, episode_id: str) -> TaskSpec:
    cfg = doc["task"]
    kwargs = {k: cfg[k] for k in _TASK_FIELDS if k in cfg}
    return TaskSpec(kind=TaskKind(cfg["kind"]), goal=goal, seed=seed,
                    garment_id=cfg.get("garment_id", episode_id), **kwargs)


def run_one(doc: dict, episode_id: str, seed: int) -> dict:
    """One full episode: build, randomize, evaluate.  Pure function of
    (taskset, id, seed) so workers can run it independently."""
    scene = build_scene({**doc["scene"], "seed": seed})
    garment = scene.garments[0]
    lo, hi = garment.particle_range.start, garment.particle_range.stop
    flat = scene.particles.positions[lo:hi].copy()
    goal = GoalState(demo_positions=flat.copy(), flat_positions=flat)
    task = _task_from(doc, seed, goal, episode_id)
    settled = randomize_initial_state(scene, garment, doc["randomize_mode"], seed)
    result = run_episode(scene, task, trajectory_plan=doc.get("plan", []),
                         garment=garment)
    return {"task": task.kind.value, "garment_id": task.garment_id,
            "seed": seed, "success": result.success,
            "hold_satisfied": result.hold_satisfied,
            "frames_evaluated": result.frames_evaluated,
            "wall_time": round(result.wall_time, 4),
            "metrics": {k: v for k, v in result.metric_values.items()},
            "settled": settled}


def _worker(args):
    doc, episode_id, seed = args
    return run_one(doc, episode_id, seed)


def episode_seed(base_seed: int, episode_id: str) -> int:
    """Stable per-episode seed derived from the id, independent of split."""
    h = np.uint64(1469598103934665603)
    for ch in episode_id.encode():
        h = np.uint64((int(h) ^ ch) * 1099511628211 % (1 << 64))
    return int((np.uint64(base_seed) ^ h) % np.uint64(2 ** 31))


def run_benchmark(doc: dict, split: str | None = None,
                  workers: int | None = None) -> list[dict]:
    """Run the taskset's episodes (optionally one 70/15/15 split) and return
    result rows in episode order regardless of worker count."""
    ids = list(doc["episode_ids"])
    if split is not None:
        train, val, test = split_dataset(ids, doc["split_seed"])
        ids = {"train": train, "val": val, "test": test}[split]
    jobs = [(doc, eid, episode_seed(doc["base_seed"], eid)) for eid in ids]
    if workers is None:
        workers = int(os.environ.get("GL_THREADS", "1"))
    if workers <= 1 or len(jobs) <= 1:
        rows = [_worker(job) for job in jobs]
    else:
        with multiprocessing.Pool(workers) as pool:
            rows = list(pool.imap(_worker, jobs))  # submission-order merge
    return rows


def run_benchmark_to_csv(doc: dict, out_path, split: str | None = None,
                         workers: int | None = None) -> list[dict]:
    rows = run_benchmark(doc, split=split, workers=workers)
    write_results_csv(out_path, rows)
    return rows
