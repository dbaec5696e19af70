"""Scripted manipulation demonstrations with deterministic outcomes.

Each function builds its own scene from a seed, drives effectors along
hand-authored trajectories, and returns the final particle state together
with the relevant benchmark metric, so the same seed always reproduces the
same bytes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tasks
from .cloth import make_cloth_grid
from .effector import Effector, GripperState, Keyframe, Trajectory, make_fling
from .engine import Scene, settle
from .rigid import Plane, RigidCollider
from .transforms import Pose


@dataclass
class ScriptResult:
    positions: np.ndarray       # final garment particle positions
    metrics: dict               # metric name -> value


def _pick_place_trajectory(p_pick, p_place, lift_height: float = 0.10,
                           travel_time: float = 2.5) -> Trajectory:
    """Grasp at p_pick, carry over an arched midpoint, set down at p_place."""
    p_pick = np.asarray(p_pick, dtype=np.float64)
    p_place = np.asarray(p_place, dtype=np.float64)
    mid = (p_pick + p_place) / 2 + np.array([0.0, 0.0, lift_height])
    return Trajectory([
        Keyframe(0.0, Pose(p_pick), GripperState.Open),
        Keyframe(0.2, Pose(p_pick), GripperState.Closed),
        Keyframe(0.2 + travel_time / 2, Pose(mid), GripperState.Closed),
        Keyframe(0.2 + travel_time, Pose(p_place), GripperState.Closed),
        Keyframe(0.5 + travel_time, Pose(p_place), GripperState.Open),
    ])


def two_fold_demo(seed: int = 7) -> ScriptResult:
    """Fold a flat 30x30 cloth in half twice (right-to-left, then
    top-to-bottom) with two synchronized grippers, and score the result as
    top-down silhouette IoU against the quartered rectangle target.

    The small placement overshoot and drop height keep the carried edge from
    landing short of the crease line."""
    size = 0.58  # 30 particles at 0.02 m spacing
    overshoot = 0.04
    drop_z = 0.02
    square_tris = np.array([[0, 1, 2], [0, 2, 3]])

    pos, tris, uv = make_cloth_grid(30, 30, 0.02)
    pos = pos + np.array([0.0, 0.0, 0.008])
    scene = Scene(dt=1 / 120, iterations=20, rng_seed=seed)
    scene.add_garment(pos, tris, 0.001, uv=uv)
    scene.colliders.append(RigidCollider(Plane(), friction=1.0))
    scene.effectors += [Effector(grasp_radius=0.025), Effector(grasp_radius=0.025)]
    p = scene.particles.positions

    # fold 1: carry the +x edge corners onto the x = 0 crease
    plan = [
        (scene.effectors[0], _pick_place_trajectory(p[870].copy(), [overshoot, 0.0, 0.015])),
        (scene.effectors[1], _pick_place_trajectory(p[899].copy(), [overshoot, size, 0.015])),
    ]
    tasks.run_trajectories(scene, plan)
    settle(scene, 300)

    # fold 2: carry the +y edge corners onto the y = 0 crease
    state = p[:900]

    def nearest(xy):
        return int(np.argmin(np.linalg.norm(state[:, :2] - xy, axis=1)))

    i1 = nearest(np.array([0.0, size]))
    i2 = nearest(np.array([size / 2, size]))
    plan = [
        (scene.effectors[0], _pick_place_trajectory(state[i1].copy(), [0.0, overshoot, drop_z])),
        (scene.effectors[1], _pick_place_trajectory(state[i2].copy(), [size / 2, overshoot, drop_z])),
    ]
    tasks.run_trajectories(scene, plan)
    settle(scene, 300)

    quarter = np.array([[0, 0, 0], [size / 2, 0, 0],
                        [size / 2, size / 2, 0], [0, size / 2, 0]])
    bounds = tasks.silhouette_bounds(state, quarter)
    target = tasks.rasterize_silhouette(quarter, square_tris, 128, bounds)
    iou = tasks.metric_iou_topdown(state, tris, target, 128, bounds)
    return ScriptResult(positions=state.copy(), metrics={"iou": iou})


def crumple_and_fling_demo(seed: int = 11) -> ScriptResult:
    """Crumple a flat cloth into a pile (grasp the center, lift, release),
    then fling it open with two grippers; coverage against the flat
    reference should not decrease."""
    pos, tris, uv = make_cloth_grid(30, 30, 0.02)
    pos = pos + np.array([0.0, 0.0, 0.008])
    scene = Scene(dt=1 / 120, iterations=20, rng_seed=seed)
    scene.add_garment(pos, tris, 0.001, uv=uv)
    scene.colliders.append(RigidCollider(Plane(), friction=0.5))
    e1, e2 = Effector(grasp_radius=0.03), Effector(grasp_radius=0.03)
    scene.effectors += [e1, e2]
    flat = scene.particles.positions[:900].copy()
    state = scene.particles.positions[:900]

    center = state[435].copy()
    crumple = Trajectory([
        Keyframe(0.0, Pose(center), GripperState.Open),
        Keyframe(0.25, Pose(center), GripperState.Closed),
        Keyframe(1.25, Pose(center + np.array([0, 0, 0.35])), GripperState.Closed),
        Keyframe(1.6, Pose(center + np.array([0, 0, 0.30])), GripperState.Open),
    ])
    tasks.run_trajectories(scene, [(e1, crumple)])
    settle(scene, 500)
    coverage_before = tasks.metric_coverage(state, tris, flat)

    # pick two xy-opposite extremes of the pile and fling
    i1 = int(np.argmin(state[:, 0] + state[:, 1]))
    i2 = int(np.argmax(state[:, 0] - state[:, 1]))
    t1, t2 = make_fling([state[i1].copy(), state[i2].copy()],
                        lift_height=0.4, swing_amplitude=0.3, swing_duration=0.9)
    tasks.run_trajectories(scene, [(e1, t1), (e2, t2)])
    settle(scene, 400)
    coverage_after = tasks.metric_coverage(state, tris, flat)
    return ScriptResult(positions=state.copy(),
                        metrics={"coverage_before": coverage_before,
                                 "coverage_after": coverage_after})
