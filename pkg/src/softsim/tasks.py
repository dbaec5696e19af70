"""Benchmark layer: task specifications, initial-state randomization, success
metrics (particle distance, top-down IoU, coverage, vertex-range unfolding),
the persistent-success hold rule, dataset splits, and the episode runner."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import engine as engine_mod
from .effector import GripperState, Trajectory, grasp as effector_grasp, release as effector_release
from .errors import CountMismatch, EmptySilhouette, NoParticleInRange, TooFewItems
from .transforms import Pose, quat_multiply, quat_rotate, random_quat, quat_from_axis_angle


class TaskKind(str, Enum):
    Fold = "fold"
    Unfold = "unfold"
    Hang = "hang"
    Place = "place"


@dataclass
class GoalState:
    """Reference states a metric compares against: the final state of a
    recorded demonstration and the canonical flat state."""
    demo_positions: np.ndarray | None = None
    flat_positions: np.ndarray | None = None

    def __post_init__(self):
        if self.demo_positions is not None:
            self.demo_positions = np.asarray(self.demo_positions, dtype=np.float64)
        if self.flat_positions is not None:
            self.flat_positions = np.asarray(self.flat_positions, dtype=np.float64)


@dataclass
class TaskSpec:
    kind: TaskKind
    garment_id: str = "garment0"
    goal: GoalState = field(default_factory=GoalState)
    distance_threshold: float = 0.0   # m * particles, Fold/Hang
    iou_threshold: float = 0.85
    coverage_tolerance: float = 0.0   # m, Unfold vertex range
    pass_fraction: float = 0.8        # Unfold: share of in-range vertices
    hold_duration: float = 5.0        # s
    seed: int = 0
    grid_resolution: int = 128
    # Place: target disc on the support surface
    place_center: np.ndarray | None = None
    place_radius: float = 0.1
    ground_clearance: float = 0.005   # m, "touching the ground" threshold

    def __post_init__(self):
        self.kind = TaskKind(self.kind)
        if self.hold_duration < 0:
            raise ValueError("hold_duration must be >= 0")
        for name in ("distance_threshold", "iou_threshold", "coverage_tolerance"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.place_center is not None:
            self.place_center = np.asarray(self.place_center, dtype=np.float64)


@dataclass
class EpisodeResult:
    success: bool
    metric_values: dict
    hold_satisfied: bool
    frames_evaluated: int
    wall_time: float
    settled: bool = True

    def __post_init__(self):
        if self.success and not self.hold_satisfied:
            raise ValueError("success requires hold_satisfied")


# ---------------------------------------------------------------------------
# initial-state randomization


class RandomizeMode(str, Enum):
    DropFromRandomPose = "drop_from_random_pose"
    FlatWithDisturbance = "flat_with_disturbance"


def randomize_initial_state(scene, garment, mode, seed: int,
                            drop_box=((-0.1, -0.1, 0.25), (0.1, 0.1, 0.45)),
                            settle_steps: int = 600,
                            energy_threshold: float = 1e-5) -> bool:
    """Re-pose the garment randomly, then settle.  Returns True when the
    scene settled below the energy threshold; False is the settling-timeout
    flag (the state after settle_steps is kept either way).  The same seed
    always produces the same state."""
    mode = RandomizeMode(mode)
    rng = np.random.Generator(np.random.Philox(key=(seed, 0xD1CE)))
    ps = scene.particles
    lo, hi = garment.particle_range.start, garment.particle_range.stop
    pts = ps.positions[lo:hi]
    centroid = pts.mean(axis=0)
    if mode == RandomizeMode.DropFromRandomPose:
        q = random_quat(rng)
        lo_box, hi_box = np.asarray(drop_box[0], float), np.asarray(drop_box[1], float)
        target = rng.uniform(lo_box, hi_box)
        pts = quat_rotate(q, pts - centroid) + target
    else:
        shift = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0])
        angle = np.deg2rad(rng.uniform(-10.0, 10.0))
        q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), angle)
        pts = quat_rotate(q, pts - centroid) + centroid + shift
        n_kick = int(rng.integers(0, 3))
        for _ in range(n_kick):
            i = int(rng.integers(0, len(pts)))
            d = rng.uniform(-1.0, 1.0, size=3)
            norm = np.linalg.norm(d)
            if norm > 1e-12:
                pts[i] += d / norm * rng.uniform(0.0, 0.03)
    ps.positions[lo:hi] = pts
    ps.predicted[lo:hi] = pts
    ps.velocities[lo:hi] = 0.0
    _, settled = engine_mod.settle(scene, max_steps=settle_steps,
                                   energy_threshold=energy_threshold)
    return settled


# ---------------------------------------------------------------------------
# metrics


def metric_particle_distance(state: np.ndarray, goal: np.ndarray) -> float:
    """Sum over corresponding particles of the Euclidean distance."""
    state = np.asarray(state, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    if state.shape != goal.shape:
        raise CountMismatch(f"state {state.shape} vs goal {goal.shape}")
    return float(np.linalg.norm(state - goal, axis=1).sum())


def silhouette_bounds(*position_sets, margin: float = 0.02):
    """Common xy bounding box for rasterizing several states on one grid."""
    all_pts = np.vstack([np.asarray(p)[:, :2] for p in position_sets])
    lo = all_pts.min(axis=0) - margin
    hi = all_pts.max(axis=0) + margin
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def rasterize_silhouette(positions, triangles, resolution: int, bounds) -> np.ndarray:
    """Top-down (z-projection) occupancy grid: cell (iy, ix) is True when its
    center lies inside some triangle's xy projection."""
    if resolution < 32:
        raise ValueError("grid resolution must be >= 32")
    xmin, ymin, xmax, ymax = bounds
    pts = np.asarray(positions, dtype=np.float64)[:, :2]
    tri = np.asarray(triangles, dtype=np.int64)
    grid = np.zeros((resolution, resolution), dtype=bool)
    sx = (xmax - xmin) / resolution
    sy = (ymax - ymin) / resolution
    xs = xmin + (np.arange(resolution) + 0.5) * sx
    ys = ymin + (np.arange(resolution) + 0.5) * sy
    for a, b, c in tri:
        pa, pb, pc = pts[a], pts[b], pts[c]
        area2 = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
        if abs(area2) < 1e-16:
            continue
        tx0 = min(pa[0], pb[0], pc[0])
        tx1 = max(pa[0], pb[0], pc[0])
        ty0 = min(pa[1], pb[1], pc[1])
        ty1 = max(pa[1], pb[1], pc[1])
        ix0 = max(int(np.floor((tx0 - xmin) / sx)), 0)
        ix1 = min(int(np.ceil((tx1 - xmin) / sx)), resolution)
        iy0 = max(int(np.floor((ty0 - ymin) / sy)), 0)
        iy1 = min(int(np.ceil((ty1 - ymin) / sy)), resolution)
        if ix0 >= ix1 or iy0 >= iy1:
            continue
        cx = xs[ix0:ix1][None, :]
        cy = ys[iy0:iy1][:, None]
        # edge functions, sign-matched with the triangle's orientation
        e0 = (pb[0] - pa[0]) * (cy - pa[1]) - (pb[1] - pa[1]) * (cx - pa[0])
        e1 = (pc[0] - pb[0]) * (cy - pb[1]) - (pc[1] - pb[1]) * (cx - pb[0])
        e2 = (pa[0] - pc[0]) * (cy - pc[1]) - (pa[1] - pc[1]) * (cx - pc[0])
        s = np.sign(area2)
        eps = 1e-12
        inside = (s * e0 >= -eps) & (s * e1 >= -eps) & (s * e2 >= -eps)
        grid[iy0:iy1, ix0:ix1] |= inside
    return grid


def grid_iou(a: np.ndarray, b: np.ndarray) -> float:
    if not a.any() or not b.any():
        raise EmptySilhouette("IoU of an empty silhouette is undefined")
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    return inter / union


def metric_iou_topdown(positions, triangles, target_silhouette: np.ndarray,
                       grid_resolution: int, bounds) -> float:
    """IoU between the state's top-down silhouette and a target grid that was
    rasterized on the same bounds/resolution."""
    grid = rasterize_silhouette(positions, triangles, grid_resolution, bounds)
    return grid_iou(grid, target_silhouette)


def metric_coverage(positions, triangles, flat_positions, grid_resolution: int = 128) -> float:
    """Projected area of the current state over the flat reference's area,
    clamped to [0, 1].  Both are rasterized on a shared grid."""
    bounds = silhouette_bounds(positions, flat_positions)
    cur = rasterize_silhouette(positions, triangles, grid_resolution, bounds)
    ref = rasterize_silhouette(flat_positions, triangles, grid_resolution, bounds)
    ref_area = np.count_nonzero(ref)
    if ref_area == 0:
        raise EmptySilhouette("flat reference rasterized to an empty grid")
    return float(min(np.count_nonzero(cur) / ref_area, 1.0))


def _procrustes_2d(src: np.ndarray, dst: np.ndarray):
    """Best rotation R (2x2, det=+1) and translation t with R @ src + t ~ dst."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    h = (src - mu_s).T @ (dst - mu_d)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, d]) @ u.T
    t = mu_d - r @ mu_s
    return r, t


def metric_unfold_vertexrange(state, flat_reference, tolerance: float,
                              pass_fraction: float = 0.8):
    """Rigidly align the state to the flat reference in the plane, then count
    the share of vertices within tolerance of their flat positions."""
    if tolerance <= 0:
        raise ValueError("tolerance must be > 0")
    state = np.asarray(state, dtype=np.float64)
    flat = np.asarray(flat_reference, dtype=np.float64)
    if state.shape != flat.shape:
        raise CountMismatch(f"state {state.shape} vs flat {flat.shape}")
    r, t = _procrustes_2d(state[:, :2], flat[:, :2])
    aligned = state.copy()
    aligned[:, :2] = state[:, :2] @ r.T + t
    # height is aligned by translation only: resting on the ground should not
    # count against a reference defined at a different height
    aligned[:, 2] += flat[:, 2].mean() - state[:, 2].mean()
    dist = np.linalg.norm(aligned - flat, axis=1)
    fraction = float(np.count_nonzero(dist <= tolerance) / len(state))
    return fraction, fraction >= pass_fraction


# ---------------------------------------------------------------------------
# hold rule


def trailing_hold(times, flags) -> float:
    """Length of the contiguous all-true window ending at the last sample.

    times are simulated timestamps, flags the per-sample predicate values.
    A failure at time t caps the window at times[-1] - t (boundary
    inclusive: a window of exactly the required length counts)."""
    times = np.asarray(times, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    if len(times) == 0:
        return 0.0
    if not flags[-1]:
        return 0.0
    bad = np.where(~flags)[0]
    start = times[0] if len(bad) == 0 else times[bad[-1]]
    return float(times[-1] - start)


def hold_satisfied(times, flags, hold_duration: float) -> bool:
    # boundary inclusive; the 1e-9 slack absorbs dt-summation rounding so a
    # window of exactly the required length is never rejected spuriously
    return trailing_hold(times, flags) >= hold_duration - 1e-9


def evaluate_hold(scene, success_predicate, hold_duration: float,
                  duration: float | None = None) -> bool:
    """Simulate for `duration` seconds (default: exactly hold_duration),
    sampling the predicate every step including at the start; true iff the
    trailing satisfied window is at least hold_duration long."""
    duration = hold_duration if duration is None else duration
    steps = int(round(duration / scene.dt))
    times = [scene.sim_time]
    flags = [bool(success_predicate(scene))]
    for _ in range(steps):
        engine_mod.step(scene)
        times.append(scene.sim_time)
        flags.append(bool(success_predicate(scene)))
    return hold_satisfied(times, flags, hold_duration)


# ---------------------------------------------------------------------------
# dataset splits


def split_dataset(ids, seed: int):
    """Deterministic 70/15/15 split: shuffle by seed, then take
    round(0.70 n) / round(0.15 n) / remainder (half-up rounding)."""
    ids = list(ids)
    n = len(ids)
    if n < 3:
        raise TooFewItems(f"need at least 3 ids, got {n}")
    rng = np.random.Generator(np.random.Philox(key=(seed, 0x5B117)))
    order = rng.permutation(n)
    shuffled = [ids[i] for i in order]
    n_train = (70 * n + 50) // 100
    n_val = (15 * n + 50) // 100
    return (shuffled[:n_train], shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])


# ---------------------------------------------------------------------------
# episode runner


def _ground_clear(scene, garment, clearance: float) -> bool:
    lo, hi = garment.particle_range.start, garment.particle_range.stop
    return bool(scene.particles.positions[lo:hi, 2].min() > clearance)


def _task_metrics(scene, task: TaskSpec, garment) -> dict:
    ps = scene.particles
    lo, hi = garment.particle_range.start, garment.particle_range.stop
    state = ps.positions[lo:hi]
    tri_local = garment.triangles - lo
    metrics = {}
    goal = task.goal
    if goal.demo_positions is not None:
        metrics["particle_distance"] = metric_particle_distance(state, goal.demo_positions)
    if goal.flat_positions is not None:
        metrics["coverage"] = metric_coverage(state, tri_local, goal.flat_positions,
                                              task.grid_resolution)
    if task.kind == TaskKind.Fold and goal.demo_positions is not None:
        bounds = silhouette_bounds(state, goal.demo_positions)
        target = rasterize_silhouette(goal.demo_positions, tri_local,
                                      task.grid_resolution, bounds)
        metrics["iou"] = metric_iou_topdown(state, tri_local, target,
                                            task.grid_resolution, bounds)
    if task.kind == TaskKind.Unfold and goal.flat_positions is not None:
        frac, ok = metric_unfold_vertexrange(state, goal.flat_positions,
                                             task.coverage_tolerance, task.pass_fraction)
        metrics["unfold_fraction"] = frac
        metrics["unfold_pass"] = float(ok)
    return metrics


def _success_predicate(task: TaskSpec, garment):
    def predicate(scene) -> bool:
        m = _task_metrics(scene, task, garment)
        if task.kind == TaskKind.Fold:
            return m.get("iou", 0.0) >= task.iou_threshold
        if task.kind == TaskKind.Unfold:
            return bool(m.get("unfold_pass", 0.0))
        if task.kind == TaskKind.Hang:
            return (m.get("particle_distance", np.inf) < task.distance_threshold
                    and _ground_clear(scene, garment, task.ground_clearance))
        # Place: settled inside the target disc, not fallen to the ground
        lo, hi = garment.particle_range.start, garment.particle_range.stop
        centroid = scene.particles.positions[lo:hi].mean(axis=0)
        in_region = (task.place_center is None
                     or np.linalg.norm(centroid[:2] - task.place_center[:2]) <= task.place_radius)
        return in_region and _ground_clear(scene, garment, task.ground_clearance)
    return predicate


def run_trajectories(scene, plan) -> int:
    """Drive effectors along their trajectories until the longest finishes.

    plan: list of (effector, Trajectory).  Gripper transitions trigger
    grasp/release at the keyframed pose; a grasp that finds no particle is
    recorded but not fatal.  Returns the number of steps simulated."""
    if not plan:
        return 0
    t0 = scene.sim_time
    duration = max(traj.duration for _, traj in plan)
    steps = int(np.ceil(duration / scene.dt))
    grip_prev = {id(eff): eff.state for eff, _ in plan}

    def drive(t: float) -> None:
        for eff, traj in plan:
            pose, grip = traj.sample(t)
            eff.move_to(pose, scene.dt)
            prev = grip_prev[id(eff)]
            if grip == GripperState.Closed and prev == GripperState.Open:
                try:
                    effector_grasp(scene, eff, pose.position)
                except NoParticleInRange:
                    pass
            elif grip == GripperState.Open and prev == GripperState.Closed:
                if eff.state == GripperState.Closed:
                    effector_release(scene, eff)
            grip_prev[id(eff)] = grip

    for _ in range(steps):
        drive(scene.sim_time - t0)
        engine_mod.step(scene)
    # the loop samples strictly before the end time; apply the final keyframe
    # so a trailing release is not silently skipped
    drive(duration)
    return steps


def run_episode(scene, task: TaskSpec, trajectory_plan, garment=None) -> EpisodeResult:
    """Execute the plan, let the scene settle, evaluate the task metrics,
    then verify the success predicate holds for hold_duration."""
    t0 = time.perf_counter()
    garment = garment or scene.garments[0]
    frames = run_trajectories(scene, trajectory_plan)
    settle_steps, settled = engine_mod.settle(scene, max_steps=600)
    frames += settle_steps
    metrics = _task_metrics(scene, task, garment)
    predicate = _success_predicate(task, garment)
    instant = predicate(scene)
    held = False
    if instant and settled:
        held = evaluate_hold(scene, predicate, task.hold_duration)
        frames += int(round(task.hold_duration / scene.dt))
        metrics.update(_task_metrics(scene, task, garment))
    success = bool(instant and held and settled)
    return EpisodeResult(success=success, metric_values=metrics,
                         hold_satisfied=held, frames_evaluated=frames,
                         wall_time=time.perf_counter() - t0, settled=settled)
