"""Kinematic grasping proxies, scripted trajectories, and the hand-pose
retargeting optimizer used by the teleoperation service."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NoParticleInRange, NotGrasping
from .transforms import Pose, quat_slerp, quat_angle_between, quat_from_axis_angle, quat_multiply, quat_normalize


class GripperState(str, Enum):
    Open = "Open"
    Closed = "Closed"


@dataclass
class AttachmentConstraint:
    particle_index: int
    local_offset: np.ndarray  # in effector frame
    saved_inv_mass: float


@dataclass
class Effector:
    pose: Pose = field(default_factory=Pose)
    grasp_radius: float = 0.03
    state: GripperState = GripperState.Open
    attached: list = field(default_factory=list)
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def move_to(self, pose: Pose, dt: float | None = None) -> None:
        if dt and dt > 0:
            self.velocity = (pose.position - self.pose.position) / dt
        else:
            self.velocity = np.zeros(3)
        self.pose = pose.copy()

    def apply_to_predicted(self, pset) -> None:
        for att in self.attached:
            pset.predicted[att.particle_index] = self.pose.transform(att.local_offset)

    def finalize_velocities(self, pset) -> None:
        for att in self.attached:
            pset.velocities[att.particle_index] = self.velocity


def grasp(scene, effector: Effector, target_point) -> int:
    """Attach every particle within grasp_radius of target_point; returns
    the attachment count."""
    if effector.state == GripperState.Closed:
        release(scene, effector)
    target = np.asarray(target_point, dtype=np.float64)
    pset = scene.particles
    d = np.linalg.norm(pset.positions - target, axis=1)
    idx = np.where(d <= effector.grasp_radius)[0]
    if len(idx) == 0:
        raise NoParticleInRange(f"no particle within {effector.grasp_radius} m of {target.tolist()}")
    for i in idx:
        local = effector.pose.inverse_transform(pset.positions[i])
        effector.attached.append(AttachmentConstraint(int(i), local, float(pset.inv_mass[i])))
        pset.inv_mass[i] = 0.0
    effector.state = GripperState.Closed
    return len(idx)


def release(scene, effector: Effector) -> None:
    """Restore inverse masses; released particles inherit the effector's
    velocity."""
    if effector.state != GripperState.Closed:
        raise NotGrasping("effector is not grasping")
    pset = scene.particles
    for att in effector.attached:
        pset.inv_mass[att.particle_index] = att.saved_inv_mass
        pset.velocities[att.particle_index] = effector.velocity
    effector.attached.clear()
    effector.state = GripperState.Open


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Keyframe:
    time: float
    pose: Pose
    gripper: GripperState


@dataclass
class Trajectory:
    keyframes: list

    def __post_init__(self):
        times = [k.time for k in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")

    @property
    def duration(self) -> float:
        return self.keyframes[-1].time if self.keyframes else 0.0

    def sample(self, t: float):
        """(Pose, GripperState) at time t; clamped at the ends."""
        kf = self.keyframes
        if t <= kf[0].time:
            return kf[0].pose.copy(), kf[0].gripper
        if t >= kf[-1].time:
            return kf[-1].pose.copy(), kf[-1].gripper
        for a, b in zip(kf, kf[1:]):
            if t <= b.time:
                u = (t - a.time) / (b.time - a.time)
                pos = (1 - u) * a.pose.position + u * b.pose.position
                quat = quat_slerp(a.pose.quaternion, b.pose.quaternion, u)
                # gripper switches at the start of the segment
                return Pose(pos, quat), a.gripper
        return kf[-1].pose.copy(), kf[-1].gripper

    def path_length(self) -> float:
        pts = [k.pose.position for k in self.keyframes]
        return float(sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])))


_DWELL = 0.25  # s, pause for gripper state changes


def make_pick_and_place(pick, place, lift_height: float, speed: float) -> Trajectory:
    """Six keyframes: approach above the pick, descend, close, lift,
    translate above the place, descend and open."""
    if lift_height <= 0 or speed <= 0:
        raise ValueError("lift_height and speed must be > 0")
    pick = np.asarray(pick, dtype=np.float64)
    place = np.asarray(place, dtype=np.float64)
    up = np.array([0.0, 0.0, lift_height])
    points = [
        (pick + up, GripperState.Open),
        (pick, GripperState.Open),
        (pick, GripperState.Closed),
        (pick + up, GripperState.Closed),
        (place + up, GripperState.Closed),
        (place, GripperState.Open),
    ]
    t = 0.0
    frames = []
    prev = None
    for pos, grip in points:
        if prev is not None:
            seg = float(np.linalg.norm(pos - prev))
            t += seg / speed if seg > 1e-12 else _DWELL
        frames.append(Keyframe(t, Pose(pos), grip))
        prev = pos
    return Trajectory(frames)


def make_fling(pick_points, lift_height: float, swing_amplitude: float,
               swing_duration: float) -> tuple:
    """Two synchronized fling trajectories, mirror-symmetric about the
    midline of the pick points: lift, swing back then forward, lower, open."""
    p1 = np.asarray(pick_points[0], dtype=np.float64)
    p2 = np.asarray(pick_points[1], dtype=np.float64)
    sep = p2 - p1
    if np.linalg.norm(sep) < 1e-9:
        raise ValueError("pick points must be distinct")
    if lift_height <= 0 or swing_duration <= 0:
        raise ValueError("lift_height and swing_duration must be > 0")
    # swing axis: horizontal, perpendicular to the pick separation
    axis = np.array([-sep[1], sep[0], 0.0])
    n = np.linalg.norm(axis)
    axis = axis / n if n > 1e-9 else np.array([1.0, 0.0, 0.0])
    up = np.array([0.0, 0.0, lift_height])
    half = swing_duration / 2.0

    def one(pick):
        frames = [
            Keyframe(0.0, Pose(pick), GripperState.Open),
            Keyframe(_DWELL, Pose(pick), GripperState.Closed),
            Keyframe(_DWELL + 1.0, Pose(pick + up), GripperState.Closed),
            Keyframe(_DWELL + 1.0 + half, Pose(pick + up - swing_amplitude * axis), GripperState.Closed),
            Keyframe(_DWELL + 1.0 + half + swing_duration,
                     Pose(pick + up + swing_amplitude * axis), GripperState.Closed),
            Keyframe(_DWELL + 2.0 + half + swing_duration,
                     Pose(pick + 0.3 * up + swing_amplitude * axis), GripperState.Closed),
            Keyframe(_DWELL + 2.2 + half + swing_duration,
                     Pose(pick + 0.3 * up + swing_amplitude * axis), GripperState.Open),
        ]
        return Trajectory(frames)

    return one(p1), one(p2)


# ---------------------------------------------------------------------------
# hand retargeting


@dataclass
class HandFrame:
    wrist_position: np.ndarray
    palm_normal: np.ndarray
    finger_tip_positions: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.palm_normal = np.asarray(self.palm_normal, dtype=np.float64)
        n = np.linalg.norm(self.palm_normal)
        if abs(n - 1.0) > 1e-6:
            self.palm_normal = self.palm_normal / n


@dataclass
class KinematicChain:
    joint_count: int
    forward: callable  # q -> (n_points, 3) tracked positions
    lower_limits: np.ndarray = None
    upper_limits: np.ndarray = None

    def __post_init__(self):
        if self.lower_limits is None:
            self.lower_limits = np.full(self.joint_count, -np.pi)
        if self.upper_limits is None:
            self.upper_limits = np.full(self.joint_count, np.pi)
        self.lower_limits = np.asarray(self.lower_limits, dtype=np.float64)
        self.upper_limits = np.asarray(self.upper_limits, dtype=np.float64)

    def clip(self, q):
        return np.clip(q, self.lower_limits, self.upper_limits)


def planar_chain(link_lengths) -> KinematicChain:
    """Planar revolute chain in the xy plane; tracks every joint tip."""
    lengths = np.asarray(link_lengths, dtype=np.float64)

    def forward(q):
        angles = np.cumsum(q)
        tips = np.cumsum(
            np.column_stack([lengths * np.cos(angles), lengths * np.sin(angles), np.zeros(len(lengths))]),
            axis=0,
        )
        return tips

    return KinematicChain(len(lengths), forward)


def _retarget_objective(chain, q, targets, alpha, beta, q_prev) -> float:
    r = alpha * targets - chain.forward(q)
    obj = float(np.sum(r * r))
    if beta > 0:
        obj += beta * float(np.linalg.norm(q - q_prev))
    return obj


def _fd_gradient(fun, q, h=1e-6):
    g = np.zeros_like(q)
    for i in range(len(q)):
        qp = q.copy(); qp[i] += h
        qm = q.copy(); qm[i] -= h
        g[i] = (fun(qp) - fun(qm)) / (2 * h)
    return g


def _fd_jacobian(chain, q, h=1e-6):
    base = chain.forward(q).ravel()
    jac = np.zeros((len(base), len(q)))
    for i in range(len(q)):
        qp = q.copy(); qp[i] += h
        qm = q.copy(); qm[i] -= h
        jac[:, i] = (chain.forward(qp).ravel() - chain.forward(qm).ravel()) / (2 * h)
    return jac


def retarget(chain: KinematicChain, targets, alpha: float, beta: float, q_prev,
             max_iterations: int = 200, tol: float = 1e-10):
    """Minimize the tracking-plus-smoothness objective from q_prev.

    First-order descent with a finite-difference Jacobian: each iteration
    takes the better of a backtracked gradient step and a damped
    Gauss-Newton step on the tracking residual, so the objective never
    increases.  Deterministic restarts kick in if tracking stalls far from
    zero residual.  Returns (q, final_objective)."""
    if alpha <= 0 or beta < 0:
        raise ValueError("alpha must be > 0, beta >= 0")
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    q_prev = np.asarray(q_prev, dtype=np.float64)

    def objective(q):
        return _retarget_objective(chain, q, targets, alpha, beta, q_prev)

    def solve_from(q0):
        q = chain.clip(q0.copy())
        obj = objective(q)
        step = 1.0
        for _ in range(max_iterations):
            grad = _fd_gradient(objective, q)
            if beta > 0 and np.linalg.norm(q - q_prev) < 1e-12:
                pass  # subgradient 0 for the smoothness kink
            candidates = []
            # backtracking line search along -grad
            t = step
            for _ in range(30):
                trial = chain.clip(q - t * grad)
                val = objective(trial)
                if val < obj:
                    candidates.append((val, trial, t))
                    break
                t *= 0.5
            # damped Gauss-Newton on the tracking residual
            r = (alpha * targets - chain.forward(q)).ravel()
            jac = -_fd_jacobian(chain, q)
            jtj = jac.T @ jac + 1e-9 * np.eye(len(q))
            try:
                dq = np.linalg.solve(jtj, -jac.T @ r)
                trial = chain.clip(q + dq)
                val = objective(trial)
                if val < obj:
                    candidates.append((val, trial, step))
            except np.linalg.LinAlgError:
                pass
            if not candidates:
                break
            val, trial, used = min(candidates, key=lambda c: c[0])
            if obj - val < tol:
                q, obj = trial, val
                break
            q, obj = trial, val
            step = min(used * 2.0, 1e3)
        return q, obj

    best_q, best_obj = solve_from(q_prev)
    if beta == 0 and best_obj > 1e-8:
        rng = np.random.default_rng(0)
        for _ in range(24):
            q0 = chain.clip(rng.uniform(chain.lower_limits, chain.upper_limits))
            q, obj = solve_from(q0)
            if obj < best_obj:
                best_q, best_obj = q, obj
            if best_obj <= 1e-10:
                break
    return best_q, best_obj


def rate_limit(target_new: Pose, target_prev: Pose, max_pos_delta: float,
               max_rot_delta: float) -> Pose:
    """Clamp the pose change to the given position/rotation caps."""
    if max_pos_delta <= 0 or max_rot_delta <= 0:
        raise ValueError("deltas must be > 0")
    dp = target_new.position - target_prev.position
    dist = float(np.linalg.norm(dp))
    pos = target_new.position if dist <= max_pos_delta else target_prev.position + dp * (max_pos_delta / dist)
    angle = quat_angle_between(target_prev.quaternion, target_new.quaternion)
    if angle <= max_rot_delta or angle < 1e-12:
        quat = target_new.quaternion
    else:
        quat = quat_slerp(target_prev.quaternion, target_new.quaternion, max_rot_delta / angle)
    return Pose(pos, quat)


def gripper_state_from_pinch(thumb, index, threshold: float = 0.04) -> GripperState:
    """Closed iff the pinch distance is strictly below the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    d = float(np.linalg.norm(np.asarray(thumb, dtype=np.float64) - np.asarray(index, dtype=np.float64)))
    return GripperState.Closed if d < threshold else GripperState.Open
