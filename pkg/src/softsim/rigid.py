"""Rigid colliders with analytic signed-distance fields, plus the parametric
wind field that applies drag and lift to cloth triangles."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange
from .transforms import Pose, quat_normalize, quat_multiply, quat_rotate


@dataclass
class Plane:
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    offset: float = 0.0  # plane: normal . p = offset (in local frame)

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        self.normal = n / np.linalg.norm(n)


@dataclass
class Sphere:
    radius: float


@dataclass
class Box:
    half_extents: np.ndarray

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64)


@dataclass
class Capsule:
    radius: float
    half_height: float  # along local z


@dataclass
class RigidCollider:
    shape: object
    pose: Pose = field(default_factory=Pose)
    dynamic: bool = False
    mass: float = 1.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    friction: float = 0.3
    restitution: float = 0.0
    contact_offset: float = 0.02
    rest_offset: float = 0.0
    max_linear_velocity: float = 50.0
    max_angular_velocity: float = 1e10

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=np.float64).copy()
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=np.float64).copy()
        if not 0.0 <= self.friction <= 1.0:
            raise OutOfRange("friction", self.friction, (0, 1))
        if not 0.0 <= self.restitution <= 1.0:
            raise OutOfRange("restitution", self.restitution, (0, 1))
        if not 0.0 <= self.max_linear_velocity <= 50.0:
            raise OutOfRange("max_linear_velocity", self.max_linear_velocity, (0, 50))
        if self.rest_offset > self.contact_offset:
            raise OutOfRange("rest_offset", self.rest_offset, f"<= contact_offset ({self.contact_offset})")
        if self.dynamic and self.mass <= 0:
            raise OutOfRange("mass", self.mass, "(0, inf)")


def _local_sdf(shape, p: np.ndarray):
    """Signed distance and outward unit normal in the shape's local frame;
    p is (n, 3)."""
    if isinstance(shape, Plane):
        phi = p @ shape.normal - shape.offset
        normal = np.broadcast_to(shape.normal, p.shape).copy()
        return phi, normal
    if isinstance(shape, Sphere):
        r = np.linalg.norm(p, axis=1)
        safe = np.maximum(r, 1e-12)
        return r - shape.radius, p / safe[:, None]
    if isinstance(shape, Box):
        he = shape.half_extents
        q = np.abs(p) - he
        outside = np.maximum(q, 0.0)
        out_d = np.linalg.norm(outside, axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        phi = out_d + inside
        normal = np.zeros_like(p)
        is_out = out_d > 1e-12
        normal[is_out] = (outside[is_out] / out_d[is_out, None]) * np.sign(p[is_out])
        # inside: normal of the nearest face
        ins = ~is_out
        if np.any(ins):
            axis = np.argmax(q[ins], axis=1)
            rows = np.where(ins)[0]
            normal[rows, axis] = np.sign(p[rows, axis])
            normal[rows[np.abs(p[rows, axis]) < 1e-12], :] = np.array([0.0, 0.0, 1.0])
        return phi, normal
    if isinstance(shape, Capsule):
        # segment from (0,0,-hh) to (0,0,hh)
        z = np.clip(p[:, 2], -shape.half_height, shape.half_height)
        closest = np.column_stack([np.zeros(len(p)), np.zeros(len(p)), z])
        d = p - closest
        r = np.linalg.norm(d, axis=1)
        safe = np.maximum(r, 1e-12)
        normal = d / safe[:, None]
        normal[r < 1e-12] = np.array([1.0, 0.0, 0.0])
        return r - shape.radius, normal
    raise TypeError(f"unknown shape {type(shape)!r}")


def signed_distances(collider: RigidCollider, points: np.ndarray):
    """Vectorized SDF: (phi (n,), outward unit normals (n, 3)) in world frame."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    local = collider.pose.inverse_transform(points)
    phi, n_local = _local_sdf(collider.shape, local)
    n_world = quat_rotate(collider.pose.quaternion, n_local)
    return phi, n_world


def signed_distance(collider: RigidCollider, point):
    phi, n = signed_distances(collider, np.asarray(point, dtype=np.float64)[None, :])
    return float(phi[0]), n[0]


def resolve_particle_contacts(collider: RigidCollider, predicted, positions, inv_mass,
                              rest_offsets, contact_offsets, frictions):
    """Project penetrating particles to the rest offset and apply a
    Coulomb-like cap on their tangential displacement this step.

    rest_offsets/contact_offsets/frictions are per-particle arrays (from the
    particle group's material).  Returns the net impulse (kg*m) imparted by
    the particles on the collider, for dynamic two-way coupling."""
    phi, normals = signed_distances(collider, predicted)
    target = np.asarray(rest_offsets, dtype=np.float64)
    detect = np.maximum(np.asarray(contact_offsets, dtype=np.float64), target)
    mask = (phi < target) & (phi <= detect) & (inv_mass > 0)
    if not np.any(mask):
        return np.zeros(3)
    idx = np.where(mask)[0]
    n = normals[idx]
    corr = (target[idx] - phi[idx])[:, None] * n
    predicted[idx] += corr
    # friction: scale the tangential part of this step's displacement
    mu = np.maximum(np.asarray(frictions, dtype=np.float64)[idx], collider.friction)
    disp = predicted[idx] - positions[idx]
    d_n = np.einsum("ij,ij->i", disp, n)
    tangential = disp - d_n[:, None] * n
    t_len = np.linalg.norm(tangential, axis=1)
    nc = np.linalg.norm(corr, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(t_len > 1e-12, np.maximum(0.0, 1.0 - mu * nc / np.maximum(t_len, 1e-12)), 1.0)
    predicted[idx] = positions[idx] + d_n[:, None] * n + tangential * scale[:, None]
    with np.errstate(divide="ignore"):
        m = np.where(inv_mass[idx] > 0, 1.0 / inv_mass[idx], 0.0)
    return -(m[:, None] * corr).sum(axis=0)


def rigid_step(collider: RigidCollider, dt: float, gravity) -> None:
    """Symplectic Euler for a dynamic collider; static colliders unchanged."""
    if not collider.dynamic:
        return
    collider.velocity = collider.velocity + dt * np.asarray(gravity, dtype=np.float64)
    speed = np.linalg.norm(collider.velocity)
    if speed > collider.max_linear_velocity:
        collider.velocity *= collider.max_linear_velocity / speed
    wspeed = np.linalg.norm(collider.angular_velocity)
    if wspeed > collider.max_angular_velocity:
        collider.angular_velocity *= collider.max_angular_velocity / wspeed
    collider.pose.position = collider.pose.position + dt * collider.velocity
    w = collider.angular_velocity
    dq = 0.5 * dt * quat_multiply(np.array([w[0], w[1], w[2], 0.0]), collider.pose.quaternion)
    collider.pose.quaternion = quat_normalize(collider.pose.quaternion + dq)


# ---------------------------------------------------------------------------
# wind


@dataclass
class WindField:
    direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    magnitude: float = 0.0  # m/s
    gust_amplitude: float = 0.0
    gust_frequency: float = 0.0  # Hz
    quadratic_drag: bool = False

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=np.float64)
        if self.magnitude < 0 or self.gust_amplitude < 0:
            raise OutOfRange("magnitude/gust_amplitude", self.magnitude, "[0, inf)")


def wind_velocity(field: WindField, position, time: float) -> np.ndarray:
    norm = np.linalg.norm(field.direction)
    if field.magnitude == 0.0 or norm == 0.0:
        return np.zeros(3)
    dhat = field.direction / norm
    gust = 1.0 + field.gust_amplitude * np.sin(2.0 * np.pi * field.gust_frequency * time)
    return field.magnitude * gust * dhat


def apply_wind_to_cloth(triangles, positions, velocities, inv_mass, field: WindField,
                        drag: float, lift: float, dt: float, time: float) -> None:
    """Per-triangle aerodynamic force from the relative wind, split equally
    between the three vertices as velocity increments."""
    wind = wind_velocity(field, None, time)
    tri = np.asarray(triangles, dtype=np.int64)
    if tri.size == 0:
        return
    p0, p1, p2 = positions[tri[:, 0]], positions[tri[:, 1]], positions[tri[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    area2 = np.linalg.norm(cross, axis=1)
    ok = area2 > 1e-14
    n = np.zeros_like(cross)
    n[ok] = cross[ok] / area2[ok, None]
    area = 0.5 * area2
    v_tri = (velocities[tri[:, 0]] + velocities[tri[:, 1]] + velocities[tri[:, 2]]) / 3.0
    v_rel = v_tri - wind
    if field.quadratic_drag:
        v_rel = v_rel * np.linalg.norm(v_rel, axis=1)[:, None]
    vn = np.einsum("ij,ij->i", v_rel, n)
    f = -area[:, None] * (drag * vn[:, None] * n + lift * (v_rel - vn[:, None] * n))
    # distribute dt*F/(3m) to each vertex
    dv = np.zeros_like(velocities)
    for k in range(3):
        scale = dt / 3.0 * inv_mass[tri[:, k]]
        np.add.at(dv, tri[:, k], f * scale[:, None])
    velocities += dv
