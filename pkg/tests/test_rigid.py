"""Rigid collider SDFs, particle contact resolution, wind forces."""
import numpy as np
import pytest

from softsim.errors import OutOfRange
from softsim.rigid import (
    Box,
    Capsule,
    Plane,
    RigidCollider,
    Sphere,
    WindField,
    apply_wind_to_cloth,
    resolve_particle_contacts,
    rigid_step,
    signed_distance,
    signed_distances,
    wind_velocity,
)
from softsim.transforms import Pose, quat_from_axis_angle


# ---------------------------------------------------------------- SDF oracle
# Each case is hand-computed geometry: (collider, point, expected phi, normal)

def test_plane_sdf():
    c = RigidCollider(Plane())
    phi, n = signed_distance(c, [0.3, -0.2, 0.7])
    assert phi == pytest.approx(0.7)
    np.testing.assert_allclose(n, [0, 0, 1])
    phi, _ = signed_distance(c, [0, 0, -0.1])
    assert phi == pytest.approx(-0.1)


def test_plane_sdf_with_offset_and_tilt():
    c = RigidCollider(Plane(normal=[1, 0, 0], offset=0.5))
    phi, n = signed_distance(c, [2.0, 9.0, -3.0])
    assert phi == pytest.approx(1.5)
    np.testing.assert_allclose(n, [1, 0, 0])


def test_sphere_sdf():
    c = RigidCollider(Sphere(0.5), pose=Pose([1.0, 0.0, 0.0]))
    phi, n = signed_distance(c, [2.0, 0.0, 0.0])
    assert phi == pytest.approx(0.5)
    np.testing.assert_allclose(n, [1, 0, 0])
    phi, n = signed_distance(c, [1.0, 0.2, 0.0])  # inside
    assert phi == pytest.approx(-0.3)
    np.testing.assert_allclose(n, [0, 1, 0])


def test_box_sdf_faces_edges_corners():
    c = RigidCollider(Box([1.0, 2.0, 3.0]))
    # face: straight out along +x
    phi, n = signed_distance(c, [1.5, 0.0, 0.0])
    assert phi == pytest.approx(0.5)
    np.testing.assert_allclose(n, [1, 0, 0])
    # corner: diagonal distance
    phi, n = signed_distance(c, [2.0, 3.0, 4.0])
    assert phi == pytest.approx(np.sqrt(3.0))
    np.testing.assert_allclose(n, np.ones(3) / np.sqrt(3.0))
    # inside: distance to the nearest face (x face here)
    phi, n = signed_distance(c, [0.9, 0.0, 0.0])
    assert phi == pytest.approx(-0.1)
    np.testing.assert_allclose(n, [1, 0, 0])


def test_box_sdf_rotated():
    # 90 deg about z maps local +x to world +y
    q = quat_from_axis_angle([0, 0, 1], np.pi / 2)
    c = RigidCollider(Box([1.0, 0.2, 0.2]), pose=Pose([0, 0, 0], q))
    phi, n = signed_distance(c, [0.0, 1.5, 0.0])
    assert phi == pytest.approx(0.5)
    np.testing.assert_allclose(n, [0, 1, 0], atol=1e-12)


def test_capsule_sdf():
    c = RigidCollider(Capsule(radius=0.2, half_height=0.5))
    # beside the cylinder section
    phi, n = signed_distance(c, [0.5, 0.0, 0.3])
    assert phi == pytest.approx(0.3)
    np.testing.assert_allclose(n, [1, 0, 0])
    # beyond the cap: distance to the segment end
    phi, n = signed_distance(c, [0.0, 0.0, 1.0])
    assert phi == pytest.approx(0.3)
    np.testing.assert_allclose(n, [0, 0, 1])


def test_signed_distances_vectorized_matches_scalar(rng):
    c = RigidCollider(Box([0.5, 0.5, 0.5]), pose=Pose([0.2, -0.1, 0.4],
                      quat_from_axis_angle([1, 1, 0], 0.7)))
    pts = rng.normal(size=(50, 3))
    phi, n = signed_distances(c, pts)
    for k in range(50):
        p1, n1 = signed_distance(c, pts[k])
        assert phi[k] == pytest.approx(p1)
        np.testing.assert_allclose(n[k], n1)


# --------------------------------------------------------------- validation

@pytest.mark.parametrize("kwargs", [
    dict(friction=1.5), dict(friction=-0.1), dict(restitution=2.0),
    dict(max_linear_velocity=60.0), dict(rest_offset=0.05, contact_offset=0.02),
    dict(dynamic=True, mass=0.0),
])
def test_collider_validation(kwargs):
    with pytest.raises(OutOfRange):
        RigidCollider(Sphere(0.1), **kwargs)


# ----------------------------------------------------------------- contacts

def test_contact_projects_to_rest_offset():
    c = RigidCollider(Plane(), rest_offset=0.0, contact_offset=0.02, friction=0.0)
    pred = np.array([[0.0, 0.0, -0.05], [0.0, 0.0, 0.5]])
    old = pred.copy()
    rest = np.full(2, 0.01)
    contact = np.full(2, 0.03)
    resolve_particle_contacts(c, pred, old, np.ones(2), rest, contact, np.zeros(2))
    assert pred[0, 2] == pytest.approx(0.01)  # pushed to rest offset
    assert pred[1, 2] == pytest.approx(0.5)   # untouched above contact offset


def test_contact_skips_pinned_particles():
    c = RigidCollider(Plane())
    pred = np.array([[0.0, 0.0, -0.05]])
    resolve_particle_contacts(c, pred, pred.copy(), np.zeros(1),
                              np.zeros(1), np.full(1, 0.02), np.zeros(1))
    assert pred[0, 2] == -0.05


def test_contact_friction_removes_tangential_slide():
    c = RigidCollider(Plane(), friction=1.0)
    # particle moved 1e-3 along x while sinking 0.05 below the surface:
    # with mu=1 and a normal correction much larger than the slide, the
    # tangential displacement is fully cancelled
    old = np.array([[0.0, 0.0, 0.001]])
    pred = np.array([[0.001, 0.0, -0.05]])
    resolve_particle_contacts(c, pred, old, np.ones(1),
                              np.zeros(1), np.full(1, 0.02), np.full(1, 1.0))
    assert pred[0, 0] == pytest.approx(0.0)
    assert pred[0, 2] == pytest.approx(0.0)


def test_contact_frictionless_keeps_tangential_slide():
    c = RigidCollider(Plane(), friction=0.0)
    old = np.array([[0.0, 0.0, 0.001]])
    pred = np.array([[0.01, 0.0, -0.05]])
    resolve_particle_contacts(c, pred, old, np.ones(1),
                              np.zeros(1), np.full(1, 0.02), np.zeros(1))
    assert pred[0, 0] == pytest.approx(0.01)


def test_contact_impulse_balances_correction():
    c = RigidCollider(Plane())
    pred = np.array([[0.0, 0.0, -0.04]])
    imp = resolve_particle_contacts(c, pred, pred.copy(), np.array([0.5]),
                                    np.zeros(1), np.full(1, 0.02), np.zeros(1))
    # particle of mass 2 pushed up 0.04 -> reaction on the collider is down
    np.testing.assert_allclose(imp, [0, 0, -2.0 * 0.04])


# -------------------------------------------------------------- rigid step

def test_rigid_step_free_fall_closed_form():
    c = RigidCollider(Sphere(0.1), dynamic=True, mass=2.0)
    dt, g = 0.01, np.array([0.0, 0.0, -9.81])
    for _ in range(100):
        rigid_step(c, dt, g)
    # symplectic Euler: z = sum_{k=1..n} k*dt^2*g
    expected_z = np.arange(1, 101).sum() * dt * dt * g[2]
    assert c.pose.position[2] == pytest.approx(expected_z)
    assert c.velocity[2] == pytest.approx(100 * dt * g[2])


def test_rigid_step_respects_speed_cap():
    c = RigidCollider(Sphere(0.1), dynamic=True, max_linear_velocity=1.0)
    for _ in range(1000):
        rigid_step(c, 0.01, [0, 0, -9.81])
    assert np.linalg.norm(c.velocity) <= 1.0 + 1e-12


def test_rigid_step_static_untouched():
    c = RigidCollider(Sphere(0.1), dynamic=False)
    rigid_step(c, 0.01, [0, 0, -9.81])
    np.testing.assert_array_equal(c.pose.position, 0.0)
    np.testing.assert_array_equal(c.velocity, 0.0)


def test_rigid_step_angular_velocity_rotates_pose():
    c = RigidCollider(Box([1, 1, 1]), dynamic=True,
                      angular_velocity=np.array([0.0, 0.0, np.pi]))
    n = 1000
    for _ in range(n):
        rigid_step(c, 1.0 / n, [0, 0, 0])
    # half a turn about z: quaternion ~ (0,0,±1,0)
    q = c.pose.quaternion
    assert abs(q[2]) == pytest.approx(1.0, abs=1e-3)
    assert np.linalg.norm(q) == pytest.approx(1.0)


# --------------------------------------------------------------------- wind

def test_wind_velocity_steady_and_gusting():
    f = WindField(direction=[3.0, 0.0, 0.0], magnitude=2.0)
    np.testing.assert_allclose(wind_velocity(f, None, 0.0), [2, 0, 0])
    g = WindField(direction=[0, 1, 0], magnitude=1.0, gust_amplitude=0.5,
                  gust_frequency=1.0)
    # peak of the sine at t = 0.25 s
    np.testing.assert_allclose(wind_velocity(g, None, 0.25), [0, 1.5, 0], atol=1e-12)
    np.testing.assert_allclose(wind_velocity(g, None, 0.0), [0, 1.0, 0])


def test_wind_force_oracle_single_triangle():
    # unit right triangle in the z=0 plane (normal +z, area 0.5), wind along z
    tri = np.array([[0, 1, 2]])
    pos = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    vel = np.zeros((3, 3))
    inv_mass = np.full(3, 2.0)  # mass 0.5 each
    f = WindField(direction=[0, 0, 1], magnitude=4.0)
    drag, lift, dt = 1.5, 0.0, 0.01
    apply_wind_to_cloth(tri, pos, vel, inv_mass, f, drag, lift, dt, 0.0)
    # v_rel = -wind, vn = -4, F = -area*drag*vn*n = 0.5*1.5*4 = +3 z
    # each vertex: dv = dt * F/3 * inv_m = 0.01 * 1 * 2 = 0.02
    np.testing.assert_allclose(vel[:, 2], 0.02, rtol=1e-12)
    np.testing.assert_allclose(vel[:, :2], 0.0)


def test_wind_tangential_component_uses_lift():
    tri = np.array([[0, 1, 2]])
    pos = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    vel = np.zeros((3, 3))
    f = WindField(direction=[1, 0, 0], magnitude=2.0)  # tangential to the triangle
    apply_wind_to_cloth(tri, pos, vel, np.ones(3), f, drag=1.0, lift=0.0, dt=0.01, time=0.0)
    np.testing.assert_allclose(vel, 0.0, atol=1e-14)  # no lift -> no force
    apply_wind_to_cloth(tri, pos, vel, np.ones(3), f, drag=0.0, lift=0.5, dt=0.01, time=0.0)
    assert vel[0, 0] > 0  # lift drags the cloth along the wind


def test_wind_rejects_negative_magnitude():
    with pytest.raises(OutOfRange):
        WindField(magnitude=-1.0)
