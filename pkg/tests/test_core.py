"""Particle storage, position prediction, and spatial neighbor search."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_neighbors
from softsim.core import NeighborGrid, ParticleSet, predict_positions
from softsim.errors import OutOfRange


def make_pset(n, rng, inv_mass=1.0):
    pos = rng.normal(size=(n, 3))
    ps = ParticleSet.empty()
    ps.append(pos, np.zeros(3), inv_mass, 0)
    return ps


def test_append_returns_contiguous_ranges(rng):
    ps = ParticleSet.empty()
    r1 = ps.append(rng.normal(size=(5, 3)), np.zeros(3), 1.0, 0)
    r2 = ps.append(rng.normal(size=(3, 3)), np.zeros(3), 2.0, 1)
    assert (r1, r2) == (range(0, 5), range(5, 8))
    assert len(ps) == 8
    assert list(ps.group_id) == [0] * 5 + [1] * 3
    assert np.all(ps.inv_mass[5:] == 2.0)


def test_negative_inv_mass_rejected():
    with pytest.raises(OutOfRange):
        ParticleSet(np.zeros((1, 3)), np.zeros((1, 3)), np.array([-1.0]),
                    np.zeros(1, dtype=np.int64))


def test_predict_free_fall_matches_closed_form(rng):
    # oracle: semi-implicit Euler in exact arithmetic over k steps
    ps = make_pset(4, rng)
    g = np.array([0.0, 0.0, -9.81])
    dt = 1.0 / 60.0
    p0 = ps.positions.copy()
    for k in range(1, 11):
        predict_positions(ps, g, dt)
        ps.positions[:] = ps.predicted
        expected = p0 + np.arange(1, k + 1).sum() * dt * dt * g
        np.testing.assert_allclose(ps.positions - p0, expected - p0, atol=1e-12)


def test_predict_keeps_pinned_particles(rng):
    ps = make_pset(3, rng, inv_mass=1.0)
    ps.inv_mass[0] = 0.0
    before = ps.positions[0].copy()
    predict_positions(ps, [0, 0, -9.81], 0.1)
    np.testing.assert_array_equal(ps.predicted[0], before)
    assert ps.velocities[0, 2] == 0.0


def test_predict_zero_dt_is_identity(rng):
    ps = make_pset(3, rng)
    predict_positions(ps, [0, 0, -9.81], 0.0)
    np.testing.assert_array_equal(ps.predicted, ps.positions)


def test_predict_rejects_negative_dt(rng):
    with pytest.raises(ValueError):
        predict_positions(make_pset(2, rng), [0, 0, 0], -0.1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), radius=st.floats(0.05, 1.5))
def test_query_matches_brute_force(seed, radius):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(120, 3))
    grid = NeighborGrid(pts, radius)
    q = rng.uniform(-1, 1, size=3)
    assert grid.query(q, radius).tolist() == brute_force_neighbors(pts, q, radius)


def test_neighbor_lists_match_brute_force(rng):
    pts = rng.uniform(0, 1, size=(200, 3))
    radius = 0.25
    grid = NeighborGrid(pts, radius)
    starts, nbrs = grid.neighbor_lists(radius, 512)
    for i in range(len(pts)):
        got = sorted(nbrs[starts[i]:starts[i + 1]].tolist())
        expected = [j for j in brute_force_neighbors(pts, pts[i], radius) if j != i]
        assert got == expected


def test_neighbor_lists_truncate_to_nearest(rng):
    pts = rng.uniform(0, 1, size=(80, 3))
    radius = 0.6
    grid = NeighborGrid(pts, radius)
    cap = 8
    starts, nbrs = grid.neighbor_lists(radius, cap)
    full_starts, full_nbrs = grid.neighbor_lists(radius, 512)
    for i in range(len(pts)):
        kept = nbrs[starts[i]:starts[i + 1]]
        assert len(kept) <= cap
        all_n = full_nbrs[full_starts[i]:full_starts[i + 1]]
        if len(all_n) > cap:
            d = np.linalg.norm(pts[all_n] - pts[i], axis=1)
            nearest = set(all_n[np.argsort(d, kind="stable")][:cap].tolist())
            assert set(kept.tolist()) == nearest


def test_empty_grid_query():
    grid = NeighborGrid(np.zeros((0, 3)), 0.1)
    assert len(grid.query(np.zeros(3), 0.1)) == 0


def test_grid_determinism(rng):
    pts = rng.uniform(0, 1, size=(150, 3))
    a = NeighborGrid(pts, 0.2).neighbor_lists(0.2, 32)
    b = NeighborGrid(pts, 0.2).neighbor_lists(0.2, 32)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
