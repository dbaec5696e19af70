"""Shared fixtures and independent oracle implementations.

The oracles here are deliberately naive (brute-force loops, finite
differences) so library results can be checked against something with no
shared code path."""
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_force_neighbors(points: np.ndarray, query: np.ndarray, radius: float):
    """Indices of all points within radius of the query point (inclusive)."""
    out = []
    for i, p in enumerate(points):
        if np.sqrt(((p - query) ** 2).sum()) <= radius:
            out.append(i)
    return sorted(out)


def fd_gradient(fun, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy(); xp.flat[i] += h
        xm = x.copy(); xm.flat[i] -= h
        g.flat[i] = (fun(xp) - fun(xm)) / (2 * h)
    return g


def edge_census(triangles) -> tuple:
    """Brute-force unique-edge and interior-edge counts of a triangle mesh."""
    seen = {}
    for tri in np.asarray(triangles, dtype=np.int64):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            seen[key] = seen.get(key, 0) + 1
    unique = len(seen)
    interior = sum(1 for c in seen.values() if c == 2)
    return unique, interior


def rasterize_loop(positions, triangles, resolution, bounds) -> np.ndarray:
    """Per-cell point-in-triangle rasterizer (slow reference)."""
    xmin, ymin, xmax, ymax = bounds
    pts = np.asarray(positions, dtype=np.float64)[:, :2]
    grid = np.zeros((resolution, resolution), dtype=bool)
    sx = (xmax - xmin) / resolution
    sy = (ymax - ymin) / resolution
    for iy in range(resolution):
        for ix in range(resolution):
            cx = xmin + (ix + 0.5) * sx
            cy = ymin + (iy + 0.5) * sy
            for a, b, c in np.asarray(triangles, dtype=np.int64):
                pa, pb, pc = pts[a], pts[b], pts[c]
                area2 = ((pb[0] - pa[0]) * (pc[1] - pa[1])
                         - (pb[1] - pa[1]) * (pc[0] - pa[0]))
                if abs(area2) < 1e-16:
                    continue
                s = 1.0 if area2 > 0 else -1.0
                e0 = (pb[0] - pa[0]) * (cy - pa[1]) - (pb[1] - pa[1]) * (cx - pa[0])
                e1 = (pc[0] - pb[0]) * (cy - pb[1]) - (pc[1] - pb[1]) * (cx - pb[0])
                e2 = (pa[0] - pc[0]) * (cy - pc[1]) - (pa[1] - pc[1]) * (cx - pc[0])
                if s * e0 >= -1e-12 and s * e1 >= -1e-12 and s * e2 >= -1e-12:
                    grid[iy, ix] = True
                    break
    return grid


def brute_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """O(n^2) symmetric chamfer distance."""
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())
