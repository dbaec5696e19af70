"""Garment meshes and the PBD constraints that make them behave as cloth."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NonManifoldMesh
from .params import PhysicsParams, MaterialKind

log = logging.getLogger(__name__)
_warned_degenerate = False


@dataclass
class StretchConstraint:
    i: int
    j: int
    rest_length: float
    stiffness: float = 1.0


@dataclass
class BendConstraint:
    i: int  # shared edge
    j: int
    k: int  # wing vertices
    l: int
    rest_dihedral: float
    stiffness: float = 1.0


@dataclass
class GarmentMesh:
    particle_range: range
    triangles: np.ndarray  # (m, 3) global particle indices
    material: PhysicsParams
    uv: np.ndarray | None = None
    stretch: list = field(default_factory=list)
    bend: list = field(default_factory=list)
    # packed constraint arrays for the batch solver
    edge_arr: np.ndarray | None = None
    edge_rest: np.ndarray | None = None
    bend_arr: np.ndarray | None = None
    bend_rest: np.ndarray | None = None
    stretch_stiffness: float = 1.0
    bend_stiffness: float = 1.0

    def __post_init__(self):
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        lo, hi = self.particle_range.start, self.particle_range.stop
        if self.triangles.size and (self.triangles.min() < lo or self.triangles.max() >= hi):
            raise ValueError("triangle indices outside particle range")


def iteration_stiffness(k: float, iterations: int) -> float:
    """Iteration-count-corrected stiffness k' = 1 - (1 - k)^(1/n)."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    return 1.0 - (1.0 - k) ** (1.0 / iterations)


def _edge_census(triangles: np.ndarray) -> dict:
    """Map sorted edge -> list of (triangle index, opposite vertex)."""
    edges: dict[tuple, list] = {}
    for t, (a, b, c) in enumerate(triangles):
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            key = (min(u, v), max(u, v))
            edges.setdefault(key, []).append((t, w))
    return edges


def dihedral_angle(p1, p2, p3, p4) -> float:
    """Angle between triangle (p1,p2,p3) and (p1,p2,p4) normals; pi = flat."""
    e = p2 - p1
    n1 = np.cross(e, p3 - p1)
    n2 = np.cross(e, p4 - p1)
    l1, l2 = np.linalg.norm(n1), np.linalg.norm(n2)
    if l1 < 1e-12 or l2 < 1e-12:
        return np.pi
    d = np.clip(np.dot(n1, n2) / (l1 * l2), -1.0, 1.0)
    return float(np.arccos(d))


def build_cloth_constraints(mesh: GarmentMesh, rest_positions: np.ndarray):
    """One stretch constraint per unique edge, one bend constraint per
    interior edge, rest values taken from `rest_positions` (global array)."""
    census = _edge_census(mesh.triangles)
    stretch = []
    bend = []
    k_stretch = mesh.stretch_stiffness
    k_bend = mesh.bend_stiffness
    for (i, j), tris in sorted(census.items()):
        if len(tris) > 2:
            raise NonManifoldMesh(f"edge ({i}, {j}) shared by {len(tris)} triangles")
        d = float(np.linalg.norm(rest_positions[i] - rest_positions[j]))
        stretch.append(StretchConstraint(i, j, d, k_stretch))
        if len(tris) == 2:
            k, l = tris[0][1], tris[1][1]
            phi0 = dihedral_angle(rest_positions[i], rest_positions[j], rest_positions[k], rest_positions[l])
            bend.append(BendConstraint(i, j, k, l, phi0, k_bend))
    mesh.stretch = stretch
    mesh.bend = bend
    mesh.edge_arr = np.array([[c.i, c.j] for c in stretch], dtype=np.int64).reshape(-1, 2)
    mesh.edge_rest = np.array([c.rest_length for c in stretch], dtype=np.float64)
    mesh.bend_arr = np.array([[c.i, c.j, c.k, c.l] for c in bend], dtype=np.int64).reshape(-1, 4)
    mesh.bend_rest = np.array([c.rest_dihedral for c in bend], dtype=np.float64)
    return stretch, bend


def project_stretch(predicted, inv_mass, c: StretchConstraint, iterations: int = 1):
    """Corrections (dp_i, dp_j) for one stretch constraint."""
    global _warned_degenerate
    pi = predicted[c.i]
    pj = predicted[c.j]
    wi, wj = inv_mass[c.i], inv_mass[c.j]
    wsum = wi + wj
    d = pi - pj
    ln = np.linalg.norm(d)
    if ln < 1e-12:
        if not _warned_degenerate:
            log.warning("degenerate stretch constraint (coincident particles); skipping")
            _warned_degenerate = True
        return np.zeros(3), np.zeros(3)
    if wsum <= 0:
        return np.zeros(3), np.zeros(3)
    kprime = iteration_stiffness(c.stiffness, iterations)
    n = d / ln
    corr = kprime * (ln - c.rest_length)
    return -wi / wsum * corr * n, wj / wsum * corr * n


def project_bend(predicted, inv_mass, c: BendConstraint, iterations: int = 1):
    """Corrections (4, 3) for one dihedral bend constraint."""
    w = np.array([inv_mass[c.i], inv_mass[c.j], inv_mass[c.k], inv_mass[c.l]])
    kprime = iteration_stiffness(c.stiffness, iterations)
    return _kernels.bend_deltas(
        predicted[c.i].astype(np.float64),
        predicted[c.j].astype(np.float64),
        predicted[c.k].astype(np.float64),
        predicted[c.l].astype(np.float64),
        w, c.rest_dihedral, kprime,
    )


def bend_constraint_value(predicted, c: BendConstraint) -> float:
    return dihedral_angle(predicted[c.i], predicted[c.j], predicted[c.k], predicted[c.l]) - c.rest_dihedral


def make_cloth_grid(nx: int, ny: int, spacing: float):
    """Flat axis-aligned cloth grid in the z=0 plane.

    Returns (positions (nx*ny, 3), triangles, uv)."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="ij")
    positions = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    uv = positions[:, :2].copy()
    tris = []
    for ix in range(nx - 1):
        for iy in range(ny - 1):
            a = ix * ny + iy
            b = (ix + 1) * ny + iy
            c = ix * ny + iy + 1
            d = (ix + 1) * ny + iy + 1
            tris.append((a, b, d))
            tris.append((a, d, c))
    return positions, np.array(tris, dtype=np.int64), uv
