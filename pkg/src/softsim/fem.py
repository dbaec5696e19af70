"""Tetrahedral soft bodies with corotational linear elasticity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange, MeshParseError

YOUNG_RANGE = (1e3, 1e10)
POISSON_RANGE = (0.0, 0.499)
ELASTICITY_DAMPING_RANGE = (0.0, 0.05)
VERTEX_DAMPING_RANGE = (0.0, 10.0)


def lame_parameters(young: float, poisson: float):
    """(mu, lam) from Young's modulus and Poisson's ratio."""
    if not YOUNG_RANGE[0] <= young <= YOUNG_RANGE[1]:
        raise OutOfRange("young_modulus", young, YOUNG_RANGE)
    if not POISSON_RANGE[0] <= poisson <= POISSON_RANGE[1]:
        raise OutOfRange("poisson_ratio", poisson, POISSON_RANGE)
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


@dataclass
class ElasticMaterial:
    young_modulus: float = 1e4
    poisson_ratio: float = 0.3
    elasticity_damping: float = 0.0
    vertex_velocity_damping: float = 0.0
    density: float = 1000.0

    def __post_init__(self):
        self.mu, self.lam = lame_parameters(self.young_modulus, self.poisson_ratio)
        if not ELASTICITY_DAMPING_RANGE[0] <= self.elasticity_damping <= ELASTICITY_DAMPING_RANGE[1]:
            raise OutOfRange("elasticity_damping", self.elasticity_damping, ELASTICITY_DAMPING_RANGE)
        if not VERTEX_DAMPING_RANGE[0] <= self.vertex_velocity_damping <= VERTEX_DAMPING_RANGE[1]:
            raise OutOfRange("vertex_velocity_damping", self.vertex_velocity_damping, VERTEX_DAMPING_RANGE)


@dataclass
class TetMesh:
    vertex_range: range
    tets: np.ndarray  # (t, 4) global particle indices
    rest_inverse_basis: np.ndarray = None  # (t, 3, 3) Dm^-1
    rest_volume: np.ndarray = None  # (t,)
    surface_triangles: np.ndarray = None

    def __post_init__(self):
        self.tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)

    def compute_rest_state(self, rest_positions: np.ndarray):
        dm = _edge_matrices(rest_positions, self.tets)
        det = np.linalg.det(dm)
        if np.any(det <= 0):
            raise ValueError("tets must have positive rest volume (fix winding)")
        self.rest_inverse_basis = np.linalg.inv(dm)
        self.rest_volume = det / 6.0
        if self.surface_triangles is None:
            self.surface_triangles = extract_surface(self.tets)
        return self


def _edge_matrices(positions, tets):
    """Per-tet 3x3 matrices whose columns are edge vectors from vertex 0."""
    p0 = positions[tets[:, 0]]
    return np.stack([
        positions[tets[:, 1]] - p0,
        positions[tets[:, 2]] - p0,
        positions[tets[:, 3]] - p0,
    ], axis=2)


def _polar_rotations(f):
    """Rotation factors of the deformation gradients via SVD, with sign
    correction so det(R) = +1 even for inverted elements."""
    u, s, vt = np.linalg.svd(f)
    r = u @ vt
    flip = np.linalg.det(r) < 0
    if np.any(flip):
        u = u.copy()
        u[flip, :, 2] *= -1.0
        s = s.copy()
        s[flip, 2] *= -1.0
        r = u @ vt
    return r, s, vt


def deformation_gradients(mesh: TetMesh, positions) -> np.ndarray:
    return _edge_matrices(positions, mesh.tets) @ mesh.rest_inverse_basis


def elastic_forces(mesh: TetMesh, positions, material: ElasticMaterial):
    """Per-vertex corotational elastic forces (global array, zeros outside
    the mesh's range).  Also returns the per-tet inversion flags."""
    f = deformation_gradients(mesh, positions)
    r, s, vt = _polar_rotations(f)
    inverted = np.linalg.det(f) <= 0
    # symmetric factor S = V diag(s) V^T
    v = np.transpose(vt, (0, 2, 1))
    smat = v @ (s[:, :, None] * vt)
    strain = smat - np.eye(3)
    tr = np.trace(strain, axis1=1, axis2=2)
    stress = r @ (2.0 * material.mu * strain + material.lam * tr[:, None, None] * np.eye(3))
    h = -mesh.rest_volume[:, None, None] * stress @ np.transpose(mesh.rest_inverse_basis, (0, 2, 1))
    forces = np.zeros_like(positions)
    for k in range(3):
        np.add.at(forces, mesh.tets[:, k + 1], h[:, :, k])
    np.add.at(forces, mesh.tets[:, 0], -h.sum(axis=2))
    return forces, inverted


def elastic_energy(mesh: TetMesh, positions, material: ElasticMaterial) -> float:
    f = deformation_gradients(mesh, positions)
    _, s, vt = _polar_rotations(f)
    v = np.transpose(vt, (0, 2, 1))
    smat = v @ (s[:, :, None] * vt)
    strain = smat - np.eye(3)
    tr = np.trace(strain, axis1=1, axis2=2)
    dens = material.mu * np.einsum("tij,tij->t", strain, strain) + 0.5 * material.lam * tr ** 2
    return float(np.sum(mesh.rest_volume * dens))


def vertex_masses(mesh: TetMesh, rest_positions, material: ElasticMaterial) -> np.ndarray:
    """Lumped vertex masses (global array) from rest volumes and density."""
    m = np.zeros(len(rest_positions))
    share = material.density * mesh.rest_volume / 4.0
    for k in range(4):
        np.add.at(m, mesh.tets[:, k], share)
    return m


def apply_elastic_velocities(mesh: TetMesh, positions, velocities, inv_mass,
                             material: ElasticMaterial, dt: float):
    """Integrate elastic forces and both damping terms into the velocities
    of the mesh's vertices (in place)."""
    forces, inverted = elastic_forces(mesh, positions, material)
    lo, hi = mesh.vertex_range.start, mesh.vertex_range.stop
    velocities[lo:hi] += dt * forces[lo:hi] * inv_mass[lo:hi, None]
    if material.elasticity_damping > 0:
        # damp oscillation by pulling vertex velocities toward per-tet means
        vmean = velocities[mesh.tets].mean(axis=1)
        corr = np.zeros_like(velocities)
        cnt = np.zeros(len(velocities))
        for k in range(4):
            np.add.at(corr, mesh.tets[:, k], vmean - velocities[mesh.tets[:, k]])
            np.add.at(cnt, mesh.tets[:, k], 1.0)
        nz = cnt > 0
        corr[nz] /= cnt[nz, None]
        velocities[lo:hi] += material.elasticity_damping * corr[lo:hi]
    if material.vertex_velocity_damping > 0:
        scale = max(0.0, 1.0 - material.vertex_velocity_damping * dt)
        velocities[lo:hi] *= scale
    return inverted


def stable_timestep(mesh: TetMesh, material: ElasticMaterial, safety: float = 0.2) -> float:
    """Explicit-integration bound dt <= c * sqrt(m / k) with an element
    stiffness estimate k ~ E * V^(1/3)."""
    vol = float(mesh.rest_volume.min())
    m = material.density * vol / 4.0
    k = material.young_modulus * vol ** (1.0 / 3.0)
    return safety * float(np.sqrt(m / k))


def fem_step(mesh: TetMesh, positions, velocities, inv_mass, material: ElasticMaterial,
             dt: float, gravity, colliders=()):
    """Standalone semi-implicit step for one soft body (used directly by the
    tests and demos; the scene pipeline integrates the same pieces)."""
    from .rigid import resolve_particle_contacts

    if dt <= 0:
        raise ValueError("dt must be > 0")
    lo, hi = mesh.vertex_range.start, mesh.vertex_range.stop
    inverted = apply_elastic_velocities(mesh, positions, velocities, inv_mass, material, dt)
    free = inv_mass[lo:hi] > 0
    velocities[lo:hi][free] += dt * np.asarray(gravity, dtype=np.float64)
    old = positions[lo:hi].copy()
    positions[lo:hi] += dt * velocities[lo:hi]
    if colliders:
        n = hi - lo
        zeros = np.zeros(n)
        for col in colliders:
            pred = positions[lo:hi]
            resolve_particle_contacts(col, pred, old, inv_mass[lo:hi],
                                      zeros + col.rest_offset, zeros + col.contact_offset,
                                      zeros)
        velocities[lo:hi][free] = (positions[lo:hi][free] - old[free]) / dt
    if not np.all(np.isfinite(positions[lo:hi])):
        from .errors import NumericalBlowup
        raise NumericalBlowup("soft body state became non-finite")
    return inverted


# ---------------------------------------------------------------------------
# mesh construction and I/O

_CUBE_TETS = np.array([
    [0, 1, 3, 5],
    [0, 3, 2, 6],
    [0, 5, 4, 6],
    [3, 5, 6, 7],
    [0, 3, 5, 6],
], dtype=np.int64)


def make_tet_lattice(nx: int, ny: int, nz: int, spacing: float, origin=(0.0, 0.0, 0.0)):
    """Box of (nx, ny, nz) cells, five tets per cell.

    Returns (positions, tets) with local vertex indices."""
    vx, vy, vz = nx + 1, ny + 1, nz + 1
    ix, iy, iz = np.meshgrid(np.arange(vx), np.arange(vy), np.arange(vz), indexing="ij")
    positions = np.column_stack([ix.ravel(), iy.ravel(), iz.ravel()]).astype(np.float64) * spacing
    positions += np.asarray(origin, dtype=np.float64)

    def vid(x, y, z):
        return (x * vy + y) * vz + z

    tets = []
    for cx in range(nx):
        for cy in range(ny):
            for cz in range(nz):
                corner = [vid(cx + dx, cy + dy, cz + dz)
                          for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)]
                # mirror alternate cells so faces are compatible
                flip = (cx + cy + cz) % 2 == 1
                for tet in _CUBE_TETS:
                    ids = [corner[t] for t in tet]
                    if flip:
                        ids = [corner[t ^ 7] for t in tet]
                    tets.append(ids)
    tets = np.array(tets, dtype=np.int64)
    # enforce positive orientation
    dm = _edge_matrices(positions, tets)
    neg = np.linalg.det(dm) < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
    return positions, tets


def extract_surface(tets: np.ndarray) -> np.ndarray:
    """Boundary triangles (faces appearing in exactly one tet)."""
    faces = {}
    order = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    for tet in tets:
        for a, b, c in order:
            tri = (tet[a], tet[b], tet[c])
            key = tuple(sorted(tri))
            if key in faces:
                faces[key] = None
            else:
                faces[key] = tri
    out = [tri for tri in faces.values() if tri is not None]
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def load_tet_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Plain-text tet mesh: "v x y z" and "t i j k l" lines, 0-based."""
    verts, tets = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "t":
                    tets.append([int(x) for x in parts[1:5]])
            except (ValueError, IndexError) as exc:
                raise MeshParseError(f"{path}:{ln}: {exc}") from exc
    if not verts or not tets:
        raise MeshParseError(f"{path}: no vertices or tets")
    return np.array(verts, dtype=np.float64), np.array(tets, dtype=np.int64)


def save_tet_file(path, positions, tets) -> None:
    with open(path, "w") as fh:
        for p in positions:
            fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for t in tets:
            fh.write(f"t {t[0]} {t[1]} {t[2]} {t[3]}\n")
