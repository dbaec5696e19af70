"""Shared particle state and spatial neighbor search.

All particle quantities live in flat numpy arrays (SI units).  Cloth, fluid,
and FEM bodies own index ranges of one shared ParticleSet so cross-material
interactions need no copying.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import OutOfRange


@dataclass
class ParticleSet:
    positions: np.ndarray  # (n, 3) m
    velocities: np.ndarray  # (n, 3) m/s
    inv_mass: np.ndarray  # (n,) 1/kg, 0 = pinned/kinematic
    group_id: np.ndarray  # (n,) int
    predicted: np.ndarray = None  # (n, 3) m

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)
        self.inv_mass = np.ascontiguousarray(self.inv_mass, dtype=np.float64)
        self.group_id = np.ascontiguousarray(self.group_id, dtype=np.int64)
        if self.predicted is None:
            self.predicted = self.positions.copy()
        n = len(self.positions)
        if not (len(self.velocities) == len(self.inv_mass) == len(self.group_id) == len(self.predicted) == n):
            raise ValueError("particle arrays must have equal length")
        if np.any(self.inv_mass < 0):
            raise OutOfRange("inv_mass", float(self.inv_mass.min()), "[0, inf)")

    @classmethod
    def empty(cls) -> "ParticleSet":
        z = np.zeros((0, 3))
        return cls(z, z.copy(), np.zeros(0), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.positions)

    def append(self, positions, velocities, inv_mass, group: int) -> range:
        """Add a block of particles; returns their index range."""
        start = len(self)
        positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
        n = len(positions)
        self.positions = np.vstack([self.positions, positions])
        self.velocities = np.vstack([self.velocities, np.broadcast_to(velocities, (n, 3))])
        self.predicted = np.vstack([self.predicted, positions])
        self.inv_mass = np.concatenate([self.inv_mass, np.broadcast_to(inv_mass, (n,))]).astype(np.float64)
        self.group_id = np.concatenate([self.group_id, np.full(n, group, dtype=np.int64)])
        return range(start, start + n)

    def assert_finite(self):
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise FloatingPointError("non-finite particle state")


def predict_positions(pset: ParticleSet, external_accel, dt: float) -> None:
    """Semi-implicit prediction: integrate acceleration into velocity, then
    extrapolate positions.  Pinned particles keep their velocity."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    accel = np.asarray(external_accel, dtype=np.float64)
    free = pset.inv_mass > 0
    pset.velocities[free] += dt * accel
    pset.predicted[:] = pset.positions + dt * pset.velocities


class NeighborGrid:
    """Uniform spatial hash over particle positions.

    Cell size equals the query radius so range queries only visit the 27
    surrounding cells.  Queries are exact (verified against brute force in
    the tests) and iterate candidates in index order for determinism.
    """

    def __init__(self, positions: np.ndarray, cell_size: float):
        if cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        self.cell_size = float(cell_size)
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        n = len(self.positions)
        if n:
            self._origin = self.positions.min(axis=0)
            cells = np.floor((self.positions - self._origin) / self.cell_size).astype(np.int64)
        else:
            self._origin = np.zeros(3)
            cells = np.zeros((0, 3), dtype=np.int64)
        self._dims = cells.max(axis=0) + 1 if n else np.ones(3, dtype=np.int64)
        flat = cells[:, 0] + self._dims[0] * (cells[:, 1] + self._dims[1] * cells[:, 2])
        order = np.argsort(flat, kind="stable")
        self._sorted_indices = order
        self._sorted_cells = flat[order]
        # CSR over occupied cells
        self._cell_ids, starts = np.unique(self._sorted_cells, return_index=True)
        self._cell_starts = np.append(starts, n)

    def _cell_particles(self, cx: int, cy: int, cz: int) -> np.ndarray:
        if not (0 <= cx < self._dims[0] and 0 <= cy < self._dims[1] and 0 <= cz < self._dims[2]):
            return np.empty(0, dtype=np.int64)
        flat = cx + self._dims[0] * (cy + self._dims[1] * cz)
        k = np.searchsorted(self._cell_ids, flat)
        if k >= len(self._cell_ids) or self._cell_ids[k] != flat:
            return np.empty(0, dtype=np.int64)
        return self._sorted_indices[self._cell_starts[k]:self._cell_starts[k + 1]]

    def query(self, point, radius: float) -> np.ndarray:
        """Indices of all particles within `radius` of `point`, ascending."""
        point = np.asarray(point, dtype=np.float64)
        reach = int(np.ceil(radius / self.cell_size))
        c = np.floor((point - self._origin) / self.cell_size).astype(np.int64)
        found = []
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                for dz in range(-reach, reach + 1):
                    idx = self._cell_particles(c[0] + dx, c[1] + dy, c[2] + dz)
                    if len(idx):
                        found.append(idx)
        if not found:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(found)
        d = np.linalg.norm(self.positions[cand] - point, axis=1)
        return np.sort(cand[d <= radius])

    def neighbor_lists(self, radius: float, max_neighborhood: int):
        """CSR neighbor lists (self excluded), nearest-first, truncated at
        max_neighborhood per particle.  Returns (starts, indices)."""
        starts, idx = _kernels.neighbor_csr(
            self.positions,
            self._sorted_indices,
            self._cell_ids,
            self._cell_starts,
            self._origin,
            self._dims,
            self.cell_size,
            float(radius),
            int(max_neighborhood),
        )
        return starts, idx


def build_neighbor_grid(pset: ParticleSet, radius: float, use_predicted: bool = True) -> NeighborGrid:
    pos = pset.predicted if use_predicted else pset.positions
    return NeighborGrid(pos, radius)
