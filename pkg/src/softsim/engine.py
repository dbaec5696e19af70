"""Scene container and the per-step simulation pipeline.

A Scene is single-threaded: every operation on it happens sequentially, and
two runs from byte-identical state produce byte-identical results.  Scenes
are plain values, so a batch runner may move independent Scenes across
worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, cloth as cloth_mod, fluid as fluid_mod, fem as fem_mod
from .core import ParticleSet, NeighborGrid, predict_positions
from .errors import NumericalBlowup
from .params import PhysicsParams, MaterialKind
from .rigid import RigidCollider, WindField, apply_wind_to_cloth, resolve_particle_contacts, rigid_step

DEFAULT_DT = 1.0 / 120.0


@dataclass
class SoftBody:
    mesh: fem_mod.TetMesh
    material: fem_mod.ElasticMaterial


@dataclass
class Scene:
    particles: ParticleSet = field(default_factory=ParticleSet.empty)
    garments: list = field(default_factory=list)
    fluids: list = field(default_factory=list)
    soft_bodies: list = field(default_factory=list)
    colliders: list = field(default_factory=list)
    effectors: list = field(default_factory=list)
    wind: WindField | None = None
    params_by_group: dict = field(default_factory=dict)
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    dt: float = DEFAULT_DT
    iterations: int = 20
    rng_seed: int = 0
    sim_time: float = 0.0
    config: dict | None = None  # normalized source config, for episode hashing
    debug: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=np.float64)
        if self.dt <= 0:
            raise ValueError("dt must be > 0")

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Counter-based PRNG; each (seed, stream) pair is an independent,
        replayable sequence."""
        return np.random.Generator(np.random.Philox(key=(self.rng_seed, stream)))

    # -- construction helpers ------------------------------------------------

    def _next_group(self) -> int:
        return max(self.params_by_group.keys(), default=-1) + 1

    def add_garment(self, positions, triangles, mass_per_particle: float,
                    params: PhysicsParams | None = None, uv=None,
                    stretch_stiffness: float = 1.0, bend_stiffness: float = 0.5,
                    pinned=()) -> cloth_mod.GarmentMesh:
        params = params or PhysicsParams.defaults(MaterialKind.Garment)
        group = self._next_group()
        inv_mass = 1.0 / mass_per_particle
        rng_idx = self.particles.append(positions, np.zeros(3), inv_mass, group)
        for p in pinned:
            self.particles.inv_mass[rng_idx.start + p] = 0.0
        tri = np.asarray(triangles, dtype=np.int64) + rng_idx.start
        mesh = cloth_mod.GarmentMesh(rng_idx, tri, params, uv=uv,
                                     stretch_stiffness=stretch_stiffness,
                                     bend_stiffness=bend_stiffness)
        cloth_mod.build_cloth_constraints(mesh, self.particles.positions)
        self.garments.append(mesh)
        self.params_by_group[group] = params
        return mesh

    def add_fluid(self, positions, params: PhysicsParams | None = None) -> fluid_mod.FluidBlock:
        params = params or PhysicsParams.defaults(MaterialKind.Fluid)
        group = self._next_group()
        block = fluid_mod.FluidBlock(range(0, 0), params)
        rng_idx = self.particles.append(positions, np.zeros(3), 1.0 / block.particle_mass, group)
        block.particle_range = rng_idx
        self.fluids.append(block)
        self.params_by_group[group] = params
        return block

    def add_soft_body(self, positions, tets, material: fem_mod.ElasticMaterial,
                      params: PhysicsParams | None = None, pinned=()) -> SoftBody:
        params = params or PhysicsParams.defaults(MaterialKind.DeformableBody)
        group = self._next_group()
        rng_idx = self.particles.append(positions, np.zeros(3), 1.0, group)
        tets = np.asarray(tets, dtype=np.int64) + rng_idx.start
        mesh = fem_mod.TetMesh(rng_idx, tets).compute_rest_state(self.particles.positions)
        masses = fem_mod.vertex_masses(mesh, self.particles.positions, material)
        lo, hi = rng_idx.start, rng_idx.stop
        self.particles.inv_mass[lo:hi] = 1.0 / masses[lo:hi]
        for p in pinned:
            self.particles.inv_mass[lo + p] = 0.0
        body = SoftBody(mesh, material)
        self.soft_bodies.append(body)
        self.params_by_group[group] = params
        return body

    # -- queries -------------------------------------------------------------

    def group_array(self, attr: str) -> np.ndarray:
        """Per-particle array of a PhysicsParams field, via group ids."""
        out = np.zeros(len(self.particles))
        for gid, params in self.params_by_group.items():
            out[self.particles.group_id == gid] = getattr(params, attr)
        return out

    def kinetic_energy_per_particle(self) -> float:
        v2 = np.einsum("ij,ij->i", self.particles.velocities, self.particles.velocities)
        with np.errstate(divide="ignore"):
            m = np.where(self.particles.inv_mass > 0, 1.0 / np.maximum(self.particles.inv_mass, 1e-30), 0.0)
        n = max(len(self.particles), 1)
        return float(0.5 * np.sum(m * v2) / n)


def _solver_radius(scene: Scene) -> float:
    """Largest interaction radius any pass needs this step."""
    radius = 0.0
    for g in scene.garments:
        radius = max(radius, g.material.particle_contact_offset)
    for f in scene.fluids:
        radius = max(radius, f.kernel_radius)
    return radius


def step(scene: Scene) -> None:
    """Advance the scene by one dt.

    Pipeline: external forces (gravity, wind, elastic) -> predict ->
    neighbor search -> iterative constraint projection (stretch, bend,
    density, particle pairs, colliders, attachments) -> velocity update
    with damping and depenetration clamp -> secondary fluid passes."""
    ps = scene.particles
    dt = scene.dt
    saved_pos = ps.positions.copy()
    saved_vel = ps.velocities.copy()
    try:
        # external forces into velocities
        if scene.wind is not None:
            for g in scene.garments:
                apply_wind_to_cloth(g.triangles, ps.positions, ps.velocities, ps.inv_mass,
                                    scene.wind, g.material.drag, g.material.lift, dt, scene.sim_time)
        for body in scene.soft_bodies:
            fem_mod.apply_elastic_velocities(body.mesh, ps.positions, ps.velocities,
                                             ps.inv_mass, body.material, dt)
        predict_positions(ps, scene.gravity, dt)
        if not np.all(np.isfinite(ps.predicted)):
            raise NumericalBlowup("predicted positions became non-finite")
        for e in scene.effectors:
            e.apply_to_predicted(ps)

        radius = _solver_radius(scene)
        starts = nbrs = None
        if radius > 0 and len(ps) > 1 and (scene.fluids or _self_collision_wanted(scene)):
            grid = NeighborGrid(ps.predicted, radius)
            maxn = int(max((p.max_neighborhood for p in scene.params_by_group.values()), default=64))
            starts, nbrs = grid.neighbor_lists(radius, maxn)

        pred0 = ps.predicted.copy()
        rest_radius = scene.group_array("rest_offset")
        detect_radius = scene.group_array("particle_contact_offset")
        frictions = scene.group_array("friction")
        solid_rest = _solid_rest_offsets(scene, rest_radius)
        active = np.zeros(len(ps), dtype=np.bool_)
        for g in scene.garments:
            active[g.particle_range.start:g.particle_range.stop] = True

        fluid_densities = {}
        for it in range(scene.iterations):
            for g in scene.garments:
                ks = cloth_mod.iteration_stiffness(g.stretch_stiffness, scene.iterations)
                _kernels.project_stretch_batch(ps.predicted, ps.inv_mass, g.edge_arr, g.edge_rest, ks)
                if len(g.bend_arr):
                    kb = cloth_mod.iteration_stiffness(g.bend_stiffness, scene.iterations)
                    _kernels.project_bend_batch(ps.predicted, ps.inv_mass, g.bend_arr, g.bend_rest, kb)
            for block in scene.fluids:
                if starts is not None:
                    rho = fluid_mod.compute_densities(block, ps.predicted, starts, nbrs)
                    fluid_densities[id(block)] = rho
                    fluid_mod.project_density(block, ps.predicted, starts, nbrs, densities=rho)
            if starts is not None and np.any(active):
                _kernels.project_pair_collisions(ps.predicted, ps.inv_mass, starts, nbrs,
                                                 rest_radius, detect_radius, active)
            for col in scene.colliders:
                impulse = resolve_particle_contacts(col, ps.predicted, ps.positions, ps.inv_mass,
                                                    solid_rest, np.maximum(solid_rest, col.contact_offset),
                                                    frictions)
                if col.dynamic and np.any(impulse):
                    col.velocity = col.velocity + impulse / (col.mass * dt)
            for e in scene.effectors:
                e.apply_to_predicted(ps)

        # clamp the separation speed introduced by constraint corrections
        corr = ps.predicted - pred0
        maxdep = scene.group_array("max_depenetration_velocity")
        finite = np.isfinite(maxdep)
        if np.any(finite):
            lim = maxdep * dt
            ln = np.linalg.norm(corr, axis=1)
            over = finite & (ln > lim)
            if np.any(over):
                corr[over] *= (lim[over] / ln[over])[:, None]
                ps.predicted[:] = pred0 + corr

        # velocity reconstruction
        free = ps.inv_mass > 0
        new_vel = ps.velocities.copy()
        new_vel[free] = (ps.predicted[free] - ps.positions[free]) / dt
        scene.debug["v_raw"] = new_vel.copy()
        damping = scene.group_array("damping")
        scale = np.maximum(0.0, 1.0 - damping * dt)
        new_vel[free] *= scale[free, None]
        ps.velocities[:] = new_vel
        ps.positions[:] = ps.predicted

        if scene.fluids and starts is not None:
            for block in scene.fluids:
                fluid_mod.apply_secondary_fluid_forces(block, ps.positions, ps.velocities,
                                                       starts, nbrs, dt)
        for e in scene.effectors:
            e.finalize_velocities(ps)
        for col in scene.colliders:
            rigid_step(col, dt, scene.gravity)

        if not (np.all(np.isfinite(ps.positions)) and np.all(np.isfinite(ps.velocities))):
            raise NumericalBlowup("particle state became non-finite")
    except NumericalBlowup:
        ps.positions[:] = saved_pos
        ps.velocities[:] = saved_vel
        ps.predicted[:] = saved_pos
        raise
    scene.sim_time += dt


def _self_collision_wanted(scene: Scene) -> bool:
    return bool(scene.garments)


def _solid_rest_offsets(scene: Scene, rest_radius: np.ndarray) -> np.ndarray:
    """Particle-vs-collider rest distance: fluids use solid_rest_offset,
    everything else its rest_offset."""
    out = rest_radius.copy()
    for block in scene.fluids:
        lo, hi = block.particle_range.start, block.particle_range.stop
        out[lo:hi] = block.material.solid_rest_offset
    return out


def run(scene: Scene, steps: int) -> None:
    for _ in range(steps):
        step(scene)


def settle(scene: Scene, max_steps: int = 600, energy_threshold: float = 1e-5):
    """Step until kinetic energy per particle stays below the threshold for
    0.1 s of simulated time (a single quiet step right after release would
    otherwise count a free-falling body as settled).

    Returns (steps_taken, settled)."""
    quiet_needed = max(int(round(0.1 / scene.dt)), 1)
    quiet = 0
    for i in range(max_steps):
        step(scene)
        quiet = quiet + 1 if scene.kinetic_energy_per_particle() < energy_threshold else 0
        if quiet >= quiet_needed:
            return i + 1, True
    return max_steps, False
