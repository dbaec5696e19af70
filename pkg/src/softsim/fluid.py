"""Position-based fluid: density constraint projection plus XSPH viscosity,
cohesion, and surface-tension velocity passes.

The density constraint C_i = rho_i - rho_0 is solved in its normalized form
(rho_i/rho_0 - 1) so the Newton-style projection has position units and a
scale-independent regularizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .params import PhysicsParams

LAMBDA_EPS = 1e-4


def kernel_value(r: float, h: float) -> float:
    """Poly6 density kernel, zero outside the support radius."""
    if h <= 0:
        raise ValueError("h must be > 0")
    return _kernels.poly6(float(r), float(h))


def kernel_gradient(rvec, h: float) -> np.ndarray:
    """Spiky kernel gradient; rvec points from neighbor to particle."""
    rvec = np.asarray(rvec, dtype=np.float64)
    r = float(np.linalg.norm(rvec))
    return _kernels.spiky_grad_factor(r, float(h)) * rvec


def lattice_kernel_sum(spacing: float, h: float) -> float:
    """Sum of Poly6 over an infinite cubic lattice (self term included)."""
    reach = int(math.ceil(h / spacing))
    total = 0.0
    for ix in range(-reach, reach + 1):
        for iy in range(-reach, reach + 1):
            for iz in range(-reach, reach + 1):
                r = spacing * math.sqrt(ix * ix + iy * iy + iz * iz)
                total += _kernels.poly6(r, h)
    return total


def calibrated_particle_mass(rest_density: float, rest_spacing: float, h: float) -> float:
    """Mass such that a rest-spacing lattice evaluates to the rest density."""
    return rest_density / lattice_kernel_sum(rest_spacing, h)


@dataclass
class FluidBlock:
    particle_range: range
    material: PhysicsParams
    rest_density: float = None
    kernel_radius: float = None  # = 4 * fluid_rest_offset
    particle_mass: float = None

    def __post_init__(self):
        if self.rest_density is None:
            self.rest_density = float(self.material.density)
        if self.kernel_radius is None:
            self.kernel_radius = 4.0 * self.material.fluid_rest_offset
        if self.particle_mass is None:
            self.particle_mass = calibrated_particle_mass(
                self.rest_density, 2.0 * self.material.fluid_rest_offset, self.kernel_radius
            )
        if self.rest_density <= 0 or self.kernel_radius <= 0 or self.particle_mass <= 0:
            raise ValueError("rest_density, kernel_radius, particle_mass must be > 0")

    @property
    def rest_spacing(self) -> float:
        return 2.0 * self.material.fluid_rest_offset


def compute_density(i: int, neighbors, positions, block: FluidBlock) -> float:
    """Kernel-weighted density at particle i, self-contribution included."""
    h = block.kernel_radius
    rho = block.particle_mass * _kernels.poly6(0.0, h)
    for j in neighbors:
        r = float(np.linalg.norm(positions[i] - positions[j]))
        rho += block.particle_mass * _kernels.poly6(r, h)
    return rho


def compute_densities(block: FluidBlock, predicted, starts, nbrs) -> np.ndarray:
    lo, hi = block.particle_range.start, block.particle_range.stop
    return _kernels.fluid_densities(predicted, starts, nbrs, lo, hi, block.particle_mass, block.kernel_radius)


def project_density(block: FluidBlock, predicted, starts, nbrs, densities=None):
    """One PBF iteration: lambdas from the density constraint, then position
    corrections.  Returns the (n_fluid, 3) corrections (also applied)."""
    lo, hi = block.particle_range.start, block.particle_range.stop
    if densities is None:
        densities = compute_densities(block, predicted, starts, nbrs)
    lam = _kernels.fluid_lambdas(
        predicted, starts, nbrs, lo, hi, block.particle_mass, block.kernel_radius,
        block.rest_density, densities, LAMBDA_EPS,
    )
    dp = _kernels.fluid_deltas(
        predicted, starts, nbrs, lo, hi, block.particle_mass, block.kernel_radius,
        block.rest_density, lam,
    )
    predicted[lo:hi] += dp
    return dp


def secondary_coefficients(material: PhysicsParams):
    """Map the sheet's parameter ranges onto model coefficients.

    Viscosity [1e3, 1e6] maps log-linearly to XSPH [0.01, 0.5]; cohesion and
    surface tension [0, 100] map linearly to [0, 1]."""
    visc = material.viscosity
    if visc <= 0:
        c_visc = 0.0
    else:
        t = np.clip((math.log10(max(visc, 1e3)) - 3.0) / 3.0, 0.0, 1.0)
        c_visc = 0.01 + t * (0.5 - 0.01)
    c_coh = np.clip(material.cohesion / 100.0, 0.0, 1.0)
    c_ten = np.clip(material.surface_tension / 100.0, 0.0, 1.0)
    return float(c_visc), float(c_coh), float(c_ten)


def apply_secondary_fluid_forces(block: FluidBlock, predicted, velocities, starts, nbrs, dt,
                                 coefficients=None) -> np.ndarray:
    """Velocity adjustments from viscosity/cohesion/surface tension; returns
    and applies the per-particle velocity increments."""
    if coefficients is None:
        coefficients = secondary_coefficients(block.material)
    c_visc, c_coh, c_ten = coefficients
    lo, hi = block.particle_range.start, block.particle_range.stop
    dv = _kernels.fluid_secondary(
        predicted, velocities, starts, nbrs, lo, hi, block.particle_mass,
        block.kernel_radius, block.rest_density, c_visc, c_coh, c_ten, dt,
    )
    velocities[lo:hi] += dv
    return dv


def make_fluid_box(nx: int, ny: int, nz: int, spacing: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Particle positions for a block of fluid on a cubic lattice."""
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    pts = np.column_stack([ix.ravel(), iy.ravel(), iz.ravel()]).astype(np.float64) * spacing
    return pts + np.asarray(origin, dtype=np.float64)
