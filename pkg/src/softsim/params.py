"""Per-material physics parameter records with validated ranges.

Each material kind constrains a subset of the fields; everything listed as
"default" by the source parameter sheet is only required to be finite and
non-negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import OutOfRange

INF = math.inf


class MaterialKind(str, Enum):
    Garment = "Garment"
    Fluid = "Fluid"
    DeformableBody = "DeformableBody"
    RigidBody = "RigidBody"
    Flow = "Flow"


# (lo, hi) bounds per field, per material kind.  Fields not listed fall back
# to the generic non-negativity check.
_RANGES: dict[MaterialKind, dict[str, tuple[float, float]]] = {
    MaterialKind.Garment: {
        "particle_contact_offset": (0.03, 0.12),
        "rest_offset": (0.0, 0.05),
        "solver_position_iterations": (6, 255),
        "max_neighborhood": (36, 512),
    },
    MaterialKind.Fluid: {
        "particle_contact_offset": (0.17, 0.3),
        "rest_offset": (0.03, 0.2),
        "solid_rest_offset": (0.1, 0.2),
        "fluid_rest_offset": (0.1, 0.15),
        "solver_position_iterations": (6, 255),
        "max_neighborhood": (36, 512),
        "density": (0.0, 1e10),
        "friction": (0.0, 0.2),
        "damping": (0.0, 10.0),
        "viscosity": (1e3, 1e6),
        "cohesion": (0.0, 100.0),
        "surface_tension": (0.0, 100.0),
        "drag": (0.0, 78.0),
        "lift": (0.0, 1e10),
    },
    MaterialKind.DeformableBody: {},
    MaterialKind.RigidBody: {},
    MaterialKind.Flow: {},
}

_NONNEG_FIELDS = (
    "particle_contact_offset",
    "rest_offset",
    "solid_rest_offset",
    "fluid_rest_offset",
    "max_depenetration_velocity",
    "density",
    "friction",
    "damping",
    "viscosity",
    "cohesion",
    "surface_tension",
    "drag",
    "lift",
)


@dataclass
class PhysicsParams:
    material_kind: MaterialKind
    particle_contact_offset: float
    rest_offset: float
    solid_rest_offset: float
    fluid_rest_offset: float
    solver_position_iterations: int
    max_depenetration_velocity: float
    max_neighborhood: int
    density: float
    friction: float
    damping: float
    viscosity: float
    cohesion: float
    surface_tension: float
    drag: float
    lift: float

    @classmethod
    def defaults(cls, kind: MaterialKind | str) -> "PhysicsParams":
        kind = MaterialKind(kind)
        if kind == MaterialKind.Fluid:
            return cls(
                material_kind=kind,
                particle_contact_offset=0.2,
                rest_offset=0.1,
                solid_rest_offset=0.1,
                fluid_rest_offset=0.1,
                solver_position_iterations=6,
                max_depenetration_velocity=INF,
                max_neighborhood=96,
                density=1000.0,
                friction=0.1,
                damping=0.5,
                viscosity=1e3,
                cohesion=0.0,
                surface_tension=0.0,
                drag=0.0,
                lift=0.0,
            )
        return cls(
            material_kind=kind,
            particle_contact_offset=0.06,
            rest_offset=0.008,
            solid_rest_offset=0.008,
            fluid_rest_offset=0.06,
            solver_position_iterations=20,
            max_depenetration_velocity=INF,
            max_neighborhood=64,
            density=200.0,
            friction=0.3 if kind != MaterialKind.Fluid else 0.1,
            damping=1.0,
            viscosity=0.0,
            cohesion=0.0,
            surface_tension=0.0,
            drag=1.0,
            lift=0.2,
        )

    def with_overrides(self, **kwargs) -> "PhysicsParams":
        return validate_params(replace(self, **kwargs))


def validate_params(params: PhysicsParams) -> PhysicsParams:
    """Check every field against its material-kind range; raise OutOfRange."""
    kind = MaterialKind(params.material_kind)
    ranges = _RANGES[kind]
    for field in _NONNEG_FIELDS:
        value = getattr(params, field)
        if not (value >= 0) or (math.isnan(value)):
            raise OutOfRange(field, value, "[0, inf)")
        lo, hi = ranges.get(field, (0.0, INF))
        if not (lo <= value <= hi):
            raise OutOfRange(field, value, (lo, hi))
    iters = params.solver_position_iterations
    lo, hi = ranges.get("solver_position_iterations", (1, INF))
    if iters < 1 or not (lo <= iters <= hi):
        raise OutOfRange("solver_position_iterations", iters, (lo, hi))
    lo, hi = ranges.get("max_neighborhood", (1, INF))
    if not (lo <= params.max_neighborhood <= hi):
        raise OutOfRange("max_neighborhood", params.max_neighborhood, (lo, hi))
    return params
