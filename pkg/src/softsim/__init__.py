"""softsim: a deterministic deformable-object simulation toolkit.

Particle-based cloth, position-based fluids, corotational FEM soft bodies,
rigid colliders with analytic signed-distance fields, wind, kinematic
effectors, a garment-manipulation benchmark harness, a sim-to-real alignment
toolkit, episode record/replay, and a WebSocket teleoperation service.
"""

from .engine import Scene, run, settle, step
from .errors import SoftsimError
from .params import MaterialKind, PhysicsParams, validate_params

__version__ = "1.0.0"

__all__ = ["Scene", "run", "settle", "step", "SoftsimError",
           "MaterialKind", "PhysicsParams", "validate_params", "__version__"]
