"""Exception types shared across the simulation, benchmark, and I/O layers."""


class SoftsimError(Exception):
    pass


class OutOfRange(SoftsimError):
    def __init__(self, field, value, allowed):
        self.field = field
        self.value = value
        self.allowed = allowed
        super().__init__(f"{field}={value!r} outside allowed range {allowed}")


class NumericalBlowup(SoftsimError):
    pass


class NonManifoldMesh(SoftsimError):
    pass


class DegenerateConstraint(SoftsimError):
    pass


class InvertedElement(SoftsimError):
    pass


class NoParticleInRange(SoftsimError):
    pass


class NotGrasping(SoftsimError):
    pass


class CountMismatch(SoftsimError):
    pass


class EmptySilhouette(SoftsimError):
    pass


class TooFewItems(SoftsimError):
    pass


class SettlingTimeout(SoftsimError):
    """Randomized drop did not settle within the step budget; carries the state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class EmptyCloud(SoftsimError):
    pass


class Diverged(SoftsimError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SchemaError(SoftsimError):
    pass


class MeshParseError(SoftsimError):
    pass


class HashMismatch(SoftsimError):
    pass


class SnapshotDivergence(SoftsimError):
    def __init__(self, step, message=""):
        self.step = step
        super().__init__(message or f"snapshot divergence at step {step}")
