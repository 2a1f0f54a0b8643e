"""Exception hierarchy shared across the package."""


class MasolveError(Exception):
    """Base class for all errors raised by masolve."""


class InvalidMeshError(MasolveError, ValueError):
    pass


class SamplingError(MasolveError, ValueError):
    pass


class OutOfStencilError(MasolveError, IndexError):
    pass


class NondifferentiableError(MasolveError, ValueError):
    pass


class OperatorUndefinedError(MasolveError, ValueError):
    pass


class UnsupportedStencilError(MasolveError, ValueError):
    pass


class InvalidDataError(MasolveError, ValueError):
    pass


class InfeasiblePresolveError(MasolveError):
    pass


class MalformedProgramError(MasolveError, ValueError):
    pass


class SolverFailure(MasolveError, RuntimeError):
    """Numerical breakdown inside the conic solver."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AtomPlacementError(MasolveError, ValueError):
    pass


class UnknownCaseError(MasolveError, KeyError):
    pass


class InfeasibleSampleError(MasolveError, ValueError):
    pass
