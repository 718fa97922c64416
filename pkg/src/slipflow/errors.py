"""Exception types shared across the package."""


class SlipflowError(Exception):
    """Base class for all package-specific errors."""


class GridResolutionError(SlipflowError):
    """Quadrature grid cannot resolve the requested mode set."""


class EigensolverError(SlipflowError):
    """A vertical eigenproblem failed; the message names the wavevector."""


class BasisFormatError(SlipflowError):
    """A basis file is malformed or has an unsupported format version."""


class PicardNotConverged(SlipflowError):
    """The implicit midpoint iteration stalled; usually dt is too large.

    Carries the simulation time and the iteration count at failure.
    """

    def __init__(self, time, iterations, delta):
        self.time = time
        self.iterations = iterations
        self.delta = delta
        super().__init__(
            f"Picard iteration did not converge at t={time:.6g} "
            f"after {iterations} sweeps (last update {delta:.3e}); "
            "reduce dt or raise picard_max_iter"
        )


class NonFiniteState(SlipflowError):
    """The state left the a-priori energy ball or became non-finite."""

    def __init__(self, time, detail=""):
        self.time = time
        super().__init__(f"solution blew up at t={time:.6g}" + (f": {detail}" if detail else ""))


class ConfigValidationError(SlipflowError):
    """Config file rejected; carries the full list of validation errors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid run configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))
