"""Exception types shared across the package (and raised from the compiled kernels)."""


class ArxformError(Exception):
    """Base class for all package errors."""


class DimensionError(ArxformError, ValueError):
    pass


class NonFiniteError(ArxformError, ArithmeticError):
    """A simulation produced NaN/Inf; ``step`` is the offending time index."""

    def __init__(self, step, what="state"):
        self.step = step
        self.what = what
        super().__init__(f"non-finite {what} encountered at step t={step}")


class UnstableError(ArxformError, ValueError):
    """A matrix that must be Schur stable is not.

    ``rho`` holds the spectral-radius estimate obtained from matrix-power norms.
    """

    def __init__(self, message, rho=None):
        self.rho = rho
        super().__init__(message if rho is None else f"{message} (spectral radius estimate {rho:.6g})")


class SingularMatrixError(ArxformError, ArithmeticError):
    def __init__(self, message="matrix is numerically singular", cond=None):
        self.cond = cond
        if cond is not None:
            message = f"{message} (condition estimate {cond:.3g})"
        super().__init__(message)


class ConvergenceRegionError(ArxformError, ArithmeticError):
    """The unit circle is not inside the region of convergence of E(z)."""

    def __init__(self, order, rho=None):
        self.order = order
        self.rho = rho
        msg = f"error transfer is unstable at order N={order}; increase N"
        if rho is not None:
            msg += f" (augmented spectral radius estimate {rho:.6g})"
        super().__init__(msg)


class DepthExhausted(ArxformError):
    """A multiplication was requested on a value with no remaining depth."""
