"""Exception hierarchy shared by the model modules and the CLI."""


class QMarketError(Exception):
    """Base class for all package errors."""


class NumericalError(QMarketError):
    """A numerical step did not meet its accuracy contract."""


class EigenError(NumericalError):
    """Eigendecomposition residual above tolerance."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge to the requested accuracy."""


class WindowTooNarrowError(NumericalError):
    """Boundary modes of a discretized reservoir carry too much weight."""

    def __init__(self, message, leakage):
        super().__init__(message)
        self.leakage = leakage


class GridError(QMarketError):
    """Mismatched grids or a path that leaves the grid."""


class ConfigError(QMarketError):
    """Invalid experiment configuration."""


class DegenerateKernelWarning(RuntimeWarning):
    """A kernel denominator vanished and the analytic limit was used."""
