"""Exception types shared across the package."""


class PanelFormatError(ValueError):
    """Input data does not parse or violates the panel layout."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    """A configuration object is inconsistent or infeasible."""


class ConvergenceError(ArithmeticError):
    """The Neumann series for (I - M)^-1 cannot be trusted to converge.

    ``rho`` carries the spectral-radius estimate of M that tripped the guard.
    """

    def __init__(self, rho, message=None):
        self.rho = float(rho)
        super().__init__(message or f"spectral radius estimate {self.rho:.6g} >= 1; series diverges")
