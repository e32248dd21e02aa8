"""Exception hierarchy shared by all modules."""


class HybridKoopmanError(Exception):
    """Base class for every error raised by the package."""

    code = "error"


class ConfigurationError(HybridKoopmanError, ValueError):
    code = "configuration"


class SizeMismatchError(HybridKoopmanError, ValueError):
    code = "size_mismatch"


class InvalidDensityError(HybridKoopmanError, ValueError):
    code = "invalid_density"


class OracleUnavailableError(HybridKoopmanError, KeyError):
    code = "oracle_unavailable"

    def __str__(self):
        return str(self.args[0]) if self.args else "oracle unavailable"


class NonHermitianError(HybridKoopmanError, ValueError):
    code = "non_hermitian"


class DecompositionError(HybridKoopmanError, RuntimeError):
    code = "decomposition"


class IdentityViolation(HybridKoopmanError, AssertionError):
    """A structural identity that must hold numerically did not."""

    code = "identity_violation"


class NonlinearGeneratorError(HybridKoopmanError, ValueError):
    code = "nonlinear_generator"


class DensityMatrixError(HybridKoopmanError, ValueError):
    """Raised by density-matrix validation; carries the violation report.

    Attributes
    ----------
    violations : list of (str, float)
        Each failed invariant ("hermiticity", "positivity", "trace") with
        the size of the violation.
    """

    code = "invalid_density_matrix"

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{name} violated by {size:.3g}" for name, size in self.violations)
        super().__init__(msg)


class ExpressionError(ConfigurationError):
    """Base class for expression-language errors."""

    code = "expression"


class ExprSyntaxError(ExpressionError):
    """Malformed expression text; ``line`` and ``column`` are 1-based."""

    code = "expression_syntax"

    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"{message} at line {line}, column {column}")


class UnknownIdentifierError(ExprSyntaxError):
    code = "unknown_identifier"

    def __init__(self, name, line, column):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", line, column)


class ExprEvaluationError(ExpressionError):
    """Domain error during evaluation; ``index`` and ``point`` locate the first bad grid point."""

    code = "expression_domain"

    def __init__(self, message, index=None, point=None):
        self.index = index
        self.point = point
        where = "" if point is None else f" at (q, p) = ({point[0]:.6g}, {point[1]:.6g})"
        super().__init__(message + where)
