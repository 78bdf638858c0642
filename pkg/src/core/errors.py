# src/core/errors.py

class StretchLatError(Exception):
    """Base class for every error raised by stretchlat"""


class InputError(StretchLatError, ValueError):
    """Invalid body, stretch, dilation or lattice set"""


class DegenerateDirectionError(InputError):
    """Direction too short to define a boundary point"""


class NumericalEvaluationError(StretchLatError):
    """Root finding, differentiation or quadrature did not reach its tolerance"""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        if not self.diagnostics:
            return super().__str__()
        details = ", ".join(f"{key}={value!r}" for key, value in self.diagnostics.items())
        return f"{super().__str__()} ({details})"


class CapacityError(StretchLatError):
    """Requested enumeration exceeds the supported index range"""


class AnalysisError(StretchLatError):
    """Boundary analysis found a structure a convex finite type body cannot have"""


class FiniteTypeError(AnalysisError):
    """Flag of zero subspaces did not reach {0} by the maximal probed order"""


class ConfigurationError(StretchLatError):
    """Optimizer or experiment configuration cannot be used"""


class ConfigParseError(ConfigurationError):
    """Experiment config file is malformed"""

    def __init__(self, message, line=None, key=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class PartialResultError(StretchLatError):
    """Optimizer ran out of budget; `best` holds the best report found so far"""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best
