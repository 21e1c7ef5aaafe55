"""Exception hierarchy shared by all modules.

The CLI maps ``ConfigurationError`` to exit code 2 and
``NumericalInvariantError`` to exit code 3.
"""


class MrqsimError(Exception):
    pass


class ConfigurationError(MrqsimError, ValueError):
    """Invalid input or configuration, detected before any computation."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class DomainError(MrqsimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DimensionError(MrqsimError, ValueError):
    pass


class AssemblyError(MrqsimError):
    """Bell assembly is missing a CNOT term."""


class CompilationError(MrqsimError):
    """A pulse token has no unitary lowering."""


class NumericalInvariantError(MrqsimError):
    """A computed result violates an invariant it is required to satisfy."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}
