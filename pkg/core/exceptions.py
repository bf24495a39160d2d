"""
Error Hierarchy
Exceptions raised by the CGN library and the experiment harness
"""

from typing import Any, Dict, Optional


class CgnError(Exception):
    """Base class for every error raised by this package"""


class DomainError(CgnError, ValueError):
    """A density or update was asked for outside its mathematical domain"""


class ContractViolation(CgnError, ValueError):
    """Arguments break an operation's precondition (shapes, lengths, ranges)"""


class NumericalInstabilityError(CgnError, ArithmeticError):
    """
    A matrix that must be positive definite failed its factorization

    Args:
        message: Human readable description
        diagnostics: Extra numbers that help locating the problem
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{key}={value}" for key, value in self.diagnostics.items())
        return f"{base} ({details})"


class ParseError(CgnError):
    """
    Input file could not be parsed

    Args:
        message: What went wrong
        path: File being parsed
        line: 1-based line number, header included, when known
    """

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class PreconditionError(CgnError):
    """Maximum likelihood fitting was requested on a sample that is not acceptable"""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class DegeneratePriorError(CgnError):
    """The suggested prior needs a variance that is zero in the data"""

    def __init__(self, variable: str):
        super().__init__(f"empirical variance of variable '{variable}' is zero; "
                         f"the suggested prior is undefined")
        self.variable = variable


class SearchError(CgnError):
    """Wrapper structure search cannot start"""


class ExperimentError(CgnError):
    """The experiment protocol produced nothing usable"""


class SerializationError(CgnError):
    """Reading or writing a structure, hyperparameter set or report failed"""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
