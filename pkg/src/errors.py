from typing import Any, Dict, Optional


class YMKError(Exception):
    """Base class for every failure the laboratory reports to the caller."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_payload(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.details}


class UsageError(YMKError):
    exit_code = 2


class ConfigError(YMKError):
    exit_code = 2


class DegenerateField(YMKError):
    exit_code = 2


class CheckFailure(YMKError):
    exit_code = 1


class NearReducible(YMKError):
    """lambda(A) fell below the configured floor; (d_A* d_A)^-1 is not trusted."""

    exit_code = 3


class NoContraction(YMKError):
    exit_code = 4


class SolverStagnation(YMKError):
    exit_code = 5


class NonConvergence(YMKError):
    exit_code = 5


class StepRejectionLimit(YMKError):
    exit_code = 5
