"""
Custom exceptions for the fedsgd_leakage package.

Every error raised by the simulator derives from FedsgdLeakageError so that
callers (the experiment runner and the CLI) can separate expected failures
from programming errors.
"""

from typing import List, Optional, Tuple


class FedsgdLeakageError(Exception):
    """Base exception for all fedsgd_leakage errors."""

    def __init__(self, message: str, error_code: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code

    def __str__(self):
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


class ValidationError(FedsgdLeakageError, ValueError):
    """Exception raised when an operation rejects its input."""
    pass


class ConfigurationError(FedsgdLeakageError):
    """Exception raised for invalid experiment or client configurations.

    The ``errors`` attribute lists every offending field as a
    ``(field, message)`` pair so the CLI can report them all at once.
    """

    def __init__(
        self,
        message: str,
        errors: Optional[List[Tuple[str, str]]] = None,
        error_code: Optional[int] = None
    ):
        super().__init__(message, error_code)
        self.errors = list(errors) if errors else []

    def __str__(self):
        base = super().__str__()
        if not self.errors:
            return base
        details = "; ".join(f"{field}: {msg}" for field, msg in self.errors)
        return f"{base} ({details})"


class DataFormatError(FedsgdLeakageError):
    """Exception raised for malformed CSV or raw tensor input."""
    pass


class ProtocolError(FedsgdLeakageError):
    """Exception raised when a client response does not match the model sent."""
    pass


class ReportIOError(FedsgdLeakageError):
    """Exception raised when a report cannot be written or read."""
    pass
