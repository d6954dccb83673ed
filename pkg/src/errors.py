"""
Exception hierarchy and process exit codes for the benchmark tooling.
"""
from typing import Optional

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_UPSTREAM = 3


class RuleBenchError(Exception):
    """Base class for all errors raised by the benchmark."""
    exit_code = EXIT_RUNTIME


class UsageError(RuleBenchError):
    exit_code = EXIT_USAGE


class ConfigError(RuleBenchError):
    """Missing, malformed or out-of-range configuration."""
    exit_code = EXIT_USAGE


class RuleSetError(RuleBenchError, ValueError):
    """Rule identifiers or rule combinations outside the game's pools."""
    exit_code = EXIT_USAGE


class PreconditionError(RuleBenchError, ValueError):
    """An operation was called with inputs outside its contract."""


class GenerationError(RuleBenchError):
    """Episode generation gave up; carries the seed so the failure can be replayed."""

    def __init__(self, message: str, seed: Optional[object] = None):
        self.seed = seed
        if seed is not None:
            message = f"{message} (seed={seed})"
        super().__init__(message)


class UnsatisfiableScheduleError(GenerationError):
    pass


class SamplingExhaustedError(GenerationError):
    pass


class EpisodeValidationError(RuleBenchError):
    def __init__(self, message: str, violations=None):
        self.violations = list(violations or [])
        super().__init__(message)


class EndpointError(RuleBenchError):
    """Non-retryable endpoint failure (bad request, malformed payload)."""
    exit_code = EXIT_UPSTREAM

    def __init__(self, message: str, status: Optional[int] = None):
        self.status = status
        super().__init__(message)


class TransientEndpointError(EndpointError):
    """Rate limiting, server errors and network failures; retried with backoff."""


class AuthenticationError(EndpointError):
    """Credentials missing or rejected; the run aborts."""
