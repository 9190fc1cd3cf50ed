#!/usr/bin/env python3

__all__ = [
    "FairRewireError",
    "ConfigError",
    "DataError",
    "ParseError",
    "AlgorithmError",
    "PlanningError",
    "DenseCapError",
    "SamplerError",
    "InsufficientDataError",
    "EXIT_OK",
    "EXIT_INTERNAL",
]

EXIT_OK = 0
EXIT_INTERNAL = 5


class FairRewireError(Exception):
    """Base class for every error the library raises on purpose."""

    category = "internal"
    exit_code = EXIT_INTERNAL


class ConfigError(FairRewireError, ValueError):
    """Invalid parameters or run configuration."""

    category = "config"
    exit_code = 2


class DataError(FairRewireError, ValueError):
    """Input graph, group or rewiring that violates a data invariant."""

    category = "data"
    exit_code = 3


class ParseError(DataError):
    """Malformed line in an input file."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class AlgorithmError(FairRewireError, RuntimeError):
    category = "algorithm"
    exit_code = 4


class PlanningError(AlgorithmError):
    """No legal rewiring is left; `steps` holds the rounds completed so far."""

    def __init__(self, message: str, steps: list | None = None):
        super().__init__(message)
        self.steps = list(steps or [])


class DenseCapError(AlgorithmError):
    pass


class SamplerError(AlgorithmError):
    pass


class InsufficientDataError(AlgorithmError):
    pass
