"""
核心功能包
"""

from .exceptions import (
    KahlerLabException,
    GeometryException,
    ProfileValidationException,
    PositivityException,
    SpectralException,
    FlowHaltException,
    CFLViolationException,
    ConfigurationException,
    FixtureFormatException,
    FunctionalException,
    InsufficientSamplesException,
    exception_to_exit_code,
)

from .logging import (
    setup_logging,
    get_logger,
    geometry_logger,
    positivity_logger,
    spectral_logger,
    flow_logger,
    functionals_logger,
    harness_logger,
)

from .concurrency import ParallelRunner, TaskOutcome

__all__ = [
    # Exceptions
    "KahlerLabException",
    "GeometryException",
    "ProfileValidationException",
    "PositivityException",
    "SpectralException",
    "FlowHaltException",
    "CFLViolationException",
    "ConfigurationException",
    "FixtureFormatException",
    "FunctionalException",
    "InsufficientSamplesException",
    "exception_to_exit_code",

    # Logging
    "setup_logging",
    "get_logger",
    "geometry_logger",
    "positivity_logger",
    "spectral_logger",
    "flow_logger",
    "functionals_logger",
    "harness_logger",

    # Concurrency
    "ParallelRunner",
    "TaskOutcome",
]
