"""Integrated density of states for A0(hD) + eps B(x, hD) via gauge transforms."""

from ._apgauge import (
    Config,
    ConfigError,
    ConvergenceError,
    DecompositionError,
    Error,
    InconsistencyError,
    NumericalError,
    QuadratureError,
    ResourceError,
    SmallDivisorError,
    UncertaintyError,
    UnsupportedError,
    command_names,
    load_config,
    loglog_slope,
    parse_config,
    run_command,
)

__all__ = [
    "Config",
    "ConfigError",
    "ConvergenceError",
    "DecompositionError",
    "Error",
    "InconsistencyError",
    "NumericalError",
    "QuadratureError",
    "ResourceError",
    "SmallDivisorError",
    "UncertaintyError",
    "UnsupportedError",
    "command_names",
    "load_config",
    "loglog_slope",
    "parse_config",
    "run_command",
]
