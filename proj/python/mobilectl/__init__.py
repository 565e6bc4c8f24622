"""Bindings for the mobilectl C++ core."""

from ._core import (
    Config,
    Error,
    RunResult,
    eigen_oracle,
    grid_nodes,
    load_config,
    parse_config,
    run_experiment,
    solve_heat,
    sweep_windows,
)

EXIT_PASS = 0
EXIT_INTERNAL = 1
EXIT_CERTIFICATE_FAIL = 2
EXIT_INFEASIBLE = 3
EXIT_CONFIG = 4

__all__ = [
    "Config",
    "Error",
    "RunResult",
    "eigen_oracle",
    "grid_nodes",
    "load_config",
    "parse_config",
    "run_experiment",
    "solve_heat",
    "sweep_windows",
]
