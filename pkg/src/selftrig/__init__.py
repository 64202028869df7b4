"""Self-triggered implementation of linear state-feedback controllers.

The package covers the whole pipeline: offline design of a Lyapunov
certificate, the minimum inter-execution time and the performance gains of
the closed loop; precomputation of the quadratic-form tables the runtime
trigger evaluates; simulation of the disturbed sampled-data loop; and
verification of the logged run against the designed bounds.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DesignError,
    DimensionError,
    NumericError,
    SelfTrigError,
    SimulationError,
)

__all__ = [
    "ConfigError",
    "DesignError",
    "DimensionError",
    "NumericError",
    "SelfTrigError",
    "SimulationError",
    "__version__",
]
