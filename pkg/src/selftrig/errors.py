"""Exception types shared across the package.

The CLI maps these onto process exit codes, so raising the right class
matters: configuration problems must stay distinguishable from numerical
failures and from simulation blow-ups.
"""


class SelfTrigError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SelfTrigError):
    """Matrix or vector shapes are inconsistent with the operation."""


class NumericError(SelfTrigError):
    """A kernel computation failed: non-finite input, singular solve,
    matrix not symmetric positive definite, or residual out of tolerance."""


class DesignError(SelfTrigError):
    """The design problem itself is ill-posed, e.g. the closed loop is not
    Hurwitz or the certificate is invalid."""


class ConfigError(SelfTrigError):
    """A configuration file or parameter choice is invalid."""


class SimulationError(SelfTrigError):
    """The simulated state diverged or the integrator was misused."""
