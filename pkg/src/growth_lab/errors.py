"""Exception taxonomy shared across the package.

The command line layer maps these onto exit codes: configuration problems
exit with 1, numeric failures with 3.  Constraint violations are reported
through :class:`growth_lab.constraints.ConstraintReport` rather than raised.
"""

from __future__ import annotations

__all__ = [
    "GrowthLabError",
    "StructuralError",
    "DomainError",
    "InvalidDrawdownError",
    "NumericError",
    "EstimateError",
    "ConfigError",
]


class GrowthLabError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(GrowthLabError):
    """An object is malformed: wrong shape, wrong ordering, mismatched grids."""


class DomainError(GrowthLabError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidDrawdownError(DomainError):
    """A drawdown function fails w(x) < x somewhere it was sampled."""


class NumericError(GrowthLabError):
    """A computation produced non-finite values or failed to converge."""


class EstimateError(GrowthLabError):
    """A Monte Carlo estimate is unusable for the requested operation."""


class ConfigError(GrowthLabError):
    """A scenario file or command line configuration is invalid."""
