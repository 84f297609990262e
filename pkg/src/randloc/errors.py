"""Exception types shared across the toolkit.

ConfigError, ConvergenceError and IO failures map onto distinct CLI exit
codes, so solver code must not collapse them into a generic RuntimeError.
"""

from __future__ import annotations


class RandlocError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(RandlocError):
    """Invalid or inconsistent run configuration (CLI exit code 1)."""


class ConvergenceError(RandlocError):
    """An iterative solver failed to reach its tolerance (CLI exit code 2)."""


class MassLossError(RandlocError):
    """Cumulative drift leakage past the grid edge exceeded the configured cap."""


class StepInstabilityError(RandlocError):
    """A transient step produced values outside the tolerated negative band."""


class QuadratureError(ConvergenceError):
    """Numerical quadrature failed to converge or behaved inconsistently."""
