"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver and policy code
should raise the most specific type available rather than a bare
ValueError when the failure is one a caller may want to branch on.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Bad user input: rejected parameter, malformed config file, unknown key."""


class DegenerateModeError(RuntimeError):
    """An operation that needs a nontrivial free boundary was asked to run in
    the degenerate regime (zero payoff rate below the kink ray, identically
    zero stopping value).  In that regime the optimal barrier is the kink ray
    itself and the ray policy should be used instead."""


class NonConvergenceError(RuntimeError):
    """Iterative solver failed to reach its tolerance within the sweep budget."""

    def __init__(self, message: str, last_change: float, last_residual: float, iterations: int):
        super().__init__(message)
        self.last_change = last_change
        self.last_residual = last_residual
        self.iterations = iterations


class MonotoneSchemeError(ConfigError):
    """Covariance/mesh combination violates the sign conditions that keep the
    nine-point stencil monotone (diagonal coefficients would go negative)."""
