"""Exception types shared across the package."""

from __future__ import annotations


class WvtomoError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(WvtomoError):
    """Invalid configuration file or CLI arguments."""


class StepTooCoarse(WvtomoError):
    """Time step too large to resolve the dynamics it is asked to resolve.

    Raised when kappa*dt exceeds the transient-resolution bound, or when the
    per-step measurement kick Gamma_m*dt exceeds the weak-update bound.
    """


class DegenerateLikelihood(WvtomoError):
    """Record likelihood underflowed to an unusable value (NaN/zero norm)."""


class OrthogonalPostSelection(WvtomoError):
    """Post-selection state orthogonal to the (phase-modified) initial state."""


class EmptyPostSelection(WvtomoError):
    """No ensemble weight survived post-selection."""


class NoConvergence(WvtomoError):
    """Iterative weak-value extraction did not converge.

    Attributes
    ----------
    last_iterate : complex
        The final iterate when iteration stopped.
    residual : float
        Max absolute change between the last two iterates.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class SingularReconstruction(WvtomoError):
    """State reconstruction is singular for the given post-selector."""
