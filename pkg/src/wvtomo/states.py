"""Qubit state types and elementary state operations.

Conventions used throughout the package:

* basis states are labelled |1> and |2>, with sigma_z |1> = +|1> and
  sigma_z |2> = -|2> (so the homodyne current centers at -sqrt(Gamma_ci)
  when the qubit sits in |1>);
* a pure state is ``c1|1> + c2|2>``, canonically normalized with ``c1``
  real and nonnegative;
* Bloch angles parameterize pure states as
  ``cos(theta/2)|1> + sin(theta/2) e^{-i phi}|2>`` (note the minus sign in
  the azimuthal phase);
* a density matrix is stored as ``(rho11, rho12)`` with ``rho22 = 1 - rho11``
  and ``rho21 = conj(rho12)`` implied.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

POSITIVITY_TOL = 1e-12


def _require_finite(name: str, value: complex) -> None:
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class BlochAngles:
    """Polar/azimuthal angles of a pure qubit state.

    theta in [0, pi], phi in [0, 2*pi).
    """

    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi}")


@dataclass(frozen=True)
class PureQubitState:
    """Amplitude pair (c1, c2) with |c1|^2 + |c2|^2 = 1."""

    c1: complex
    c2: complex

    def __post_init__(self):
        _require_finite("c1", complex(self.c1))
        _require_finite("c2", complex(self.c2))
        norm_sq = abs(self.c1) ** 2 + abs(self.c2) ** 2
        if abs(norm_sq - 1.0) > 1e-12:
            raise ValueError(f"state not normalized: |c1|^2+|c2|^2 = {norm_sq!r}")

    @classmethod
    def from_unnormalized(cls, c1: complex, c2: complex) -> "PureQubitState":
        """Normalize (c1, c2) and rotate the global phase so c1 >= 0 is real.

        If c1 == 0 the phase is chosen so c2 is real and nonnegative.
        """
        norm = math.sqrt(abs(c1) ** 2 + abs(c2) ** 2)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        c1, c2 = c1 / norm, c2 / norm
        anchor = c1 if abs(c1) > 1e-15 else c2
        phase = anchor / abs(anchor)
        return cls(complex(c1 / phase), complex(c2 / phase))

    def sigma_z_expectation(self) -> float:
        return abs(self.c1) ** 2 - abs(self.c2) ** 2


@dataclass(frozen=True)
class DensityMatrix:
    """Qubit density matrix stored as (rho11, rho12).

    rho22 = 1 - rho11 and rho21 = conj(rho12) are implied, so trace one is
    enforced by construction. Positivity |rho12|^2 <= rho11*rho22 is checked
    with a small tolerance absorbing floating-point drift accumulated over
    long products of Bayesian factors.
    """

    rho11: float
    rho12: complex

    def __post_init__(self):
        if not math.isfinite(self.rho11):
            raise ValueError(f"rho11 must be finite, got {self.rho11!r}")
        _require_finite("rho12", complex(self.rho12))
        if not (-POSITIVITY_TOL <= self.rho11 <= 1.0 + POSITIVITY_TOL):
            raise ValueError(f"rho11 must lie in [0, 1], got {self.rho11!r}")
        if abs(self.rho12) ** 2 > self.rho11 * (1.0 - self.rho11) + POSITIVITY_TOL:
            raise ValueError(
                f"positivity violated: |rho12|^2 = {abs(self.rho12)**2!r} exceeds "
                f"rho11*rho22 = {self.rho11 * (1.0 - self.rho11)!r}"
            )

    @property
    def rho22(self) -> float:
        return 1.0 - self.rho11

    def purity(self) -> float:
        """Tr(rho^2) = rho11^2 + rho22^2 + 2|rho12|^2."""
        return self.rho11**2 + self.rho22**2 + 2.0 * abs(self.rho12) ** 2


def pure_from_angles(angles: BlochAngles) -> PureQubitState:
    """Pure state cos(theta/2)|1> + sin(theta/2) e^{-i phi}|2>."""
    half = 0.5 * angles.theta
    return PureQubitState(
        complex(math.cos(half)),
        math.sin(half) * cmath.exp(-1j * angles.phi),
    )


def angles_from_pure(psi: PureQubitState) -> BlochAngles:
    """Invert pure_from_angles. At the poles phi is undefined; 0 is returned."""
    theta = 2.0 * math.atan2(abs(psi.c2), abs(psi.c1))
    if abs(psi.c1) < 1e-15 or abs(psi.c2) < 1e-15:
        return BlochAngles(theta, 0.0)
    phi = -cmath.phase(psi.c2 / psi.c1)
    return BlochAngles(theta, phi % (2.0 * math.pi))


def density_from_pure(psi: PureQubitState) -> DensityMatrix:
    """Projector |psi><psi| in the (rho11, rho12) representation."""
    return DensityMatrix(abs(psi.c1) ** 2, psi.c1 * psi.c2.conjugate())


def fidelity(true_state: DensityMatrix, estimate: DensityMatrix) -> float:
    """Overlap fidelity F = Tr(true * estimate) for pure true_state.

    Expands to rho11*s11 + rho22*s22 + 2 Re(rho12 conj(s12)).
    """
    return (
        true_state.rho11 * estimate.rho11
        + true_state.rho22 * estimate.rho22
        + 2.0 * (true_state.rho12 * estimate.rho12.conjugate()).real
    )
