"""Cavity coherent fields, measurement/backaction rates, and time-integrated factors.

The dispersive interaction chi*a^dag*a*sigma_z splits the driven cavity into
two qubit-conditioned coherent fields alpha1(t), alpha2(t). Everything the
qubit-side stochastic model needs is derived from them:

* beta = alpha2 - alpha1 sets the pointer separation;
* Gamma_ci = kappa |beta|^2 cos^2(phi - theta_beta) is the information-gain
  rate picked up by the homodyne current at LO phase phi;
* Gamma_ba = kappa |beta|^2 sin^2(phi - theta_beta) is the no-information
  backaction rate (pure phase kicks);
* Gamma_d = 4 chi Im(alpha1 alpha2*) is the ensemble decoherence rate;
* B = 2 chi Re(alpha1 alpha2*) is the ac-Stark shift, renormalizing the qubit
  frequency to Omega_tilde = omega_q + chi + B.

Two operating modes are supported. In ``stationary`` mode the fields are
frozen at their steady-state values (bad-cavity regime, where the transient
occupies a negligible fraction of the measurement window). In
``time_resolved`` mode the closed-form relaxation from vacuum is evaluated on
the grid, and all factors become time integrals; this is what makes the
scheme work when the cavity decay is not fast.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import StepTooCoarse

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

# kappa*dt above this no longer resolves the cavity relaxation
TRANSIENT_RESOLUTION_BOUND = 0.05

COHERENCE_EXPONENT_VARIANTS = ("derived", "gamma_d_full", "sqrt_gamma_d")
INEFFICIENCY_MODELS = ("eta_scaled", "one_minus_eta")


@dataclass(frozen=True)
class ReadoutParams:
    """Dispersive homodyne readout parameters.

    epsilon_m sets the unit scale of the problem; all rates and times are
    dimensionless in these units. ``phi_lo`` is the local-oscillator phase;
    on resonance the rates depend only on phi_lo - theta_beta mod pi, so
    phi_lo = 0 selects the information quadrature regardless of the sign
    convention in beta = alpha2 - alpha1.

    ``inefficiency_model`` selects how the detector efficiency enters the
    record and state update: ``eta_scaled`` (default) multiplies the detected
    rates by eta; ``one_minus_eta`` is the literal multiply-by-(1-eta)
    reading, kept only for comparison.
    """

    epsilon_m: float
    kappa: float
    chi: float
    delta_r: float = 0.0
    omega_q: float = 0.0
    phi_lo: float = 0.0
    t_m: float = 1.0
    dt: float | None = None
    eta: float = 1.0
    inefficiency_model: str = "eta_scaled"
    coherence_exponent: str = "derived"

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.t_m <= 0.0:
            raise ValueError(f"t_m must be positive, got {self.t_m}")
        if self.dt is not None and not (0.0 < self.dt <= self.t_m):
            raise ValueError(f"dt must lie in (0, t_m], got {self.dt}")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.inefficiency_model not in INEFFICIENCY_MODELS:
            raise ValueError(f"unknown inefficiency_model {self.inefficiency_model!r}")
        if self.coherence_exponent not in COHERENCE_EXPONENT_VARIANTS:
            raise ValueError(f"unknown coherence_exponent {self.coherence_exponent!r}")

    @property
    def detected_scale(self) -> float:
        """Factor multiplying Gamma_ci/Gamma_ba in the detected record model."""
        if self.inefficiency_model == "eta_scaled":
            return self.eta
        return 1.0 - self.eta

    def with_(self, **kwargs) -> "ReadoutParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class RateSet:
    """Instantaneous rates and frequency shifts for one field pair."""

    gamma_ci: float
    gamma_ba: float
    gamma_m: float
    gamma_d: float
    stark_b: float
    theta_beta: float
    omega_tilde: float


@dataclass(frozen=True)
class CavityFieldTrajectory:
    """Qubit-conditioned cavity fields on a uniform grid over [0, t_m].

    ``grid`` holds the n+1 node times k*dt; ``alpha1``/``alpha2`` the fields
    at the nodes. Treat instances as immutable after construction.
    """

    grid: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def t_m(self) -> float:
        return float(self.grid[-1])

    @property
    def n_steps(self) -> int:
        return len(self.grid) - 1


@dataclass(frozen=True)
class IntegratedFactors:
    """Time-integrated quantities entering the pre-/post-selected average.

    With the measured outcome fixed as x = (1/t_m) Int I(t) dt, the average
    over trajectories kept by post-selection onto psi_f is

        <x> = -(eps1 Re sw + eps2 Im sw) / (1 + g_factor (|sw|^2 - 1))

    where sw is the phase-modified weak value computed with phi1. eps1/eps2
    carry the detected-rate square roots, and the coherence suppression
    e^{-coherence_exponent} multiplies eps2 and sets g_factor.
    """

    eps1: float
    eps2: float
    g_factor: float
    phi1: float
    decoherence_integral: float
    measurement_integral: float
    coherence_exponent: float


def stationary_fields(params: ReadoutParams) -> tuple[complex, complex]:
    """Steady-state coherent fields (alpha1_bar, alpha2_bar).

    alpha_{1(2)} = -i eps_m / [-i(Delta_r +- chi) + kappa/2], upper sign for
    the |1>-conditioned field.
    """
    em, k2 = params.epsilon_m, 0.5 * params.kappa
    a1 = -1j * em / (-1j * (params.delta_r + params.chi) + k2)
    a2 = -1j * em / (-1j * (params.delta_r - params.chi) + k2)
    return a1, a2


def _relaxation_constants(params: ReadoutParams) -> tuple[complex, complex]:
    k2 = 0.5 * params.kappa
    z1 = -1j * (params.delta_r + params.chi) + k2
    z2 = -1j * (params.delta_r - params.chi) + k2
    return z1, z2


def make_grid(params: ReadoutParams, mode: str = "stationary") -> np.ndarray:
    """Uniform node grid on [0, t_m].

    If params.dt is None a default step is chosen: it keeps the per-step
    measurement kick weak (Gamma_m dt <= 0.01) and uses at least 200 steps;
    in time_resolved mode it additionally resolves the cavity relaxation
    (kappa dt <= 0.05). The step is always snapped to an integer divisor
    of t_m.
    """
    dt = params.dt
    if dt is None:
        gm = steady_rates(params).gamma_m
        dt = params.t_m / 200.0
        if gm > 0.0:
            dt = min(dt, 0.01 / gm)
        if mode == "time_resolved":
            dt = min(dt, TRANSIENT_RESOLUTION_BOUND / params.kappa)
    n = max(1, int(round(params.t_m / dt)))
    if n * dt < params.t_m - 1e-9 * params.t_m:
        n += 1
    return np.linspace(0.0, params.t_m, n + 1)


def transient_fields(params: ReadoutParams, grid: np.ndarray | None = None) -> CavityFieldTrajectory:
    """Fields relaxing from vacuum: alpha_j(t) = alpha_j_bar (1 - e^{-z_j t}).

    The closed-form solution of d(alpha_j)/dt = -i eps_m - z_j alpha_j is
    used instead of numerical stepping, so the trajectory is exact at the
    nodes. The grid must still resolve the relaxation (kappa dt <= 0.05)
    because downstream consumers integrate rates by the trapezoid rule.
    """
    if grid is None:
        grid = make_grid(params, mode="time_resolved")
    dt = float(grid[1] - grid[0])
    if params.kappa * dt > TRANSIENT_RESOLUTION_BOUND + 1e-12:
        raise StepTooCoarse(
            f"kappa*dt = {params.kappa * dt:.4g} exceeds {TRANSIENT_RESOLUTION_BOUND}"
        )
    a1_bar, a2_bar = stationary_fields(params)
    z1, z2 = _relaxation_constants(params)
    alpha1 = a1_bar * (1.0 - np.exp(-z1 * grid))
    alpha2 = a2_bar * (1.0 - np.exp(-z2 * grid))
    return CavityFieldTrajectory(grid, alpha1, alpha2)


def stationary_trajectory(params: ReadoutParams, grid: np.ndarray | None = None) -> CavityFieldTrajectory:
    """Constant-field trajectory holding the steady-state values everywhere."""
    if grid is None:
        grid = make_grid(params, mode="stationary")
    a1_bar, a2_bar = stationary_fields(params)
    ones = np.ones_like(grid, dtype=complex)
    return CavityFieldTrajectory(grid, a1_bar * ones, a2_bar * ones)


def field_trajectory(params: ReadoutParams, mode: str) -> CavityFieldTrajectory:
    if mode == "stationary":
        return stationary_trajectory(params)
    if mode == "time_resolved":
        return transient_fields(params)
    raise ValueError(f"unknown mode {mode!r}")


def rates_at(alpha1: complex, alpha2: complex, params: ReadoutParams) -> RateSet:
    """Instantaneous rates for one pair of conditioned fields."""
    beta = alpha2 - alpha1
    mag2 = abs(beta) ** 2
    theta_beta = cmath.phase(beta) if mag2 > 0.0 else 0.0
    cs = math.cos(params.phi_lo - theta_beta)
    gamma_ci = params.kappa * mag2 * cs * cs
    gamma_ba = params.kappa * mag2 * (1.0 - cs * cs)
    cross = alpha1 * alpha2.conjugate()
    gamma_d = 4.0 * params.chi * cross.imag
    stark_b = 2.0 * params.chi * cross.real
    return RateSet(
        gamma_ci=gamma_ci,
        gamma_ba=gamma_ba,
        gamma_m=gamma_ci + gamma_ba,
        gamma_d=gamma_d,
        stark_b=stark_b,
        theta_beta=theta_beta,
        omega_tilde=params.omega_q + params.chi + stark_b,
    )


def steady_rates(params: ReadoutParams) -> RateSet:
    a1, a2 = stationary_fields(params)
    return rates_at(a1, a2, params)


def _rate_arrays(traj: CavityFieldTrajectory, params: ReadoutParams):
    """Node-wise rate arrays (gamma_ci, gamma_ba, gamma_d, gamma_m, omega_tilde)."""
    beta = traj.alpha2 - traj.alpha1
    mag2 = np.abs(beta) ** 2
    theta_beta = np.where(mag2 > 0.0, np.angle(beta), 0.0)
    cs2 = np.cos(params.phi_lo - theta_beta) ** 2
    g_ci = params.kappa * mag2 * cs2
    g_ba = params.kappa * mag2 * (1.0 - cs2)
    cross = traj.alpha1 * np.conj(traj.alpha2)
    g_d = 4.0 * params.chi * cross.imag
    om = params.omega_q + params.chi + 2.0 * params.chi * cross.real
    return g_ci, g_ba, g_d, g_ci + g_ba, om


def _coherence_exponent(
    params: ReadoutParams, gd_int: float, gm_int: float, sqrt_gd_int: float
) -> float:
    """Total coherence-suppression exponent E (eps2 and g_factor use e^{-E}).

    The default ``derived`` variant is the exact result of integrating the
    Bayesian update over records for this package's record model:
    E = (s/2) Int Gamma_d + (1-eta) Int Gamma_m, with s the detected-rate
    scale. The other variants reproduce published closed forms verbatim for
    comparison; they do not match the Monte Carlo generator at finite
    measurement strength.
    """
    variant = params.coherence_exponent
    if variant == "derived":
        return 0.5 * params.detected_scale * gd_int + (1.0 - params.eta) * gm_int
    if variant == "gamma_d_full":
        return gd_int
    return sqrt_gd_int


def integrated_factors(
    traj: CavityFieldTrajectory | None,
    params: ReadoutParams,
    mode: str = "stationary",
) -> IntegratedFactors:
    """Factors for the closed-form PPS average, in either mode.

    ``stationary`` evaluates every rate on the steady-state fields and
    multiplies by t_m where an integral is called for; ``time_resolved``
    integrates the trapezoid rule over the trajectory nodes. Both modes share
    the outcome convention x = (1/t_m) Int I dt, so eps1/eps2 are the
    per-time averages of the detected-rate square roots. For constant rates
    the two modes coincide exactly.
    """
    s = params.detected_scale
    if mode == "stationary":
        r = steady_rates(params)
        tm = params.t_m if traj is None else traj.t_m
        sci_int = math.sqrt(s * r.gamma_ci) * tm
        sba_int = math.sqrt(s * r.gamma_ba) * tm
        gd_int = r.gamma_d * tm
        gm_int = r.gamma_m * tm
        sqrt_gd_int = math.sqrt(max(r.gamma_d, 0.0)) * tm
        phi1 = r.omega_tilde * tm
    elif mode == "time_resolved":
        if traj is None:
            raise ValueError("time_resolved mode requires a field trajectory")
        g_ci, g_ba, g_d, g_m, om = _rate_arrays(traj, params)
        t = traj.grid
        tm = traj.t_m
        sci_int = float(_trapezoid(np.sqrt(s * g_ci), t))
        sba_int = float(_trapezoid(np.sqrt(s * g_ba), t))
        gd_int = float(_trapezoid(g_d, t))
        gm_int = float(_trapezoid(g_m, t))
        sqrt_gd_int = float(_trapezoid(np.sqrt(np.maximum(g_d, 0.0)), t))
        phi1 = float(_trapezoid(om, t))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    expo = _coherence_exponent(params, gd_int, gm_int, sqrt_gd_int)
    damp = math.exp(-expo)
    # mathematically (1-e^-E)/2 < 1/2 always; keep strictly below 1/2 when
    # the damping underflows so the PPS denominator stays positive
    g_factor = min(0.5 * (1.0 - damp), math.nextafter(0.5, 0.0))
    return IntegratedFactors(
        eps1=sci_int / tm,
        eps2=sba_int / tm * damp,
        g_factor=g_factor,
        phi1=phi1,
        decoherence_integral=gd_int,
        measurement_integral=gm_int,
        coherence_exponent=expo,
    )
