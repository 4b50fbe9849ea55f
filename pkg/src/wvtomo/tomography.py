"""Weak values, pre-/post-selected averages, and state reconstruction.

The quantity a post-selected homodyne experiment measures at finite strength
is the PPS average of the outcome x, which encodes the complex weak value

    sw = <psi_f| sigma_z |psi_i~> / <psi_f|psi_i~>,

where |psi_i~> carries the Stark-precession phase: c1 -> c1 e^{-i Phi1}.
The closed form (see cavity.IntegratedFactors) is

    <x> = -(eps1 Re sw + eps2 Im sw) / (1 + G (|sw|^2 - 1)).

Running the measurement at LO phase 0 puts eps2 = 0 (pure information
quadrature); a second phase (pi/4 by default, pi/2 for the noisy variant)
brings in Im sw. Inverting the pair of equations recovers sw; in the weak
limit G ~ 0 the inversion is linear, otherwise a fixed-point iteration on
the denominator converges in a few steps. Knowing sw and the post-selector
determines the unknown state up to the known phase Phi1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .cavity import IntegratedFactors
from .errors import (
    EmptyPostSelection,
    NoConvergence,
    OrthogonalPostSelection,
    SingularReconstruction,
)
from .states import PureQubitState
from .trajectory import EnsembleResult

ORTHOGONALITY_TOL = 1e-12


@dataclass(frozen=True)
class WeakValue:
    """Complex weak value of sigma_z."""

    value: complex

    @property
    def re(self) -> float:
        return self.value.real

    @property
    def im(self) -> float:
        return self.value.imag


@dataclass(frozen=True)
class PpsResult:
    """Post-selected ensemble average of the outcome x."""

    average: float
    stderr: float
    n_total: int
    acceptance: float

    def __post_init__(self):
        if self.stderr < 0.0:
            raise ValueError("stderr must be nonnegative")
        if not (0.0 <= self.acceptance <= 1.0 + 1e-12):
            raise ValueError(f"acceptance must lie in [0, 1], got {self.acceptance}")


def true_weak_value(psi_i: PureQubitState, psi_f: PureQubitState, phi1: float) -> WeakValue:
    """Weak value of sigma_z between psi_i (phase-modified by phi1) and psi_f."""
    c1t = psi_i.c1 * cmath.exp(-1j * phi1)
    u = psi_f.c1.conjugate() * c1t
    v = psi_f.c2.conjugate() * psi_i.c2
    overlap = u + v
    if abs(overlap) < ORTHOGONALITY_TOL:
        raise OrthogonalPostSelection(
            f"|<psi_f|psi_i~>| = {abs(overlap):.3e} below {ORTHOGONALITY_TOL}"
        )
    return WeakValue((u - v) / overlap)


def pps_from_weak_value(sigma_w: complex, factors: IntegratedFactors) -> float:
    """Closed-form PPS average for a given weak value."""
    mod2 = abs(sigma_w) ** 2
    denom = 1.0 + factors.g_factor * (mod2 - 1.0)
    return -(factors.eps1 * sigma_w.real + factors.eps2 * sigma_w.imag) / denom


def analytic_pps(
    psi_i: PureQubitState, psi_f: PureQubitState, factors: IntegratedFactors
) -> float:
    """Closed-form PPS average for the given pre-/post-selection pair."""
    return pps_from_weak_value(true_weak_value(psi_i, psi_f, factors.phi1).value, factors)


def _ensemble_arrays(ensemble):
    if isinstance(ensemble, EnsembleResult):
        return ensemble.x, ensemble.rho11, ensemble.rho12
    x, rho11, rho12 = [], [], []
    for record, dm in ensemble:
        x.append(record.x)
        rho11.append(dm.rho11)
        rho12.append(dm.rho12)
    if not x:
        raise EmptyPostSelection("empty ensemble")
    return np.asarray(x), np.asarray(rho11), np.asarray(rho12)


def mc_pps(
    ensemble,
    psi_f: PureQubitState,
    mode: str = "weighted",
    rng: np.random.Generator | None = None,
) -> PpsResult:
    """Monte Carlo PPS average over an ensemble.

    ``ensemble`` is an EnsembleResult or an iterable of
    (MeasurementRecord, DensityMatrix) pairs sharing one pre-selection.
    Weighted mode averages x with the post-selection probabilities
    w = <psi_f|rho~|psi_f> as weights (lower variance); bernoulli mode
    accepts each trajectory with probability w, mirroring laboratory
    post-selection, and needs an rng (seeded 0 if omitted).
    """
    x, rho11, rho12 = _ensemble_arrays(ensemble)
    b1, b2 = psi_f.c1, psi_f.c2
    w = (
        abs(b1) ** 2 * rho11
        + abs(b2) ** 2 * (1.0 - rho11)
        + 2.0 * np.real(b1.conjugate() * b2 * rho12)
    )
    w = np.clip(w, 0.0, 1.0)
    n = len(x)
    if mode == "weighted":
        total = float(np.sum(w))
        if total < 1e-12:
            raise EmptyPostSelection(f"total post-selection weight {total:.3e}")
        avg = float(np.sum(w * x) / total)
        stderr = float(np.sqrt(np.sum(w**2 * (x - avg) ** 2)) / total)
        return PpsResult(avg, stderr, n, total / n)
    if mode == "bernoulli":
        if rng is None:
            rng = np.random.default_rng(0)
        keep = rng.random(n) < w
        k = int(np.count_nonzero(keep))
        if k == 0:
            raise EmptyPostSelection("no trajectories accepted")
        accepted = x[keep]
        avg = float(np.mean(accepted))
        stderr = float(np.std(accepted, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        return PpsResult(avg, stderr, n, k / n)
    raise ValueError(f"unknown mode {mode!r}")


def _classify_phases(pps_by_phase, factors_by_phase):
    """Order the two supplied LO phases as (information, mixed/backaction)."""
    phases = sorted(pps_by_phase)
    if len(phases) != 2:
        raise ValueError(f"exactly two LO phases required, got {phases}")
    for p in phases:
        if p not in factors_by_phase:
            raise ValueError(f"no factors supplied for phase {p}")
    p0, p1 = phases
    if factors_by_phase[p0].eps1 == 0.0:
        raise ValueError(f"primary phase {p0} carries no information quadrature")
    return p0, p1


def _closed_form_candidates(x0, x1, f0, f1):
    """All exact solutions of the two-phase inversion.

    For fixed u = |sw|^2 the two averages are linear in (Re sw, Im sw), so
    sw(u) = p + q u; self-consistency u = |sw(u)|^2 is then a quadratic in u
    whose nonnegative roots enumerate every solution.
    """
    det = f0.eps1 * f1.eps2 - f0.eps2 * f1.eps1
    if det == 0.0:
        return []

    def solve_linear(r0, r1):
        return complex(
            (r0 * f1.eps2 - f0.eps2 * r1) / det,
            (f0.eps1 * r1 - r0 * f1.eps1) / det,
        )

    p = solve_linear(-x0 * (1.0 - f0.g_factor), -x1 * (1.0 - f1.g_factor))
    q = solve_linear(-x0 * f0.g_factor, -x1 * f1.g_factor)
    a = abs(q) ** 2
    b = 2.0 * (p.real * q.real + p.imag * q.imag) - 1.0
    c = abs(p) ** 2
    roots = []
    if a == 0.0:
        if b != 0.0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = math.sqrt(disc)
            roots.extend([(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)])
    return [p + q * u for u in roots if u >= 0.0]


def extract_weak_value(
    pps_by_phase: dict,
    factors_by_phase: dict,
    max_iter: int = 50,
    tol: float = 1e-10,
    linear: bool = False,
) -> WeakValue:
    """Invert PPS averages at two LO phases into the complex weak value.

    Starting from the weak-limit linear estimates, each iteration multiplies
    them by the current denominator 1 + G(|sw|^2 - 1) and, where the second
    phase mixes quadratures (pi/4), subtracts the known Re contribution. If
    the residual grows the step is halved, which guards the rare
    near-singular denominators. ``linear=True`` stops after the first pass
    (the weak-limit extractor).

    Strong post-selection can make the fixed point repelling; if the
    iteration fails, the exact closed-form root of the inversion system is
    used instead, and NoConvergence is raised only when no self-consistent
    solution exists at all.
    """
    p0, p1 = _classify_phases(pps_by_phase, factors_by_phase)
    x0 = pps_by_phase[p0].average if isinstance(pps_by_phase[p0], PpsResult) else pps_by_phase[p0]
    x1 = pps_by_phase[p1].average if isinstance(pps_by_phase[p1], PpsResult) else pps_by_phase[p1]
    f0, f1 = factors_by_phase[p0], factors_by_phase[p1]
    if f1.eps2 == 0.0:
        raise ValueError(f"secondary phase {p1} carries no backaction quadrature")

    def propose(sigma: complex, with_g: bool = True) -> complex:
        denom = 1.0 + f0.g_factor * (abs(sigma) ** 2 - 1.0) if with_g else 1.0
        re = (-x0 * denom - f0.eps2 * sigma.imag) / f0.eps1
        denom1 = (
            1.0 + f1.g_factor * (abs(complex(re, sigma.imag)) ** 2 - 1.0) if with_g else 1.0
        )
        im = (-x1 * denom1 - f1.eps1 * re) / f1.eps2
        return complex(re, im)

    sigma = propose(complex(-x0 / f0.eps1, 0.0), with_g=False)
    if linear:
        return WeakValue(sigma)
    prev_residual = math.inf
    for _ in range(max_iter):
        try:
            proposal = propose(sigma)
            residual = max(abs(proposal.real - sigma.real), abs(proposal.imag - sigma.imag))
            if residual >= prev_residual:
                proposal = sigma + 0.5 * (proposal - sigma)
                residual = max(
                    abs(proposal.real - sigma.real), abs(proposal.imag - sigma.imag)
                )
        except OverflowError:
            break
        sigma = proposal
        if not (math.isfinite(sigma.real) and math.isfinite(sigma.imag)):
            break
        if residual < tol:
            return WeakValue(sigma)
        prev_residual = residual

    def forward_residual(s: complex) -> float:
        return max(
            abs(pps_from_weak_value(s, f0) - x0),
            abs(pps_from_weak_value(s, f1) - x1),
        )

    # beyond the fold of the forward map both roots are exactly consistent;
    # keep the branch continuously connected to the weak-limit estimate
    init = complex(-x0 / f0.eps1, 0.0)
    scale = max(abs(x0), abs(x1), f0.eps1)
    candidates = [
        s for s in _closed_form_candidates(x0, x1, f0, f1)
        if forward_residual(s) <= 1e-9 * scale
    ]
    if candidates:
        return WeakValue(min(candidates, key=lambda s: abs(s - init)))
    raise NoConvergence(
        f"no convergence after {max_iter} iterations and no consistent closed-form "
        f"solution (residual {prev_residual:.3e})",
        last_iterate=sigma,
        residual=prev_residual,
    )


def reconstruct(sigma_w: WeakValue, psi_f: PureQubitState, phi1: float) -> PureQubitState:
    """Invert the weak value into the pre-selected state.

    c~ = [(1 - sw)/(1 + sw)] (b1/b2)* is the amplitude ratio of the
    phase-modified state; dividing out e^{i Phi1} gives c2/c1. sw = -1 means
    the state is |2> exactly; a post-selector with b2 = 0 carries no
    information about c2 and cannot be inverted.
    """
    if abs(psi_f.c2) < ORTHOGONALITY_TOL:
        raise SingularReconstruction("post-selector has no |2> component")
    sw = sigma_w.value if isinstance(sigma_w, WeakValue) else complex(sigma_w)
    if abs(1.0 + sw) < ORTHOGONALITY_TOL:
        return PureQubitState(0.0 + 0.0j, 1.0 + 0.0j)
    c_tilde = (1.0 - sw) / (1.0 + sw) * (psi_f.c1 / psi_f.c2).conjugate()
    ratio = c_tilde * cmath.exp(-1j * phi1)  # c2/c1
    return PureQubitState.from_unnormalized(1.0 + 0.0j, ratio)
