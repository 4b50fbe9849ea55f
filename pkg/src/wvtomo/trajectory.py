"""Stochastic homodyne records and the record-conditioned Bayesian update.

The record model, discretized on the trajectory grid with step dt, is

    I_k = -a_k <sigma_z>_k + xi_k,      xi_k ~ Normal(0, 1/dt),

where a_k is the detected information-gain amplitude sqrt(s*Gamma_ci)
averaged over the step (s = detected-rate scale, eta by default) and
<sigma_z>_k is the expectation in the record-conditioned state before the
step. Normal(0, 1/dt) is the unique noise discretization for which the
integrated outcome x = (1/t_m) Int I dt has variance 1/t_m.

Conditioning is the quantum Bayesian rule. Diagonals pick up the likelihood
ratio P1/P2 = exp(-2 a_k I_k dt) per step; the off-diagonal element is
multiplied by sqrt(P1 P2)/Norm, by the purity factor D, and by the phase
exp(-i(Phi1 + Phi2)) with Phi1 the accumulated Stark-shifted precession and
Phi2 = -Int sqrt(s*Gamma_ba) I dt the realistic-backaction phase. All
likelihood bookkeeping is done in log space; the only running per-trajectory
quantities are the record sum, the log-likelihood ratio, and the Phi2 sum,
which is what makes the ensemble engine a handful of vector operations per
step.

Detector inefficiency: the record and all likelihoods use the detected rates
s*Gamma_ci, s*Gamma_ba, while the estimator additionally suppresses the
off-diagonal element by exp(-(1-eta) Int Gamma_m dt) (apply_inefficiency).
The closed-form factors in cavity.integrated_factors are derived for exactly
this composition, so simulated and analytic averages agree by construction.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .cavity import CavityFieldTrajectory, ReadoutParams, _rate_arrays, integrated_factors
from .errors import DegenerateLikelihood, StepTooCoarse
from .states import DensityMatrix, PureQubitState, density_from_pure

# per-step measurement kick Gamma_m*dt above this invalidates the weak update
WEAK_KICK_BOUND = 0.05

# trajectories per RNG chunk; fixed so ensembles are bit-identical for any
# worker count (chunk c draws from SeedSequence(master_seed, spawn_key=(c,)))
CHUNK_SIZE = 8192

_RECORD_HEADER = struct.Struct("<IdQ")


@dataclass(frozen=True)
class MeasurementRecord:
    """One discretized homodyne record.

    samples[k] is the current over [k*dt, (k+1)*dt); x is the time-averaged
    outcome (1/t_m) sum(samples)*dt.
    """

    samples: np.ndarray
    dt: float
    x: float
    seed: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("record samples must be finite")
        if abs(self.x - self._recompute_x()) > 1e-12 * max(1.0, abs(self.x)):
            raise ValueError("stored x inconsistent with samples")

    def _recompute_x(self) -> float:
        return float(np.sum(self.samples) * self.dt / (len(self.samples) * self.dt))

    @classmethod
    def from_samples(cls, samples: np.ndarray, dt: float, seed: int = 0) -> "MeasurementRecord":
        samples = np.asarray(samples, dtype=float)
        x = float(np.sum(samples) / len(samples))
        return cls(samples, float(dt), x, int(seed))

    @property
    def t_m(self) -> float:
        return len(self.samples) * self.dt


@dataclass(frozen=True)
class BayesianFactors:
    """Likelihood functionals and coherence corrections for one record.

    Likelihoods are stored as logs; the p1/p2 properties exponentiate and can
    underflow to 0.0 for long records (use the log fields for arithmetic).
    """

    log_p1: float
    log_p2: float
    d_factor: float
    phi2: float

    @property
    def p1(self) -> float:
        return math.exp(self.log_p1)

    @property
    def p2(self) -> float:
        return math.exp(self.log_p2)


class _StepModel:
    """Per-step detected amplitudes and deterministic factors for one grid."""

    def __init__(self, traj: CavityFieldTrajectory, params: ReadoutParams):
        g_ci, g_ba, g_d, g_m, om = _rate_arrays(traj, params)
        dt = traj.dt
        if np.max(g_m) * dt > WEAK_KICK_BOUND + 1e-12:
            raise StepTooCoarse(
                f"Gamma_m*dt = {np.max(g_m) * dt:.4g} exceeds {WEAK_KICK_BOUND}; "
                "refine dt"
            )
        s = params.detected_scale
        sq_ci = np.sqrt(s * g_ci)
        sq_ba = np.sqrt(s * g_ba)
        self.dt = dt
        self.t_m = traj.t_m
        self.n_steps = traj.n_steps
        self.eta = params.eta
        self.a = 0.5 * (sq_ci[:-1] + sq_ci[1:])
        self.b = 0.5 * (sq_ba[:-1] + sq_ba[1:])
        gd_step = 0.5 * (g_d[:-1] + g_d[1:])
        om_step = 0.5 * (om[:-1] + om[1:])
        gm_step = 0.5 * (g_m[:-1] + g_m[1:])
        # detected purity exponent; the (a^2+b^2) term cancels the Gaussian
        # overlap of the likelihoods exactly, which is what keeps the
        # closed-form factors and the simulated ensemble consistent
        self.log_d = float(-np.sum(s * gd_step - (self.a**2 + self.b**2)) * dt / 2.0)
        self.phi1 = float(np.sum(om_step) * dt)
        self.gamma_m_integral = float(np.sum(gm_step) * dt)

    def check_record(self, record: MeasurementRecord) -> None:
        if len(record.samples) != self.n_steps:
            raise ValueError(
                f"record has {len(record.samples)} samples, grid has {self.n_steps} steps"
            )
        if abs(record.dt - self.dt) > 1e-12 * self.dt:
            raise ValueError("record dt does not match trajectory grid")


def _log_expit(r):
    """log(1/(1+e^-r)) elementwise, stable for large |r|."""
    return -np.logaddexp(0.0, -r)


def _posterior(rho0: DensityMatrix, lam, phi2_sum, model: _StepModel):
    """Assemble the conditioned state from accumulated record sums.

    lam = sum 2 a_k I_k dt is the log likelihood ratio log(P1/P2);
    phi2_sum = sum b_k I_k (times dt gives -Phi2).
    """
    r11_0, r22_0 = rho0.rho11, rho0.rho22
    l11 = math.log(r11_0) if r11_0 > 0.0 else -math.inf
    l22 = math.log(r22_0) if r22_0 > 0.0 else -math.inf
    with np.errstate(invalid="ignore"):
        log_norm = np.logaddexp(l11, l22 + lam)
    if np.any(np.isnan(log_norm)):
        raise DegenerateLikelihood("record norm is NaN; record inconsistent with state")
    rho11 = np.exp(l11 - log_norm)
    if rho0.rho12 == 0:
        rho12 = np.zeros_like(np.asarray(lam, dtype=float), dtype=complex)
    else:
        log_mag = 0.5 * lam - log_norm + model.log_d
        phase = -(model.phi1 - phi2_sum * model.dt)  # -(Phi1 + Phi2)
        rho12 = rho0.rho12 * np.exp(log_mag + 1j * phase)
    return rho11, rho12


def bayesian_update(
    rho0: DensityMatrix,
    record: MeasurementRecord,
    traj: CavityFieldTrajectory,
    params: ReadoutParams,
) -> DensityMatrix:
    """Condition rho0 on a full record (one-shot functional update).

    Splitting the record at any interior grid point and updating twice gives
    the same state, because every factor is a product over steps.
    Note this is the bare Bayesian rule; for eta < 1 the tomography estimator
    composes it with apply_inefficiency.
    """
    model = _StepModel(traj, params)
    model.check_record(record)
    I = record.samples
    lam = float(np.sum(2.0 * model.a * I) * model.dt)
    phi2_sum = float(np.sum(model.b * I))
    rho11, rho12 = _posterior(rho0, lam, phi2_sum, model)
    return DensityMatrix(float(rho11), complex(rho12))


def record_factors(
    record: MeasurementRecord, traj: CavityFieldTrajectory, params: ReadoutParams
) -> BayesianFactors:
    """Likelihood functionals and correction factors for one record."""
    model = _StepModel(traj, params)
    model.check_record(record)
    I = record.samples
    log_p1 = float(-0.5 * model.dt * np.sum((I + model.a) ** 2))
    log_p2 = float(-0.5 * model.dt * np.sum((I - model.a) ** 2))
    phi2 = float(-np.sum(model.b * I) * model.dt)
    return BayesianFactors(log_p1, log_p2, math.exp(model.log_d), phi2)


def apply_inefficiency(
    rho: DensityMatrix,
    params: ReadoutParams,
    gamma_m_integral: float | None = None,
) -> DensityMatrix:
    """Suppress the off-diagonal element by exp(-(1-eta) Int Gamma_m dt).

    If the integral is not supplied it is evaluated on the stationary fields,
    Gamma_m * t_m.
    """
    if params.eta == 1.0:
        return rho
    if gamma_m_integral is None:
        gamma_m_integral = integrated_factors(None, params, "stationary").measurement_integral
    return DensityMatrix(rho.rho11, rho.rho12 * math.exp(-(1.0 - params.eta) * gamma_m_integral))


def _generate_chunk(model: _StepModel, rho0: DensityMatrix, xi: np.ndarray, keep_records: bool):
    """Advance a block of trajectories; xi has shape (n, n_steps)."""
    n = xi.shape[0]
    dt = model.dt
    lam = np.zeros(n)
    sum_i = np.zeros(n)
    phi2_sum = np.zeros(n)
    records = np.empty_like(xi) if keep_records else None
    eigenstate = rho0.rho11 in (0.0, 1.0)
    if eigenstate:
        m_fixed = 1.0 if rho0.rho11 == 1.0 else -1.0
    else:
        r0 = math.log(rho0.rho11 / rho0.rho22)
    for k in range(model.n_steps):
        m = m_fixed if eigenstate else np.tanh(0.5 * (r0 - lam))
        i_k = -model.a[k] * m + xi[:, k]
        sum_i += i_k
        if model.b[k] != 0.0:
            phi2_sum += model.b[k] * i_k
        lam += (2.0 * dt * model.a[k]) * i_k
        if keep_records:
            records[:, k] = i_k
    x = sum_i * dt / model.t_m
    rho11, rho12 = _posterior(rho0, lam, phi2_sum, model)
    return x, rho11, rho12, records


@dataclass(frozen=True)
class EnsembleResult:
    """Vectorized ensemble: outcome and estimator state per trajectory.

    rho12 already includes the estimator-side inefficiency factor, so
    post-selection weights can be formed directly.
    """

    x: np.ndarray
    rho11: np.ndarray
    rho12: np.ndarray
    master_seed: int

    @property
    def n_trajectories(self) -> int:
        return len(self.x)


def _chunk_rng(master_seed: int, seed_key: tuple, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(*seed_key, chunk_index))
    )


def _ensemble_chunk_task(args):
    model, rho0, master_seed, seed_key, chunk_index, size = args
    rng = _chunk_rng(master_seed, seed_key, chunk_index)
    xi = rng.standard_normal((size, model.n_steps)) / math.sqrt(model.dt)
    x, rho11, rho12, _ = _generate_chunk(model, rho0, xi, keep_records=False)
    return chunk_index, x, rho11, rho12


def simulate_record(
    psi_i: PureQubitState,
    traj: CavityFieldTrajectory,
    params: ReadoutParams,
    seed: int = 0,
    rng=None,
) -> tuple[MeasurementRecord, DensityMatrix]:
    """Generate one record and the conditioned post-measurement state.

    ``rng`` overrides the seed-derived generator; anything exposing
    standard_normal(shape) works, which is the hook tests use to suppress
    the noise entirely.
    """
    model = _StepModel(traj, params)
    rho0 = density_from_pure(psi_i)
    if rng is None:
        rng = np.random.default_rng(seed)
    xi = np.asarray(rng.standard_normal((1, model.n_steps)), dtype=float) / math.sqrt(model.dt)
    x, rho11, rho12, records = _generate_chunk(model, rho0, xi, keep_records=True)
    record = MeasurementRecord(records[0], model.dt, float(x[0]), int(seed))
    dm = DensityMatrix(float(rho11[0]), complex(rho12[0]))
    return record, apply_inefficiency(dm, params, model.gamma_m_integral)


def simulate_ensemble(
    psi_i: PureQubitState,
    traj: CavityFieldTrajectory,
    params: ReadoutParams,
    n_trajectories: int,
    master_seed: int,
    workers: int = 1,
    seed_key: tuple = (),
) -> EnsembleResult:
    """Generate an ensemble of records, returning (x, conditioned state) rows.

    Trajectory noise is drawn in fixed chunks of CHUNK_SIZE; chunk c uses the
    stream SeedSequence(master_seed, spawn_key=(*seed_key, c)) and results
    are assembled in chunk order, so the output is bit-identical for any
    worker count. seed_key separates ensembles sharing one master seed;
    leaving the detector efficiency out of it gives common-random-number
    pairing across eta values. Workers are separate processes; each chunk is
    independent work.
    """
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    model = _StepModel(traj, params)
    rho0 = density_from_pure(psi_i)
    sizes = [CHUNK_SIZE] * (n_trajectories // CHUNK_SIZE)
    if n_trajectories % CHUNK_SIZE:
        sizes.append(n_trajectories % CHUNK_SIZE)
    tasks = [(model, rho0, master_seed, seed_key, c, size) for c, size in enumerate(sizes)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = sorted(pool.map(_ensemble_chunk_task, tasks), key=lambda p: p[0])
    else:
        parts = [_ensemble_chunk_task(t) for t in tasks]
    x = np.concatenate([p[1] for p in parts])
    rho11 = np.concatenate([p[2] for p in parts])
    rho12 = np.concatenate([p[3] for p in parts])
    if params.eta < 1.0:
        rho12 = rho12 * math.exp(-(1.0 - params.eta) * model.gamma_m_integral)
    return EnsembleResult(x, rho11, rho12, master_seed)


def write_record(record: MeasurementRecord, path) -> None:
    """Dump a record: header {n: u32le, dt: f64le, seed: u64le}, then f64le samples."""
    with open(path, "wb") as fh:
        fh.write(_RECORD_HEADER.pack(len(record.samples), record.dt, record.seed))
        fh.write(record.samples.astype("<f8").tobytes())


def read_record(path) -> MeasurementRecord:
    with open(path, "rb") as fh:
        n, dt, seed = _RECORD_HEADER.unpack(fh.read(_RECORD_HEADER.size))
        samples = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    if len(samples) != n:
        raise ValueError(f"truncated record file: expected {n} samples, got {len(samples)}")
    return MeasurementRecord.from_samples(samples, dt, seed)
