"""Experiment driver: configuration, sweeps, and the five figure pipelines.

A sweep runs one pre-selected state against a list of post-selection polar
angles. For every LO phase in the configuration an ensemble of records is
generated once and reused across the whole sweep (post-selection only
reweights trajectories). Ensembles for different detector efficiencies share
noise streams, so efficiency comparisons are common-random-number paired.

Time units: epsilon_m = 1 fixes the unit system; t_m may be given absolutely
or as a multiple of 1/Gamma_d (resolved from the stationary rates).
"""

from __future__ import annotations

import json
import math
import re
import subprocess
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cavity import (
    CavityFieldTrajectory,
    ReadoutParams,
    field_trajectory,
    integrated_factors,
    steady_rates,
)
from .errors import (
    ConfigError,
    EmptyPostSelection,
    NoConvergence,
    OrthogonalPostSelection,
    SingularReconstruction,
)
from .states import BlochAngles, density_from_pure, fidelity, pure_from_angles
from .tomography import extract_weak_value, mc_pps, reconstruct, true_weak_value
from .trajectory import EnsembleResult, simulate_ensemble

MODES = ("stationary", "time_resolved")
EXTRACTIONS = ("linear", "iterative")
PPS_MODES = ("weighted", "bernoulli")

# the Fig. 4 "unknown" state: rho11 = 0.75 and rho12 = 0.34 + 0.265i
DEFAULT_THETA_I = math.pi / 3.0
DEFAULT_PHI_I = math.atan2(0.265, 0.34)

CSV_COLUMNS = (
    "theta_f",
    "re_wv_true",
    "im_wv_true",
    "re_wv_extracted",
    "im_wv_extracted",
    "re_stderr",
    "im_stderr",
    "fidelity",
    "acceptance",
    "extraction",
    "error",
)

TOMOGRAM_COLUMNS = CSV_COLUMNS + (
    "eta",
    "rho11_true",
    "re_rho12_true",
    "im_rho12_true",
    "rho11_est",
    "re_rho12_est",
    "im_rho12_est",
)


@dataclass(frozen=True)
class ExperimentConfig:
    readout: ReadoutParams
    psi_i: BlochAngles
    post_selection_sweep: tuple
    phases: tuple
    n_trajectories: int
    master_seed: int
    mode: str
    eta: float
    extraction: str
    pps_mode: str
    threads: int = 1
    post_selection_azimuth: float = 0.0
    t_m_unit: str = "inv_gamma_d"
    t_m_value: float = 0.5

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if not self.post_selection_sweep:
            raise ConfigError("post_selection_sweep must be nonempty")
        if len(self.phases) != 2:
            raise ConfigError("exactly two LO phases are required (information + mixed)")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.extraction not in EXTRACTIONS:
            raise ConfigError(f"extraction must be one of {EXTRACTIONS}")
        if self.pps_mode not in PPS_MODES:
            raise ConfigError(f"pps_mode must be one of {PPS_MODES}")
        if not (0.0 < self.eta <= 1.0):
            raise ConfigError(f"eta must lie in (0, 1], got {self.eta}")
        if self.t_m_unit not in ("absolute", "inv_gamma_d"):
            raise ConfigError(f"t_m_unit must be 'absolute' or 'inv_gamma_d'")


@dataclass
class SweepRow:
    theta_f: float
    re_wv_true: float = math.nan
    im_wv_true: float = math.nan
    re_wv_extracted: float = math.nan
    im_wv_extracted: float = math.nan
    re_stderr: float = math.nan
    im_stderr: float = math.nan
    fidelity: float = math.nan
    acceptance: float = math.nan
    extraction: str = "iterative"
    error: str = ""
    extra: dict = field(default_factory=dict)


_PI_PATTERN = re.compile(r"^\s*(-?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$", re.I)


def parse_angle(value) -> float:
    """Angles as numbers or strings like '0.65pi', 'pi/3', '2pi/3'."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    m = _PI_PATTERN.match(text)
    if m:
        coeff = float(m.group(1)) if m.group(1) not in ("", "-") else (
            -1.0 if m.group(1) == "-" else 1.0
        )
        div = float(m.group(2)) if m.group(2) else 1.0
        return coeff * math.pi / div
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse angle {value!r}") from None


def rotating_frame_omega_q(params: ReadoutParams) -> float:
    """Bare qubit frequency that zeroes the stationary Stark-shifted precession.

    Working in the frame rotating at the shifted qubit frequency
    (omega_q + chi + B_bar = 0) is the conventional experimental choice and
    the harness default; the bare frequency is arbitrary in this unit
    system. Configurations may still pin omega_q explicitly.
    """
    return -(params.chi + steady_rates(params).stark_b)


def _with_frame_default(readout: ReadoutParams) -> ReadoutParams:
    return readout.with_(omega_q=rotating_frame_omega_q(readout))


def default_config(**overrides) -> ExperimentConfig:
    """Reference defaults: resonant bad-cavity regime, kappa=8, chi=0.1, t_m = 0.5/Gamma_d."""
    readout = _with_frame_default(ReadoutParams(
        epsilon_m=1.0, kappa=8.0, chi=0.1, delta_r=0.0, omega_q=0.0,
        phi_lo=0.0, t_m=1.0, dt=None, eta=1.0,
    ))
    base = dict(
        readout=readout,
        psi_i=BlochAngles(DEFAULT_THETA_I, DEFAULT_PHI_I),
        post_selection_sweep=tuple((0.05 + 0.1 * k) * math.pi for k in range(10)),
        phases=(0.0, math.pi / 4.0),
        n_trajectories=100_000,
        master_seed=20170814,
        mode="stationary",
        eta=1.0,
        extraction="iterative",
        pps_mode="weighted",
        threads=1,
        t_m_unit="inv_gamma_d",
        t_m_value=0.5,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


_READOUT_KEYS = {
    "epsilon_m", "kappa", "chi", "delta_r", "omega_q", "phi_lo",
    "t_m", "t_m_unit", "dt", "eta", "inefficiency_model", "coherence_exponent",
}
_CONFIG_KEYS = {
    "readout", "psi_i", "post_selection_sweep", "phases", "n_trajectories",
    "master_seed", "mode", "eta", "extraction", "pps_mode", "threads",
    "post_selection_azimuth",
}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a configuration from parsed JSON. Unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = default_config()
    kwargs: dict = {}

    if "readout" in data:
        rd = dict(data["readout"])
        unknown = set(rd) - _READOUT_KEYS
        if unknown:
            raise ConfigError(f"unknown readout keys: {sorted(unknown)}")
        t_m_unit = rd.pop("t_m_unit", cfg.t_m_unit)
        t_m_value = float(rd.pop("t_m", cfg.t_m_value))
        if "phi_lo" in rd:
            rd["phi_lo"] = parse_angle(rd["phi_lo"])
        omega_q = rd.pop("omega_q", None)
        try:
            readout = replace(cfg.readout, **rd)
            if omega_q is None:  # absent or null: rotating-frame convention
                readout = _with_frame_default(readout)
            else:
                readout = readout.with_(omega_q=float(omega_q))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid readout parameters: {exc}") from None
        kwargs.update(readout=readout, t_m_unit=t_m_unit, t_m_value=t_m_value)

    if "psi_i" in data:
        ps = dict(data["psi_i"])
        unknown = set(ps) - {"theta", "phi"}
        if unknown:
            raise ConfigError(f"unknown psi_i keys: {sorted(unknown)}")
        kwargs["psi_i"] = BlochAngles(
            parse_angle(ps.get("theta", DEFAULT_THETA_I)),
            parse_angle(ps.get("phi", DEFAULT_PHI_I)),
        )

    if "post_selection_sweep" in data:
        kwargs["post_selection_sweep"] = tuple(parse_angle(a) for a in data["post_selection_sweep"])
    if "phases" in data:
        kwargs["phases"] = tuple(parse_angle(a) for a in data["phases"])
    for key in ("n_trajectories", "master_seed", "threads"):
        if key in data:
            kwargs[key] = int(data[key])
    for key in ("mode", "extraction", "pps_mode"):
        if key in data:
            kwargs[key] = str(data[key])
    if "eta" in data:
        kwargs["eta"] = float(data["eta"])
    if "post_selection_azimuth" in data:
        kwargs["post_selection_azimuth"] = parse_angle(data["post_selection_azimuth"])

    try:
        return replace(cfg, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return config_from_dict(data)


def config_as_dict(config: ExperimentConfig) -> dict:
    rd = config.readout
    return {
        "readout": {
            "epsilon_m": rd.epsilon_m, "kappa": rd.kappa, "chi": rd.chi,
            "delta_r": rd.delta_r, "omega_q": rd.omega_q, "phi_lo": rd.phi_lo,
            "t_m": config.t_m_value, "t_m_unit": config.t_m_unit, "dt": rd.dt,
            "eta": rd.eta, "inefficiency_model": rd.inefficiency_model,
            "coherence_exponent": rd.coherence_exponent,
        },
        "psi_i": {"theta": config.psi_i.theta, "phi": config.psi_i.phi},
        "post_selection_sweep": list(config.post_selection_sweep),
        "phases": list(config.phases),
        "n_trajectories": config.n_trajectories,
        "master_seed": config.master_seed,
        "mode": config.mode,
        "eta": config.eta,
        "extraction": config.extraction,
        "pps_mode": config.pps_mode,
        "threads": config.threads,
        "post_selection_azimuth": config.post_selection_azimuth,
    }


def resolve_t_m(config: ExperimentConfig, t_m_value: float | None = None) -> float:
    """Absolute measurement time, resolving 1/Gamma_d units if requested."""
    value = config.t_m_value if t_m_value is None else t_m_value
    if config.t_m_unit == "absolute":
        return value
    gamma_d = steady_rates(config.readout).gamma_d
    if gamma_d <= 0.0:
        raise ConfigError("stationary Gamma_d is not positive; cannot resolve t_m")
    return value / gamma_d


# ----------------------------------------------------------------------
# sweep machinery


@dataclass(frozen=True)
class PhaseEnsemble:
    """One LO phase: generated ensemble plus the matching factor sets."""

    phi_lo: float
    params: ReadoutParams
    traj: CavityFieldTrajectory
    ensemble: EnsembleResult
    factors: dict  # factors mode -> IntegratedFactors


def build_phase_ensembles(
    config: ExperimentConfig,
    t_m: float,
    eta: float,
    physics_mode: str,
    seed_key: tuple,
    factor_modes: tuple = None,
) -> list[PhaseEnsemble]:
    """Generate one ensemble per LO phase, sharing noise across eta values.

    seed_key must not encode eta: efficiency comparisons are meant to be
    common-random-number paired.
    """
    if factor_modes is None:
        factor_modes = (physics_mode,)
    psi_i = pure_from_angles(config.psi_i)
    out = []
    for idx, phi in enumerate(config.phases):
        params = config.readout.with_(phi_lo=phi, t_m=t_m, eta=eta)
        traj = field_trajectory(params, physics_mode)
        ens = simulate_ensemble(
            psi_i, traj, params, config.n_trajectories,
            config.master_seed, workers=config.threads,
            seed_key=(*seed_key, idx),
        )
        factors = {m: integrated_factors(traj, params, m) for m in factor_modes}
        out.append(PhaseEnsemble(phi, params, traj, ens, factors))
    return out


def _extract_with_stderr(pps_by_phase, factors_by_phase, linear):
    """Extraction plus delta-method standard errors.

    Errors are propagated by re-solving with each input average perturbed by
    its standard error (central differences through the full nonlinear
    inversion, so the denominator feedback is included).
    """
    base = extract_weak_value(pps_by_phase, factors_by_phase, linear=linear)
    phases = sorted(pps_by_phase)
    var_re = 0.0
    var_im = 0.0
    for p in phases:
        res = pps_by_phase[p]
        if res.stderr == 0.0:
            continue
        shifted = dict(pps_by_phase)
        shifted[p] = replace(res, average=res.average + res.stderr)
        hi = extract_weak_value(shifted, factors_by_phase, linear=linear)
        shifted[p] = replace(res, average=res.average - res.stderr)
        lo = extract_weak_value(shifted, factors_by_phase, linear=linear)
        var_re += (0.5 * (hi.re - lo.re)) ** 2
        var_im += (0.5 * (hi.im - lo.im)) ** 2
    return base, math.sqrt(var_re), math.sqrt(var_im)


def sweep_rows(
    config: ExperimentConfig,
    phase_ensembles: list,
    factors_mode: str,
    truth_phi1: float,
    extraction: str,
    theta_fs=None,
    with_tomogram: bool = False,
) -> list[SweepRow]:
    """Post-select, extract, and reconstruct at every sweep angle.

    truth_phi1 is the physically accumulated Stark phase of the generator;
    the extraction-side phi1 comes from the factors_mode factor set (the two
    differ exactly when the stationary factors are applied to time-resolved
    physics, which is the improper-analysis comparison).
    """
    psi_i = pure_from_angles(config.psi_i)
    rho_true = density_from_pure(psi_i)
    linear = extraction == "linear"
    if theta_fs is None:
        theta_fs = config.post_selection_sweep
    rows = []
    for theta_f in theta_fs:
        row = SweepRow(theta_f=theta_f, extraction=extraction)
        psi_f = pure_from_angles(BlochAngles(theta_f, config.post_selection_azimuth))
        try:
            truth = true_weak_value(psi_i, psi_f, truth_phi1)
            row.re_wv_true, row.im_wv_true = truth.re, truth.im
            pps_by_phase = {}
            factors_by_phase = {}
            for pe in phase_ensembles:
                pps_by_phase[pe.phi_lo] = mc_pps(pe.ensemble, psi_f, mode=config.pps_mode)
            for pe in phase_ensembles:
                factors_by_phase[pe.phi_lo] = pe.factors[factors_mode]
            wv, se_re, se_im = _extract_with_stderr(pps_by_phase, factors_by_phase, linear)
            row.re_wv_extracted, row.im_wv_extracted = wv.re, wv.im
            row.re_stderr, row.im_stderr = se_re, se_im
            row.acceptance = pps_by_phase[phase_ensembles[0].phi_lo].acceptance
            phi1_est = factors_by_phase[phase_ensembles[0].phi_lo].phi1
            psi_est = reconstruct(wv, psi_f, phi1_est)
            rho_est = density_from_pure(psi_est)
            row.fidelity = fidelity(rho_true, rho_est)
            if with_tomogram:
                row.extra = {
                    "eta": phase_ensembles[0].params.eta,
                    "rho11_true": rho_true.rho11,
                    "re_rho12_true": rho_true.rho12.real,
                    "im_rho12_true": rho_true.rho12.imag,
                    "rho11_est": rho_est.rho11,
                    "re_rho12_est": rho_est.rho12.real,
                    "im_rho12_est": rho_est.rho12.imag,
                }
        except (OrthogonalPostSelection, EmptyPostSelection, NoConvergence,
                SingularReconstruction) as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def _format(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path, rows: list, columns=CSV_COLUMNS) -> None:
    lines = [",".join(columns)]
    for row in rows:
        values = []
        for col in columns:
            if hasattr(row, col):
                values.append(_format(getattr(row, col)))
            else:
                values.append(_format(row.extra.get(col, math.nan)))
        lines.append(",".join(values))
    Path(path).write_text("\n".join(lines) + "\n")


def _git_version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, cwd=Path(__file__).parent, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return f"wvtomo-{__version__}"


def write_summary(out_dir, command: str, config: ExperimentConfig, outputs, wall_time: float,
                  n_ensembles: int) -> Path:
    n_total = n_ensembles * config.n_trajectories
    summary = {
        "command": command,
        "version": _git_version(),
        "master_seed": config.master_seed,
        "wall_time_s": round(wall_time, 3),
        "trajectories_total": n_total,
        "trajectories_per_s": round(n_total / wall_time, 1) if wall_time > 0 else None,
        "outputs": [str(p) for p in outputs],
        "config": config_as_dict(config),
    }
    path = Path(out_dir) / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    return path


# ----------------------------------------------------------------------
# figure pipelines


def run_fig1(config: ExperimentConfig, out_dir) -> list:
    """Weak vs finite measurement strength; linear and iterative extraction."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs = []
    n_ens = 0
    for tag, frac in (("tm005", 0.05), ("tm05", 0.5)):
        t_m = resolve_t_m(config, frac) if config.t_m_unit == "inv_gamma_d" else frac
        ensembles = build_phase_ensembles(
            config, t_m, config.eta, config.mode, seed_key=(1, round(frac * 100)),
        )
        n_ens += len(ensembles)
        truth_phi1 = ensembles[0].factors[config.mode].phi1
        rows = []
        for extraction in ("linear", "iterative"):
            rows.extend(
                sweep_rows(config, ensembles, config.mode, truth_phi1, extraction)
            )
        path = out_dir / f"fig1_{tag}.csv"
        write_csv(path, rows)
        outputs.append(path)
    outputs.append(
        write_summary(out_dir, "fig1", config, outputs, time.perf_counter() - t0, n_ens)
    )
    return outputs


def run_fig2_fig3(config: ExperimentConfig, out_dir) -> list:
    """Efficiency comparison (eta = 1.0 vs 0.8) with fidelity of the estimate."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    t_m = resolve_t_m(config)
    outputs = []
    n_ens = 0
    for eta in (1.0, 0.8):
        ensembles = build_phase_ensembles(
            config, t_m, eta, config.mode, seed_key=(2,),
        )
        n_ens += len(ensembles)
        truth_phi1 = ensembles[0].factors[config.mode].phi1
        rows = sweep_rows(config, ensembles, config.mode, truth_phi1, config.extraction)
        path = out_dir / f"fig2_eta{int(round(eta * 100)):03d}.csv"
        write_csv(path, rows)
        outputs.append(path)
    outputs.append(
        write_summary(out_dir, "fig2", config, outputs, time.perf_counter() - t0, n_ens)
    )
    return outputs


def run_fig4(config: ExperimentConfig, out_dir, theta_f: float = 0.65 * math.pi) -> list:
    """Single post-selection tomogram at both efficiencies."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    t_m = resolve_t_m(config)
    rows = []
    n_ens = 0
    for eta in (1.0, 0.8):
        ensembles = build_phase_ensembles(config, t_m, eta, config.mode, seed_key=(2,))
        n_ens += len(ensembles)
        truth_phi1 = ensembles[0].factors[config.mode].phi1
        rows.extend(
            sweep_rows(config, ensembles, config.mode, truth_phi1, config.extraction,
                       theta_fs=[theta_f], with_tomogram=True)
        )
    path = Path(out_dir) / "fig4.csv"
    write_csv(path, rows, columns=TOMOGRAM_COLUMNS)
    outputs = [path, write_summary(out_dir, "fig4", config, [path],
                                   time.perf_counter() - t0, n_ens)]
    return outputs


def run_fig5(config: ExperimentConfig, out_dir) -> list:
    """Beyond bad-cavity: proper vs improper factor sets on one ensemble.

    The generator always runs the time-resolved physics (cavity relaxing from
    vacuum); extraction is done twice, once with the matching time-resolved
    factors and once with the stationary factors.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    t_m = resolve_t_m(config)
    ensembles = build_phase_ensembles(
        config, t_m, config.eta, "time_resolved", seed_key=(5,),
        factor_modes=("time_resolved", "stationary"),
    )
    truth_phi1 = ensembles[0].factors["time_resolved"].phi1
    outputs = []
    for factors_mode in ("time_resolved", "stationary"):
        rows = sweep_rows(config, ensembles, factors_mode, truth_phi1, config.extraction)
        path = out_dir / f"fig5_{factors_mode}.csv"
        write_csv(path, rows)
        outputs.append(path)
    outputs.append(
        write_summary(out_dir, "fig5", config, outputs, time.perf_counter() - t0,
                      len(ensembles))
    )
    return outputs


def run_sweep(config: ExperimentConfig, out_dir, theta_fs=None) -> list:
    """Generic sweep with the configured mode/efficiency; tomogram columns included."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    t_m = resolve_t_m(config)
    factor_modes = (config.mode,)
    ensembles = build_phase_ensembles(
        config, t_m, config.eta, config.mode, seed_key=(2,), factor_modes=factor_modes,
    )
    truth_phi1 = ensembles[0].factors[config.mode].phi1
    rows = sweep_rows(config, ensembles, config.mode, truth_phi1, config.extraction,
                      theta_fs=theta_fs, with_tomogram=True)
    path = Path(out_dir) / "sweep.csv"
    write_csv(path, rows, columns=TOMOGRAM_COLUMNS)
    outputs = [path, write_summary(out_dir, "sweep", config, [path],
                                   time.perf_counter() - t0, len(ensembles))]
    return outputs
