"""Built-in example checks, printed as a pass/fail table.

These are quick sanity checks of the worked examples (exact identities,
closed forms, and a couple of small Monte Carlo consistency runs); the full
statistical validation lives in the pytest acceptance suite.
"""

from __future__ import annotations

import math

import numpy as np

from .cavity import ReadoutParams, integrated_factors, stationary_fields, stationary_trajectory, steady_rates
from .harness import build_phase_ensembles, default_config, resolve_t_m
from .states import BlochAngles, DensityMatrix, density_from_pure, fidelity, pure_from_angles
from .tomography import analytic_pps, extract_weak_value, mc_pps, reconstruct, true_weak_value
from .trajectory import apply_inefficiency, simulate_ensemble


def _reference_params(**kw) -> ReadoutParams:
    base = dict(epsilon_m=1.0, kappa=8.0, chi=0.1, delta_r=0.0, t_m=400.0, dt=2.0)
    base.update(kw)
    return ReadoutParams(**base)


def check_stationary_fields():
    p = _reference_params()
    a1, a2 = stationary_fields(p)
    expect1 = -1j / (4.0 - 0.1j)
    assert abs(a1 - expect1) < 1e-15 and abs(a1 - (0.00625 - 0.24984j)) < 1e-4
    assert abs(a2 - (-0.00625 - 0.24984j)) < 1e-4
    p2 = _reference_params(kappa=2.0)
    b1, _ = stationary_fields(p2)
    assert abs(abs(b1) ** 2 - 0.9901) < 1e-4  # ~1 photon in steady state


def check_rate_identities():
    r = steady_rates(_reference_params())
    assert r.gamma_m == r.gamma_ci + r.gamma_ba
    assert abs(r.gamma_m - r.gamma_d) < 1e-10  # quantum limited on resonance
    assert abs(r.gamma_ci - 1.2485e-3) < 1e-6
    assert abs(r.stark_b - 1.2476e-2) < 1e-5


def check_g_factor_closed_form():
    # the published full-exponent variant at Gamma_d*t_m = 0.5
    r = steady_rates(_reference_params())
    p = _reference_params(t_m=0.5 / r.gamma_d, dt=0.5 / r.gamma_d / 200,
                      coherence_exponent="gamma_d_full")
    f = integrated_factors(None, p, "stationary")
    assert abs(f.g_factor - (1.0 - math.exp(-0.5)) / 2.0) < 1e-12
    assert abs(f.g_factor - 0.19673) < 1e-5


def check_true_weak_value():
    psi_i = pure_from_angles(BlochAngles(math.pi / 3, 0.0))
    psi_f = pure_from_angles(BlochAngles(math.pi / 2, 0.0))
    wv = true_weak_value(psi_i, psi_f, 0.0)
    expect = (math.cos(math.pi / 6) - math.sin(math.pi / 6)) / (
        math.cos(math.pi / 6) + math.sin(math.pi / 6)
    )
    assert abs(wv.value - expect) < 1e-12 and abs(expect - 0.26795) < 1e-5


def check_fig4_state():
    psi = pure_from_angles(BlochAngles(math.pi / 3, math.atan2(0.265, 0.34)))
    rho = density_from_pure(psi)
    assert abs(rho.rho11 - 0.75) < 1e-12
    assert abs(rho.rho12 - (0.34 + 0.265j)) < 2.5e-3
    estimate = DensityMatrix(0.75095, 0.33218 + 0.27691j)
    assert fidelity(rho, estimate) > 0.999


def check_extract_round_trip():
    psi_i = pure_from_angles(BlochAngles(math.pi / 3, 0.662))
    psi_f = pure_from_angles(BlochAngles(0.65 * math.pi, 0.0))
    r = steady_rates(_reference_params())
    t_m = 0.5 / r.gamma_d
    pps, fac = {}, {}
    for phi in (0.0, math.pi / 4):
        p = _reference_params(phi_lo=phi, t_m=t_m, dt=t_m / 200)
        fac[phi] = integrated_factors(None, p, "stationary")
        pps[phi] = analytic_pps(psi_i, psi_f, fac[phi])
    wv = extract_weak_value(pps, fac)
    truth = true_weak_value(psi_i, psi_f, fac[0.0].phi1)
    assert abs(wv.value - truth.value) < 1e-9
    back = reconstruct(wv, psi_f, fac[0.0].phi1)
    assert abs(back.c1 - psi_i.c1) < 1e-8 and abs(back.c2 - psi_i.c2) < 1e-8


def check_inefficiency_factor():
    r = steady_rates(_reference_params())
    t_m = 0.5 / r.gamma_m
    p = _reference_params(t_m=t_m, dt=t_m / 100, eta=0.8)
    rho = apply_inefficiency(DensityMatrix(0.5, 0.5 + 0.0j), p)
    assert abs(abs(rho.rho12) / 0.5 - math.exp(-0.1)) < 1e-12


def check_martingale_mc():
    cfg = default_config(n_trajectories=20_000)
    t_m = resolve_t_m(cfg)
    p = cfg.readout.with_(t_m=t_m)
    psi_i = pure_from_angles(cfg.psi_i)
    traj = stationary_trajectory(p)
    ens = simulate_ensemble(psi_i, traj, p, cfg.n_trajectories, 4242)
    se = np.std(ens.rho11, ddof=1) / math.sqrt(len(ens.rho11))
    assert abs(np.mean(ens.rho11) - 0.75) < 4.0 * se
    # ensemble-mean current tracks -<sigma_z>/sqrt: <sz> = 0.5
    r = steady_rates(p)
    se_x = np.std(ens.x, ddof=1) / math.sqrt(len(ens.x))
    assert abs(np.mean(ens.x) + 0.5 * math.sqrt(r.gamma_ci)) < 4.0 * se_x


def check_mc_vs_analytic():
    cfg = default_config(n_trajectories=20_000)
    t_m = resolve_t_m(cfg)
    ensembles = build_phase_ensembles(cfg, t_m, 1.0, "stationary", seed_key=(99,))
    psi_i = pure_from_angles(cfg.psi_i)
    psi_f = pure_from_angles(BlochAngles(0.45 * math.pi, 0.0))
    for pe in ensembles:
        res = mc_pps(pe.ensemble, psi_f)
        ref = analytic_pps(psi_i, psi_f, pe.factors["stationary"])
        assert abs(res.average - ref) < 4.0 * res.stderr, (res.average, ref, res.stderr)


FAST_CHECKS = [
    ("stationary fields (closed-form oracle + photon number)", check_stationary_fields),
    ("rate identities (Gm=Gci+Gba, Gm=Gd on resonance)", check_rate_identities),
    ("g-factor closed form (full-exponent variant)", check_g_factor_closed_form),
    ("true weak value example", check_true_weak_value),
    ("tomogram state and fidelity example", check_fig4_state),
    ("extract/reconstruct round trip on analytic PPS", check_extract_round_trip),
    ("inefficiency off-diagonal factor", check_inefficiency_factor),
]

MC_CHECKS = [
    ("martingale + ensemble current mean (Monte Carlo)", check_martingale_mc),
    ("PPS average: Monte Carlo vs closed form", check_mc_vs_analytic),
]


def run_selftest(fast: bool = False) -> bool:
    checks = FAST_CHECKS + ([] if fast else MC_CHECKS)
    width = max(len(name) for name, _ in checks)
    failures = 0
    for name, fn in checks:
        try:
            fn()
            status = "PASS"
        except AssertionError as exc:
            status = f"FAIL ({exc})" if str(exc) else "FAIL"
            failures += 1
        except Exception as exc:  # noqa: BLE001 - report, don't crash the table
            status = f"ERROR ({type(exc).__name__}: {exc})"
            failures += 1
        print(f"{name:<{width}}  {status}")
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return failures == 0
