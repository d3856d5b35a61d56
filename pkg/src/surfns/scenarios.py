"""Built-in scenario registry: reproducible runs probing the quantitative
long-time laws of the flow, each with pinned tolerances.

Every scenario's ``claims`` field states the law it exercises: the exact
Killing-component dynamics under the forcing catalog, exponential
non-Killing decay at the spectral-gap rate, the discrete energy equality,
continuous dependence on data, bounded backward-uniqueness quotients, and
absorbing-set entry for ensembles.
"""

import numpy as np

from .errors import ParameterError
from . import geometry as geo
from .diagnostics import (check_killing_identity, check_monotonicity,
                          continuous_dependence_ratio, fit_decay_rate,
                          lambda_series)
from .harmonics import SpectralState, get_transform
from .harness import CheckResult, Scenario, default_config, execute_scenario
from .killing import korn_constant


def _cfg(**kv):
    cfg = default_config()
    for key, val in kv.items():
        k = key if key in cfg else key.replace("_", ".", 1)
        if k not in cfg:
            raise ParameterError(f"scenario config key {key!r} not in schema")
        cfg[k] = val
    return cfg


def _check(name, measured, bound, expected, detail=""):
    return CheckResult(name, bool(measured <= bound), float(measured),
                       expected, float(bound), detail)


def _diff_states(ctx, a="a", b="b"):
    sa, _ = ctx.pair[a]
    sb, _ = ctx.pair[b]
    L = sa[0].L
    return [SpectralState(L, x.coeffs - y.coeffs, x.t) for x, y in zip(sa, sb)]


# --- individual checks ------------------------------------------------------

def chk_eigenlaw(ctx):
    lam2 = ctx.form.lam_by_degree[2]
    final = ctx.samples[-1].get(2, 0)
    t_end = ctx.cfg["run.t_end"]
    rel = abs(final - np.exp(-lam2 * t_end)) / np.exp(-lam2 * t_end)
    return _check("eigenlaw_c20", rel, 1e-6, "c20(t) = exp(-lambda_2 t)")


def chk_lambda1_zero(ctx):
    return _check("lambda1_zero", abs(ctx.form.lam_by_degree[1]), 1e-10,
                  "lambda_1 = 0")


def chk_decay_rate(window, rtol=1e-3, name="zeta_2lam2"):
    def run(ctx):
        lam2 = ctx.form.lam_by_degree[2]
        ts = np.array([r.t for r in ctx.records])
        ys = np.array([r.norm_uNK ** 2 for r in ctx.records])
        fit = fit_decay_rate(ts, ys, window=window)
        rel = abs(fit.zeta - 2 * lam2) / (2 * lam2)
        return _check(name, rel, rtol, "zeta = 2 lambda_2",
                      detail=f"zeta={fit.zeta:.6g}, omega={fit.omega:.3g}")
    return run


def chk_trajectory_constant(ctx):
    drift = max(np.abs(s.coeffs - ctx.samples[0].coeffs).max()
                for s in ctx.samples)
    return _check("trajectory_constant", drift, 1e-12, "u(t) = u(0)")


def chk_ledger(bound, name="energy_ledger"):
    def run(ctx):
        worst = max(abs(r.energy_residual) / max(r.energy, 1.0)
                    for r in ctx.records)
        return _check(name, worst, bound, "|E-E0+int D-int W| small")
    return run


def chk_killing_affine(tol_alpha, tol_sq):
    def run(ctx):
        rep = check_killing_identity(ctx.records, ctx.fspec)
        return [
            _check("alpha_affine_law", rep.affine_law_dev, tol_alpha,
                   "alpha(t) = alpha(0) + t f_K"),
            _check("killing_norm_quadratic", rep.quadratic_law_dev, tol_sq,
                   "||u_K(t)||^2 quadratic expansion"),
            _check("power_integral_linear", rep.linear_law_dev, tol_alpha,
                   "(f_K, u_K)(t) affine with slope ||f_K||^2"),
        ]
    return run


def chk_killing_drift(tol):
    def run(ctx):
        rep = check_killing_identity(ctx.records, ctx.fspec)
        return _check("alpha_drift", rep.drift, tol, "alpha(t) = alpha(0)")
    return run


def chk_exponential_killing(sign, tol):
    def run(ctx):
        a0 = ctx.records[0].norm_uK
        dev = max(abs(r.norm_uK - a0 * np.exp(sign * (r.t - ctx.records[0].t)))
                  for r in ctx.records)
        return _check("killing_exponential_law", dev / max(a0, 1e-30), tol,
                      f"||u_K(t)|| = e^{{{'+' if sign > 0 else '-'}t}} ||u_K(0)||")
    return run


def chk_monotone(direction, name="killing_monotonicity"):
    def run(ctx):
        rep = check_monotonicity(ctx.records, direction)
        worst = max(0.0, -rep.worst) if not np.isnan(rep.worst) else 0.0
        res = _check(name, worst, 1e-10, direction)
        res.passed = rep.ok
        if not rep.ok:
            res.detail = f"first violation at t = {rep.first_violation_t:.6g}"
        return res
    return run


def chk_gap_spread(ctx):
    T = ctx.cfg["run.t_end"]
    base, _ = ctx.pair["base"]
    ratios = []
    for i in range(len(ctx.extra["gaps"])):
        other, _ = ctx.pair[f"gap{i}"]
        rep = continuous_dependence_ratio(base, other, T, ctx.form)
        ratios.append(rep.sup_ratio)
    spread = max(ratios) / min(ratios)
    return _check("dependence_ratio_spread", spread, 2.0,
                  "sup-ratio stable across shrinking gaps",
                  detail="ratios: " + ", ".join(f"{r:.4f}" for r in ratios))


def chk_lambda_bounded(residual_tol):
    def run(ctx):
        rep = lambda_series(_diff_states(ctx), ctx.form)
        out = [
            _check("lambda_finite", 0.0 if np.isfinite(rep.lam_max) else 1.0,
                   0.5, "Lambda(t) finite on the window",
                   detail=f"max Lambda = {rep.lam_max:.6g}"),
            _check("log_norm_affine", rep.affine_residual, residual_tol,
                   "L(t) within an affine envelope"),
        ]
        return out
    return run


def chk_no_crossing(min_gap):
    def run(ctx):
        diffs = _diff_states(ctx)
        worst = min(float(np.linalg.norm(d.coeffs)) for d in diffs)
        res = _check("no_crossing", -worst, -min_gap,
                     "||u1 - u2|| stays positive")
        res.detail = f"min gap = {worst:.6g}"
        return res
    return run


def chk_h1_regularization(ctx):
    tr = get_transform(ctx.grid, ctx.cfg["geometry.L"])
    h1 = np.array([np.sqrt(tr.h1_norm2(s)) for s in ctx.samples])
    ts = np.array([s.t for s in ctx.samples])
    early = h1[(ts >= 0.1) & (ts <= 0.5)].max()
    late = h1[ts >= 0.5].max()
    return _check("h1_bounded_after_transient", late, 1.05 * early,
                  "sup_{t >= 0.5} ||u||_H1 <= 1.05 sup_{[0.1, 0.5]}",
                  detail=f"early {early:.6g}, late {late:.6g}")


def chk_ensemble_decay(window):
    def run(ctx):
        ens = ctx.ensemble
        lam2 = ctx.form.lam_by_degree[2]
        fit = fit_decay_rate(ens.times, ens.nk_max ** 2, window=window)
        out = [
            CheckResult("ensemble_zeta", fit.zeta >= 2 * lam2 * 0.99,
                        fit.zeta, ">= 0.99 * 2 lambda_2", 2 * lam2 * 0.99),
            _check("ensemble_omega", ens.omega_hat, 1e-10, "omega_hat = 0"),
            CheckResult("max_member_monotone",
                        bool(np.all(np.diff(ens.nk_max) < 1e-12)),
                        float(np.diff(ens.nk_max).max()), "strictly decreasing", 0.0),
            CheckResult("entry_time_finite", np.isfinite(ens.entry_time),
                        ens.entry_time, "finite absorbing-set entry", 0.0,
                        detail=f"radius {ens.entry_radius:.4f}"),
        ]
        return out
    return run


def chk_ensemble_growth(ctx):
    ens = ctx.ensemble
    uk_min = ens.uk_min
    ok = bool(np.all(np.diff(uk_min) >= -1e-10))
    return CheckResult("min_member_killing_growth", ok,
                       float(np.diff(uk_min).min()), "nondecreasing", 1e-10)


def chk_torus_static(ctx):
    v = ctx.basis.fields[0]
    resid = geo.strain_norm(ctx.grid, v) / geo.h1_norm(ctx.grid, v)
    area_err = abs(ctx.grid.area - 4 * np.pi ** 2 * ctx.grid.R * ctx.grid.r) / ctx.grid.area
    korn = korn_constant(ctx.grid)
    return [
        CheckResult("torus_killing_dim", ctx.basis.n == 1, float(ctx.basis.n),
                    "dim = 1", 0.0),
        _check("torus_killing_strain", resid, 1e-9,
               "||eps(v)|| <= 1e-9 ||v||_H1"),
        _check("torus_area", area_err, 1e-10, "area = 4 pi^2 R r"),
        CheckResult("torus_korn_finite", np.isfinite(korn.c_p) and korn.c_p > 1.0,
                    korn.c_p, "C_P finite, > 1", 0.0),
    ]


def chk_korn_convergence(ctx):
    L = ctx.cfg["geometry.L"]
    res_hi = korn_constant(ctx.grid, L)
    res_lo = korn_constant(ctx.grid, L // 2)
    rel = abs(res_hi.c_p - res_lo.c_p) / res_hi.c_p
    out = [_check("korn_truncation_convergence", rel, 1e-2,
                  "C_P(L) = C_P(L/2) within 1%",
                  detail=f"C_P = {res_hi.c_p:.8f}")]
    tr = get_transform(ctx.grid, L)
    worst = 0.0
    from .harmonics import random_band_limited
    for i in range(30):
        s = random_band_limited(tr, 9000 + i, norm_killing=0.0)
        v = tr.synthesize(s)
        worst = max(worst, geo.h1_norm(ctx.grid, v)
                    / (res_hi.c_p * geo.strain_norm(ctx.grid, v)))
    out.append(_check("korn_inequality_samples", worst, 1.0 + 1e-8,
                      "||v||_H1 <= C_P ||eps(v)|| on samples"))
    return out


def chk_final_nk_below(bound):
    def run(ctx):
        return _check("nonkilling_final_norm", ctx.records[-1].norm_uNK, bound,
                      f"||u_NK(t_end)|| <= {bound}")
    return run


# --- registry ---------------------------------------------------------------

def _build_registry():
    reg = {}

    def add(s):
        reg[s.name] = s

    add(Scenario(
        "free_decay_l2",
        "single-mode free decay follows exp(-lambda_2 t) with the reported "
        "quadratic-form eigenvalue; rotations are never damped (lambda_1 = 0)",
        "single",
        _cfg(geometry_L=16, init_kind="modes", init_modes=((2, 0, 1.0),),
             run_scheme="rk4", run_dt=1e-3, run_t_end=1.0, run_stride=10),
        [chk_eigenlaw, chk_lambda1_zero, chk_ledger(1e-6)]))

    add(Scenario(
        "free_decay_fit",
        "the non-Killing energy of an unforced flow decays exponentially at "
        "twice the slowest strain eigenvalue",
        "single",
        _cfg(geometry_L=8, init_kind="modes",
             init_modes=((2, 0, 0.5), (3, 1, 0.1)),
             run_dt=1e-3, run_t_end=4.0, run_stride=10),
        [chk_decay_rate(window=(1.0, 3.0)), chk_ledger(1e-6)]))

    add(Scenario(
        "killing_equilibrium",
        "rotation fields are exact steady states of the unforced flow; the "
        "energy ledger closes to rounding",
        "single",
        _cfg(geometry_L=8, init_kind="modes",
             init_modes=((1, 0, 0.9), (1, 1, -0.4), (1, -1, 0.2)),
             run_dt=1e-3, run_t_end=1.0, run_stride=100),
        [chk_trajectory_constant, chk_ledger(1e-12)]))

    add(Scenario(
        "constant_killing_growth",
        "under a constant Killing forcing the Killing coordinates grow "
        "affinely and the Killing energy exactly quadratically",
        "single",
        _cfg(geometry_L=8, forcing_tag="constant_killing", forcing_c=1.0,
             forcing_axis=0, init_kind="zero",
             run_dt=1e-3, run_t_end=2.0, run_stride=25),
        [chk_killing_affine(1e-8, 1e-6), chk_ledger(1e-6)]))

    add(Scenario(
        "f3_minus_decay",
        "forcing -u makes the Killing energy obey the exact e^{-2t} law and "
        "decrease monotonically (dissipative sign case)",
        "single",
        _cfg(geometry_L=8, forcing_tag="f3_minus", init_kind="random",
             init_l_max=4, init_norm_killing=1.0, init_norm_nonkilling=0.5,
             run_dt=5e-4, run_t_end=1.0, run_stride=40),
        [chk_exponential_killing(-1.0, 1e-6), chk_monotone("nonincreasing")]))

    add(Scenario(
        "f3_plus_growth",
        "forcing +u makes the Killing energy obey the exact e^{+2t} law and "
        "grow monotonically (unbounded-trajectory sign case)",
        "single",
        _cfg(geometry_L=8, forcing_tag="f3_plus", init_kind="random",
             init_l_max=4, init_norm_killing=1.0, init_norm_nonkilling=0.5,
             run_dt=5e-4, run_t_end=1.0, run_stride=40),
        [chk_exponential_killing(+1.0, 1e-6), chk_monotone("nondecreasing")]))

    add(Scenario(
        "killing_conserved_f1",
        "a forcing with vanishing Killing component conserves every Killing "
        "coordinate along the flow",
        "single",
        _cfg(geometry_L=8, forcing_tag="constant_field", forcing_mode_l=2,
             forcing_mode_m=0, init_kind="random", init_l_max=4,
             init_norm_killing=0.7, init_norm_nonkilling=0.5,
             run_dt=1e-3, run_t_end=5.0, run_stride=100),
        [chk_killing_drift(1e-10)]))

    add(Scenario(
        "varnu_energy_balance",
        "the discrete energy equality holds with variable viscosity and a "
        "state-dependent forcing, sample by sample",
        "single",
        _cfg(geometry_L=16, nu_kind="linear_x3", nu_value=1.0, nu_a=0.5,
             forcing_tag="f2_minus", forcing_mode_l=2, forcing_mode_m=0,
             init_kind="random", init_l_max=5, init_norm_killing=0.3,
             init_norm_nonkilling=0.7, run_dt=1e-3, run_t_end=1.0,
             run_stride=10),
        [chk_ledger(1e-6)]))

    add(Scenario(
        "free_decay_ensemble",
        "an unforced ensemble contracts to the rotation space exponentially "
        "at the spectral-gap rate and enters the absorbing ball in finite time",
        "ensemble",
        _cfg(geometry_L=8, init_kind="random", init_norm_killing=0.5,
             init_norm_nonkilling=1.0, run_dt=1e-3, run_t_end=4.0,
             run_stride=20, **{"ensemble.members": 8}),
        [chk_ensemble_decay(window=(1.0, 3.0))]))

    add(Scenario(
        "f3_plus_ensemble",
        "with the growth-sign forcing every member's Killing norm is "
        "nondecreasing (unbounded-attractor regime probe)",
        "ensemble",
        _cfg(geometry_L=8, forcing_tag="f3_plus", init_kind="random",
             init_l_max=4, init_norm_killing=0.8, init_norm_nonkilling=0.4,
             run_dt=5e-4, run_t_end=1.0, run_stride=40,
             **{"ensemble.members": 4}),
        [chk_ensemble_growth]))

    add(Scenario(
        "contdep_gaps",
        "the squared trajectory gap is controlled by the initial gap with a "
        "constant stable under gap refinement",
        "gaps",
        _cfg(geometry_L=8, forcing_tag="f3_plus", init_kind="random",
             init_l_max=5, init_norm_killing=0.5, init_norm_nonkilling=0.8,
             run_dt=5e-4, run_t_end=1.0, run_stride=20,
             **{"pair.gaps": (1e-2, 1e-3, 1e-4)}),
        [chk_gap_spread]))

    add(Scenario(
        "backward_uniqueness_probe",
        "the strain-to-norm quotient of a difference trajectory stays "
        "bounded and its log-norm obeys an affine envelope, so nearby "
        "trajectories cannot reach zero distance in finite time",
        "pair",
        _cfg(geometry_L=8, init_kind="random", init_l_max=3,
             init_norm_killing=0.4, init_norm_nonkilling=0.8,
             run_dt=1e-3, run_t_end=2.0, run_stride=20,
             **{"pair.gaps": (1e-3,), "pair.killing_free": True}),
        [chk_lambda_bounded(0.05), chk_no_crossing(1e-13)]))

    add(Scenario(
        "solutions_do_not_cross",
        "two distinct trajectories never intersect: their gap stays strictly "
        "positive for all time",
        "pair",
        _cfg(geometry_L=8, forcing_tag="f2_minus", forcing_mode_l=2,
             forcing_mode_m=1, init_kind="random", init_l_max=4,
             init_norm_killing=0.5, init_norm_nonkilling=0.8,
             run_dt=1e-3, run_t_end=1.5, run_stride=30,
             **{"pair.gaps": (0.5,)}),
        [chk_no_crossing(1e-3)]))

    add(Scenario(
        "insta_regularity",
        "weak data regularizes instantly: the H1 norm is uniformly bounded "
        "past any positive time under the sign-favorable catalog forcing",
        "single",
        _cfg(geometry_L=12, geometry_radius=2.0, nu_value=5.0,
             forcing_tag="f5", init_kind="random",
             init_norm_killing=0.5, init_norm_nonkilling=1.5,
             run_dt=1e-3, run_t_end=2.0, run_stride=20),
        [chk_h1_regularization, chk_ledger(1e-6)]))

    add(Scenario(
        "f5_absorbing",
        "the catalog forcing with dissipative Killing sign contracts the "
        "Killing energy exponentially and traps the non-Killing energy in "
        "a bounded absorbing ball",
        "single",
        _cfg(geometry_L=10, geometry_radius=2.0, nu_value=5.0,
             forcing_tag="f5", init_kind="random", init_l_max=5,
             init_norm_killing=1.0, init_norm_nonkilling=1.0,
             run_dt=5e-4, run_t_end=2.0, run_stride=40),
        [chk_exponential_killing(-1.0, 1e-6), chk_monotone("nonincreasing"),
         chk_final_nk_below(np.sqrt(0.5))]))

    add(Scenario(
        "torus_static",
        "the torus carries exactly one Killing direction (azimuthal "
        "rotation) with vanishing strain, exact area, and a finite "
        "truncated Korn constant",
        "static",
        _cfg(geometry_kind="torus", **{"geometry.n_pol": 64,
                                       "geometry.n_tor": 64,
                                       "geometry.major": 2.0,
                                       "geometry.minor": 0.5}),
        [chk_torus_static]))

    add(Scenario(
        "korn_sphere",
        "the truncated Korn constant converges in the truncation degree and "
        "the inequality holds on random non-Killing samples",
        "static",
        _cfg(geometry_L=16),
        [chk_korn_convergence]))

    return reg


_REGISTRY = _build_registry()


def list_scenarios():
    """Names and claims of the built-in scenarios."""
    return [(name, _REGISTRY[name].claims) for name in sorted(_REGISTRY)]


def get_scenario(name):
    if name not in _REGISTRY:
        raise ParameterError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(_REGISTRY))}")
    return _REGISTRY[name]


def run_scenario(name, out_dir=None, seed=None, threads=None, quiet=False):
    """Execute a built-in scenario by name; returns its RunReport."""
    return execute_scenario(get_scenario(name), out_dir=out_dir, seed=seed,
                            threads=threads, quiet=quiet)
