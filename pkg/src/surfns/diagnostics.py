"""Observables along trajectories: norms, energy ledger, decay fits,
Killing-component identities, monotonicity, continuous dependence, and the
backward-uniqueness quotient.

The quotient Lambda = ||sqrt(2 nu) eps(u)||^2 / ||u||^2 vanishes on Killing
fields and is flagged undefined below ||u|| = 1e-13 rather than extended by
limits: a vanishing difference of trajectories is the event the probe is
watching for, so we stop instead of dividing by noise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

NORM_FLOOR = 1e-13


@dataclass
class DiagnosticsRecord:
    t: float
    norm_u: float
    norm_uK: float
    norm_uNK: float
    energy: float
    dissipation: float
    work: float
    energy_residual: float
    lam: float                  # nan when undefined
    alpha: np.ndarray

    @property
    def lam_defined(self):
        return np.isfinite(self.lam)


def record(grid, basis, form, spec, sim):
    """One diagnostics row for the current integrator state."""
    from .operators import forcing_apply
    c = sim.state.coeffs
    norm_u = float(np.linalg.norm(c))
    norm_k = float(np.linalg.norm(c[:3]))
    norm_nk = float(np.linalg.norm(c[3:]))
    diss = form.quad_form(c)
    ff = forcing_apply(spec, grid, basis, sim.state).coeffs
    work = float(ff @ c)
    lam = diss / norm_u ** 2 if norm_u >= NORM_FLOOR else np.nan
    alpha = basis.alpha_from_state(sim.state)
    return DiagnosticsRecord(sim.t, norm_u, norm_k, norm_nk,
                             0.5 * norm_u ** 2, diss, work,
                             sim.ledger_residual(), lam, alpha)


@dataclass
class DecayFit:
    zeta: float
    omega: float
    residual: float
    window: tuple
    warning: str = ""

    @property
    def ok(self):
        return not self.warning


def fit_decay_rate(times, values, window=None):
    """Fit values(t) ~ e^{-zeta t} + omega on a window.

    ``values`` are the squared non-Killing norms.  The tail plateau omega is
    the mean of the last 10% of samples (0 if below 1e-12); the rate comes
    from least squares of log(values - omega)_+ against t.  A non-monotone
    tail beyond rounding produces a warning, not an error.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 10:
        raise ParameterError("need at least 10 samples to fit a decay rate")
    if np.any(values < 0):
        raise ParameterError("decay fit expects nonnegative values")
    n_tail = max(1, times.size // 10)
    omega = float(values[-n_tail:].mean())
    if omega <= 1e-12:
        omega = 0.0
    if window is None:
        t0, t1 = times[0], times[-1]
    else:
        t0, t1 = window
    # relative floor keeps rounding-level tails out of the log fit
    floor = max(1e-12 * float(values.max()), 1e-300)
    sel = (times >= t0) & (times <= t1) & (values - omega > floor)
    if sel.sum() < 3:
        return DecayFit(np.nan, omega, np.nan, (t0, t1),
                        warning="too few samples above the plateau")
    ts = times[sel]
    ys = np.log(values[sel] - omega)
    Amat = np.stack([np.ones_like(ts), -ts], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, ys, rcond=None)
    fit = Amat @ coef
    resid = float(np.sqrt(np.mean((ys - fit) ** 2)))
    warning = ""
    tail = values[sel][max(0, sel.sum() - n_tail):]
    if np.any(np.diff(tail) > 1e-9 * max(values.max(), 1.0) + 1e-14):
        warning = "non-monotone tail"
    return DecayFit(float(coef[1]), omega, resid, (float(t0), float(t1)), warning)


@dataclass
class KillingIdentityReport:
    linear_law_dev: float       # the power-integral law against f_K
    affine_law_dev: float       # componentwise alpha(t) = alpha(0) + t f_K
    quadratic_law_dev: float    # norm growth law (nan unless f independent of u)
    drift: float                # max |alpha(t) - alpha(0)| (conservation case)
    fk_norm: float


def check_killing_identity(series, spec):
    """Verify the exact Killing laws for u-independent Killing forcing.

    For f_K independent of u: the power integral (f_K, u_K)(t) is affine
    with slope ||f_K||^2, each coordinate follows alpha(0) + t f_K, and the
    squared norm obeys its quadratic expansion.  For f_K = 0 the report's
    ``drift`` field measures conservation.
    """
    if spec.tag not in ("zero", "constant_field", "constant_killing"):
        raise ParameterError(
            "identity check needs forcing with u-independent Killing part")
    basis = spec.basis
    if spec.tag == "constant_killing":
        fk = np.zeros(basis.n)
        fk[spec.axis] = spec.c
    elif spec.tag == "constant_field":
        from .killing import killing_coefficients
        fk = killing_coefficients(basis, spec.g)
    else:
        fk = np.zeros(basis.n)
    fk_norm = float(np.linalg.norm(fk))

    t0 = series[0].t
    a0 = series[0].alpha
    ip0 = float(fk @ a0)
    lin_dev = aff_dev = quad_dev = drift = 0.0
    for rec in series:
        dt = rec.t - t0
        lin_dev = max(lin_dev, abs(float(fk @ rec.alpha) - ip0 - dt * fk_norm ** 2))
        aff_dev = max(aff_dev, float(np.abs(rec.alpha - a0 - dt * fk).max()))
        expect = float(a0 @ a0) + dt * dt * fk_norm ** 4 + 2.0 * dt * fk_norm ** 2 * ip0
        quad_dev = max(quad_dev, abs(float(rec.alpha @ rec.alpha) - expect))
        drift = max(drift, float(np.abs(rec.alpha - a0).max()))
    return KillingIdentityReport(lin_dev, aff_dev, quad_dev, drift, fk_norm)


@dataclass
class MonotonicityReport:
    direction: str
    ok: bool
    first_violation_t: float
    worst: float


def check_monotonicity(series, direction, slack=1e-10):
    """Assert ||u_K(t)|| is monotone across samples within a small slack."""
    if direction not in ("nonincreasing", "nondecreasing"):
        raise ParameterError("direction must be nonincreasing or nondecreasing")
    sign = -1.0 if direction == "nonincreasing" else 1.0
    vals = np.array([r.norm_uK for r in series])
    times = np.array([r.t for r in series])
    steps = sign * np.diff(vals)
    tol = slack * max(1.0, vals.max())
    bad = np.where(steps < -tol)[0]
    if bad.size == 0:
        return MonotonicityReport(direction, True, np.nan,
                                  float(steps.min(initial=0.0)))
    return MonotonicityReport(direction, False, float(times[bad[0] + 1]),
                              float(steps.min()))


@dataclass
class DependenceReport:
    sup_ratio: float
    diss_integral: float
    combined_ratio: float
    gap0: float


def continuous_dependence_ratio(traj_a, traj_b, T, form=None):
    """sup_{[0,T]} ||u1 - u2||^2 / ||u1(0) - u2(0)||^2 plus the strain-gap
    integral 2 nu_* int ||eps(u1 - u2)||^2 dt.

    Trajectories are matching lists of coefficient states sampled at the
    same times.  Identical initial data is an error (undefined ratio).
    """
    if len(traj_a) != len(traj_b):
        raise ParameterError("trajectories must share their sample times")
    d0 = float(np.linalg.norm(traj_a[0].coeffs - traj_b[0].coeffs))
    if d0 < NORM_FLOOR:
        raise ParameterError("identical initial data: dependence ratio undefined")
    sup = 0.0
    ts, eps2 = [], []
    for sa, sb in zip(traj_a, traj_b):
        if sa.t > T + 1e-12:
            break
        d = sa.coeffs - sb.coeffs
        sup = max(sup, float(d @ d))
        ts.append(sa.t)
        if form is not None:
            lam = form.lam_by_degree[form.transform.mode_l]
            eps2.append(float(np.dot(0.5 * lam, d * d)))
    diss = 0.0
    if form is not None and len(ts) > 1:
        ts_a = np.asarray(ts)
        ys_a = np.asarray(eps2)
        trap = float(np.sum(0.5 * np.diff(ts_a) * (ys_a[1:] + ys_a[:-1])))
        diss = 2.0 * form.nu_min * trap
    return DependenceReport(sup / d0 ** 2, diss, (sup + diss) / d0 ** 2, d0)


@dataclass
class LambdaReport:
    times: np.ndarray
    lam: np.ndarray
    logs: np.ndarray            # L(t) = -1/2 log ||u||^2
    truncated_at: float         # nan if the difference never vanished
    lam_max: float
    affine_coef: tuple          # (intercept, slope) of the L fit
    affine_residual: float      # rms residual / spread of L


def lambda_series(diff_states, form):
    """Lambda(t) and L(t) along a difference trajectory.

    Stops at the first sample with ||u|| < 1e-13 and reports the truncation
    point; otherwise fits L affinely and reports the relative residual (the
    bounded-growth structure dL/dt <= C + C Lambda).
    """
    ts, lams, logs = [], [], []
    truncated = np.nan
    for s in diff_states:
        nrm = float(np.linalg.norm(s.coeffs))
        if nrm < NORM_FLOOR:
            truncated = s.t
            break
        ts.append(s.t)
        lams.append(form.quad_form(s.coeffs) / nrm ** 2)
        logs.append(-np.log(nrm))
    ts = np.asarray(ts)
    lams = np.asarray(lams)
    logs = np.asarray(logs)
    if ts.size < 2:
        return LambdaReport(ts, lams, logs, truncated, float("nan"),
                            (np.nan, np.nan), np.nan)
    Amat = np.stack([np.ones_like(ts), ts], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, logs, rcond=None)
    resid = float(np.sqrt(np.mean((logs - Amat @ coef) ** 2)))
    spread = float(max(np.ptp(logs), 1e-30))
    return LambdaReport(ts, lams, logs, truncated, float(lams.max()),
                        (float(coef[0]), float(coef[1])), resid / spread)
