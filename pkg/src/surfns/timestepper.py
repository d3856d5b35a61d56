"""Time integration of the spectral system dc/dt = -A c - N(c) + F(c).

The default scheme is IMEX-CNAB2: Crank-Nicolson on the constant-coefficient
part nu_min * D (a diagonal solve per mode, so the Killing block never
receives diffusive damping), second-order Adams-Bashforth on the remainder
A' c + N(c) - F(c).  The first step is bootstrapped with one explicit RK2
substep.  Splitting at the minimum viscosity keeps the explicit matrix
positive semidefinite, so the linear dynamics are dissipative step by step.

The energy ledger accumulates the dissipation and work integrals with the
exact per-step energy identity of the scheme: the Crank-Nicolson term is
evaluated at the midpoint state and the explicit terms at their
Adams-Bashforth combinations.  Linear runs therefore balance to rounding;
the only residual on nonlinear runs is the convective defect, which is
O(dt^3) per step.  A classical RK4 path is kept for cross-validation, with
the ledger integrated through the same stages.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParameterError
from .harmonics import SpectralState
from .operators import convective_term, forcing_apply


def cfl_estimate(grid, u, factor=0.5):
    """Advective time-step estimate factor * dx_min / ||u||_inf.

    Offered as a sizing aid only; runs use a fixed dt by default so
    reported numbers are reproducible.  ``u`` is a nodal tangential field.
    """
    speed = float(np.abs(u.comps).max())
    if grid.kind == "sphere":
        dtheta = float(np.diff(grid.lat).min()) if grid.n_lat > 1 else np.pi
        sin_min = float(np.sin(grid.lat).min())
        dx = grid.R * min(abs(dtheta), sin_min * 2.0 * np.pi / grid.n_lon)
    else:
        dx = min(grid.r * 2.0 * np.pi / grid.n_lat,
                 (grid.R - grid.r) * 2.0 * np.pi / grid.n_lon)
    if speed == 0.0:
        return np.inf
    return factor * dx / speed


@dataclass
class StepperConfig:
    scheme: str = "imex_cnab2"          # or "rk4"
    dt: float = 1e-3
    t_end: float = 1.0
    stride: int = 10

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ParameterError("dt and t_end must be positive")
        if self.scheme not in ("imex_cnab2", "rk4"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.stride < 1:
            raise ParameterError("stride must be >= 1")


class SimState:
    """Coefficient state plus step metadata and the running energy ledger."""

    def __init__(self, state, dt=0.0, step=0, work_integral=0.0,
                 diss_integral=0.0, energy0=None, _prev=None):
        self.state = state
        self.t = state.t
        self.dt = dt
        self.step = step
        self.work_integral = work_integral
        self.diss_integral = diss_integral
        self.energy0 = 0.5 * state.norm() ** 2 if energy0 is None else energy0
        self._prev = _prev          # (A'c, N(c), F(c)) at the previous step

    def energy(self):
        return 0.5 * self.state.norm() ** 2

    def ledger_residual(self):
        """E(t) - E(0) + int D - int W, the discrete balance defect."""
        return self.energy() - self.energy0 + self.diss_integral - self.work_integral

    def copy(self):
        return SimState(self.state.copy(), self.dt, self.step,
                        self.work_integral, self.diss_integral, self.energy0,
                        self._prev)


def _parts(form, spec, basis, state):
    """(A'c, N(c), F(c)) evaluated at one state."""
    c = state.coeffs
    ap = form.A @ c - form.nu_min * (form.D * c)
    nn = convective_term(form.grid, state).coeffs
    ff = forcing_apply(spec, form.grid, basis, state).coeffs
    return ap, nn, ff


def _check_finite(c, good_sim):
    if not np.all(np.isfinite(c)):
        raise DivergenceError(
            f"non-finite coefficients at t = {good_sim.t + good_sim.dt:.6g} "
            f"(after step {good_sim.step})", last_state=good_sim)


def step_imex(sim, form, spec, dt):
    """One IMEX-CNAB2 step; bootstraps with a single RK2 substep."""
    if dt <= 0:
        raise ParameterError("dt must be positive")
    rho = form.rho_explicit()
    if dt * rho > 1.0 + 1e-9:
        raise ParameterError(
            f"dt = {dt:g} exceeds the explicit-remainder stability bound "
            f"{1.0 / max(rho, 1e-300):g}")
    basis = spec.basis
    c = sim.state.coeffs
    half = 0.5 * dt * form.nu_min * form.D

    if sim._prev is None:
        ap0, nn0, ff0 = _parts(form, spec, basis, sim.state)
        k1 = -(form.nu_min * form.D * c) - ap0 - nn0 + ff0
        cs = c + dt * k1
        mid_state = SpectralState(sim.state.L, cs, sim.t + dt)
        ap1, nn1, ff1 = _parts(form, spec, basis, mid_state)
        k2 = -(form.nu_min * form.D * cs) - ap1 - nn1 + ff1
        c_new = c + 0.5 * dt * (k1 + k2)
        mid = 0.5 * (c + c_new)
        diss = 0.5 * dt * float(
            (form.A @ c + form.A @ cs) @ mid)
        work = 0.5 * dt * float((ff0 + ff1) @ mid)
        prev = (ap0, nn0, ff0)
    else:
        ap_n, nn_n, ff_n = _parts(form, spec, basis, sim.state)
        ap_p, nn_p, ff_p = sim._prev
        expl = -(1.5 * ap_n - 0.5 * ap_p) - (1.5 * nn_n - 0.5 * nn_p) \
            + (1.5 * ff_n - 0.5 * ff_p)
        c_new = ((1.0 - half) * c + dt * expl) / (1.0 + half)
        mid = 0.5 * (c + c_new)
        diss = dt * float(form.nu_min * np.dot(form.D * mid, mid)
                          + (1.5 * ap_n - 0.5 * ap_p) @ mid)
        work = dt * float((1.5 * ff_n - 0.5 * ff_p) @ mid)
        prev = (ap_n, nn_n, ff_n)

    out = SimState(SpectralState(sim.state.L, c_new, sim.t + dt), dt,
                   sim.step + 1, sim.work_integral + work,
                   sim.diss_integral + diss, sim.energy0, prev)
    _check_finite(c_new, sim)
    return out


def step_rk4(sim, form, spec, dt):
    """Classical explicit RK4 step on the full right-hand side."""
    if dt <= 0:
        raise ParameterError("dt must be positive")
    if dt * form.rho_full() > 2.7 + 1e-9:
        raise ParameterError(
            f"dt = {dt:g} violates the RK4 stability bound "
            f"{2.7 / max(form.rho_full(), 1e-300):g}")
    basis = spec.basis
    L = sim.state.L

    def rhs_and_rates(cvec, t):
        st = SpectralState(L, cvec, t)
        ap, nn, ff = _parts(form, spec, basis, st)
        k = -(form.nu_min * form.D * cvec) - ap - nn + ff
        diss_rate = float(cvec @ (form.A @ cvec))
        work_rate = float(ff @ cvec)
        return k, diss_rate, work_rate

    c = sim.state.coeffs
    t = sim.t
    k1, d1, w1 = rhs_and_rates(c, t)
    k2, d2, w2 = rhs_and_rates(c + 0.5 * dt * k1, t + 0.5 * dt)
    k3, d3, w3 = rhs_and_rates(c + 0.5 * dt * k2, t + 0.5 * dt)
    k4, d4, w4 = rhs_and_rates(c + dt * k3, t + dt)
    c_new = c + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    diss = dt / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
    work = dt / 6.0 * (w1 + 2 * w2 + 2 * w3 + w4)

    out = SimState(SpectralState(L, c_new, t + dt), dt, sim.step + 1,
                   sim.work_integral + work, sim.diss_integral + diss,
                   sim.energy0, sim._prev)
    _check_finite(c_new, sim)
    return out


def run(config, grid, form, spec, u0, basis=None, record_fn=None):
    """Integrate to t_end, sampling every ``stride`` steps.

    Returns (samples, records): coefficient snapshots and diagnostics rows.
    ``record_fn`` defaults to the diagnostics module's ``record``.  On
    divergence the partial results ride on the raised error.
    """
    from .diagnostics import record as default_record
    basis = basis if basis is not None else spec.basis
    rec = record_fn if record_fn is not None else default_record

    n_steps = int(round(config.t_end / config.dt))
    if abs(n_steps * config.dt - config.t_end) > 1e-9 * max(config.t_end, 1.0):
        raise ParameterError("t_end must be an integer multiple of dt")
    stepper = step_imex if config.scheme == "imex_cnab2" else step_rk4

    sim = SimState(u0.copy(), dt=config.dt)
    samples = [sim.state.copy()]
    records = [rec(grid, basis, form, spec, sim)]
    try:
        for n in range(n_steps):
            sim = stepper(sim, form, spec, config.dt)
            if (n + 1) % config.stride == 0 or n + 1 == n_steps:
                samples.append(sim.state.copy())
                records.append(rec(grid, basis, form, spec, sim))
    except DivergenceError as err:
        err.partial = (samples, records)
        raise
    return samples, records
