"""Pseudo-spectral solver for the coupled velocity-stress system on the box.

The integrators are built around the exact per-mode linear propagator, so
with the nonlinear terms switched off a step of any size is exact and the
linear decay rates carry no time-discretization bias.  Writing G(dt) for the
propagator and N for the dealiased nonlinear terms, the default scheme is the
integrating-factor Heun step

    predictor   z* = G(dt) (z + dt N(z))
    corrector   z' = G(dt) (z + dt/2 N(z)) + dt/2 N(z*)

which is second order and reduces to z' = G(dt) z when N vanishes.

Nonlinear terms follow from isolating the time derivatives in the model
equations: the momentum nonlinearity is -P (u.grad) u and the stress one is
-(u.grad tau + g_a(tau, grad u)); the linear couplings (viscosity, stress
divergence, relaxation, and the Newtonian source, scaled by the Reynolds and
Weissenberg numbers) all live inside G.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .propagator import ModePropagator
from .rates import SCHEMA_COLUMNS, TimeSeries
from .spectral import (
    SYM_COMPONENTS,
    FluidParams,
    FourierGrid,
    SpectralTensorField,
    SpectralVectorField,
    deformation,
    divergence_values,
    from_physical_half,
    full_from_half,
    half_spectrum,
    hermitianize,
    l2_inner,
    sobolev_seminorm,
    to_physical_half,
)


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping and output cadence."""

    dt: float
    t_end: float
    integrator: str = "etd_heun"
    checkpoint_every: int = 0
    diagnostics_every: int = 1
    cfl_cap: float = 0.5

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.integrator not in ("etd_heun", "etd_euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be at least 1")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be nonnegative")


@dataclass(frozen=True)
class SimState:
    """Solver state: time plus the two spectral fields and the parameters."""

    time: float
    u: SpectralVectorField
    tau: SpectralTensorField
    params: FluidParams

    def __post_init__(self):
        if self.u.grid != self.tau.grid:
            raise ValueError("velocity and stress must share a grid")

    @property
    def grid(self) -> FourierGrid:
        return self.u.grid


class SolverAbort(RuntimeError):
    """Raised when the run hits the CFL cap or produces non-finite values."""

    def __init__(self, reason: str, time: float, step: int):
        super().__init__(f"solver aborted ({reason}) at t = {time:.6g}, step {step}")
        self.reason = reason
        self.time = time
        self.step = step


@dataclass(frozen=True)
class NonlinearRhs:
    """Dealiased spectral nonlinear terms plus their physical sup norm."""

    du: np.ndarray
    dtau: np.ndarray
    inf_norm: float


def nonlinear_rhs(state: SimState) -> NonlinearRhs:
    """Evaluate -P(u.grad)u and -(u.grad tau + g_a) pseudo-spectrally.

    All transforms are batched into two FFT calls; the outputs are dealiased,
    the momentum term is Leray-projected, and the stress term is symmetric by
    construction.
    """
    grid = state.grid
    n = grid.n_per_axis
    h = n // 2 + 1
    k = grid.wavenumbers_half
    u_hat = half_spectrum(state.u.coeffs)
    tau_hat = half_spectrum(state.tau.coeffs)

    stack = np.empty((36, n, n, h), dtype=np.complex128)
    stack[0:3] = u_hat
    for j in range(3):
        for l in range(3):
            stack[3 + 3 * j + l] = 1j * k[l] * u_hat[j]
    stack[12:18] = tau_hat
    for c in range(6):
        for l in range(3):
            stack[18 + 3 * c + l] = 1j * k[l] * tau_hat[c]
    phys = to_physical_half(stack, n)
    u_p = phys[0:3]
    grad_u = phys[3:12].reshape(3, 3, n, n, n)
    tau_p = phys[12:18]
    grad_tau = phys[18:36].reshape(6, 3, n, n, n)

    conv_u = np.einsum("l...,jl...->j...", u_p, grad_u)
    conv_tau = np.einsum("l...,cl...->c...", u_p, grad_tau)

    # g_a from the physical-space matrix products
    d_p = 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))
    w_p = 0.5 * (grad_u - np.swapaxes(grad_u, 0, 1))
    tau_full = np.empty((3, 3, n, n, n))
    for c, (j, l) in enumerate(SYM_COMPONENTS):
        tau_full[j, l] = tau_p[c]
        if j != l:
            tau_full[l, j] = tau_p[c]
    g = np.einsum("ab...,bc...->ac...", tau_full, w_p)
    g -= np.einsum("ab...,bc...->ac...", w_p, tau_full)
    a = state.params.a
    if a != 0.0:
        dt_prod = np.einsum("ab...,bc...->ac...", d_p, tau_full)
        g -= a * (dt_prod + np.swapaxes(dt_prod, 0, 1))
    for c, (j, l) in enumerate(SYM_COMPONENTS):
        conv_tau[c] += g[j, l]

    inf_norm = max(float(np.max(np.abs(conv_u))), float(np.max(np.abs(conv_tau))))

    out = from_physical_half(np.concatenate([conv_u, conv_tau])) * grid.dealias_mask_half
    du = -out[0:3]
    dtau = -out[3:9]
    # Leray projection of the momentum term
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    k2[0, 0, 0] = 1.0
    kdu = (k[0] * du[0] + k[1] * du[1] + k[2] * du[2]) / k2
    kdu[0, 0, 0] = 0.0
    du = du - k * kdu[None]
    return NonlinearRhs(du=full_from_half(du, n), dtau=full_from_half(dtau, n),
                        inf_norm=inf_norm)


def zero_rhs(state: SimState) -> NonlinearRhs:
    """Disabled nonlinearity, for exactness checks of the linear stepping."""
    grid = state.grid
    return NonlinearRhs(
        du=np.zeros(grid.shape(3), dtype=np.complex128),
        dtau=np.zeros(grid.shape(6), dtype=np.complex128),
        inf_norm=0.0,
    )


def _make_state(state: SimState, time: float, u_hat, tau_hat) -> SimState:
    return SimState(
        time=time,
        u=SpectralVectorField(state.grid, u_hat),
        tau=SpectralTensorField(state.grid, tau_hat),
        params=state.params,
    )


def step_etd_euler(state: SimState, dt: float, prop: ModePropagator | None = None,
                   rhs_fn=nonlinear_rhs, rhs0: NonlinearRhs | None = None) -> SimState:
    """First-order integrating-factor step z' = G(dt)(z + dt N(z))."""
    if prop is None or prop.t != dt:
        prop = ModePropagator(state.grid, state.params, dt)
    if rhs0 is None:
        rhs0 = rhs_fn(state)
    u_hat, tau_hat = prop.apply(state.u.coeffs + dt * rhs0.du,
                                state.tau.coeffs + dt * rhs0.dtau)
    return _make_state(state, state.time + dt, u_hat, tau_hat)


def step_etd_heun(state: SimState, dt: float, prop: ModePropagator | None = None,
                  rhs_fn=nonlinear_rhs, rhs0: NonlinearRhs | None = None) -> SimState:
    """Second-order integrating-factor Heun step; exact when N vanishes."""
    if prop is None or prop.t != dt:
        prop = ModePropagator(state.grid, state.params, dt)
    if rhs0 is None:
        rhs0 = rhs_fn(state)
    u0, tau0 = state.u.coeffs, state.tau.coeffs
    up, taup = prop.apply(u0 + dt * rhs0.du, tau0 + dt * rhs0.dtau)
    pred = _make_state(state, state.time + dt, up, taup)
    rhs1 = rhs_fn(pred)
    uc, tauc = prop.apply(u0 + 0.5 * dt * rhs0.du, tau0 + 0.5 * dt * rhs0.dtau)
    u_hat = uc + 0.5 * dt * rhs1.du
    tau_hat = tauc + 0.5 * dt * rhs1.dtau
    return _make_state(state, state.time + dt, u_hat, tau_hat)


_STEPPERS = {"etd_heun": step_etd_heun, "etd_euler": step_etd_euler}


def elastic_residual(state: SimState) -> SpectralTensorField:
    """Elastic part of the stress: tau - 2 omega D(u)."""
    d = deformation(state.u)
    return SpectralTensorField(
        state.grid, state.tau.coeffs - 2.0 * state.params.omega * d.coeffs
    )


def h2_norm(u: SpectralVectorField, tau: SpectralTensorField) -> float:
    """Combined H^2 norm of the pair (u, tau)."""
    total = 0.0
    for order in (0, 1, 2):
        total += sobolev_seminorm(u, order) + sobolev_seminorm(tau, order)
    return math.sqrt(total)


def diagnostics_row(state: SimState) -> dict[str, float]:
    """One record of the norm and alignment diagnostics."""
    u, tau, params = state.u, state.tau, state.params
    grid = state.grid
    row = {
        "u_l2sq": sobolev_seminorm(u, 0),
        "u_h1sq": sobolev_seminorm(u, 1),
        "u_h2sq": sobolev_seminorm(u, 2),
        "tau_l2sq": sobolev_seminorm(tau, 0),
        "tau_h1sq": sobolev_seminorm(tau, 1),
        "tau_h2sq": sobolev_seminorm(tau, 2),
    }
    eps = elastic_residual(state)
    row["eps_l2sq"] = sobolev_seminorm(eps, 0)
    row["div_u"] = math.sqrt(grid.volume * float(np.sum(np.abs(divergence_values(u)) ** 2)))
    trace = np.abs(tau.coeffs[0] + tau.coeffs[1] + tau.coeffs[2])
    row["trace_tau_max"] = float(np.max(trace))
    row["energy"] = params.omega * row["u_l2sq"] + 0.5 * row["tau_l2sq"]
    newt = SpectralTensorField(grid, 2.0 * params.omega * deformation(u).coeffs)
    newt_sq = sobolev_seminorm(newt, 0)
    denom = math.sqrt(row["tau_l2sq"] * newt_sq)
    row["align_cos"] = l2_inner(tau, newt) / denom if denom > 0 else 0.0
    return row


def run(initial: SimState, config: SolverConfig, out_dir=None) -> TimeSeries:
    """Advance to t_end, recording diagnostics and optional checkpoints.

    Diagnostics are recorded at the initial time, every
    ``diagnostics_every``-th step, and at the final time.  A CFL breach or a
    non-finite field aborts the run; with an output directory the abort
    writes a failure checkpoint and record before raising.
    """
    if initial.time >= config.t_end:
        raise ValueError("initial time must precede t_end")
    smallness = h2_norm(initial.u, initial.tau)
    if smallness > 0.1:
        warnings.warn(
            f"initial H^2 size {smallness:.3g} exceeds 0.1; the decay predictions "
            "assume small data",
            stacklevel=2,
        )
    span = config.t_end - initial.time
    n_steps = max(1, math.ceil(span / config.dt - 1e-9))
    dt_last = span - (n_steps - 1) * config.dt
    stepper = _STEPPERS[config.integrator]
    prop = ModePropagator(initial.grid, initial.params, config.dt)
    rhs_fn = nonlinear_rhs

    writer = None
    if out_dir is not None:
        from . import io as _io  # local import; io depends on solver types

        writer = _io

    def checkpoint(state, tag):
        if writer is not None:
            writer.write_checkpoint(writer.checkpoint_path(out_dir, tag), state)

    times = [initial.time]
    rows = [diagnostics_row(initial)]
    state = initial
    try:
        for step in range(1, n_steps + 1):
            dt = config.dt if step < n_steps else dt_last
            rhs0 = rhs_fn(state)
            if dt * rhs0.inf_norm > config.cfl_cap:
                raise SolverAbort("cfl", state.time, step)
            if dt == config.dt:
                state = stepper(state, dt, prop, rhs_fn, rhs0)
            else:
                state = stepper(state, dt, None, rhs_fn, rhs0)
            state = replace(state, time=initial.time + min(step * config.dt, span))
            if not np.isfinite(state.u.coeffs).all() or not np.isfinite(state.tau.coeffs).all():
                raise SolverAbort("nan", state.time, step)
            if step % config.diagnostics_every == 0 or step == n_steps:
                times.append(state.time)
                rows.append(diagnostics_row(state))
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                checkpoint(state, f"step{step:08d}")
    except SolverAbort as abort:
        checkpoint(state, "failure")
        if writer is not None:
            writer.emit_report(
                {
                    "status": "aborted",
                    "reason": abort.reason,
                    "time": abort.time,
                    "step": abort.step,
                },
                writer.report_path(out_dir, "failure"),
            )
        raise
    checkpoint(state, "final")
    columns = {name: np.array([r[name] for r in rows]) for name in SCHEMA_COLUMNS}
    return TimeSeries(np.array(times), columns)


# -- initial data -------------------------------------------------------------

def random_band_fields(
    grid: FourierGrid,
    k_lo: float,
    k_hi: float,
    amplitude: float,
    seed: int,
    trace_free: bool = True,
) -> tuple[SpectralVectorField, SpectralTensorField]:
    """Random solenoidal velocity and symmetric stress in a spectral band.

    Every retained mode with k_lo <= |k| <= k_hi gets an independent complex
    Gaussian amplitude; the pair is normalized so each field's H^2 norm
    equals ``amplitude``.
    """
    if not 0 < k_lo < k_hi:
        raise ValueError("need 0 < k_lo < k_hi")
    rng = np.random.default_rng(seed)
    band = (grid.k_mag >= k_lo) & (grid.k_mag <= k_hi) & grid.dealias_mask

    u_c = rng.standard_normal(grid.shape(3)) + 1j * rng.standard_normal(grid.shape(3))
    tau_c = rng.standard_normal(grid.shape(6)) + 1j * rng.standard_normal(grid.shape(6))
    u_c *= band
    tau_c *= band
    u_c = hermitianize(u_c)
    tau_c = hermitianize(tau_c)
    if trace_free:
        trace = (tau_c[0] + tau_c[1] + tau_c[2]) / 3.0
        for i in range(3):
            tau_c[i] -= trace

    from .spectral import leray_project

    u = leray_project(SpectralVectorField(grid, u_c))
    tau = SpectralTensorField(grid, tau_c)
    u_h2 = math.sqrt(sum(sobolev_seminorm(u, k) for k in (0, 1, 2)))
    tau_h2 = math.sqrt(sum(sobolev_seminorm(tau, k) for k in (0, 1, 2)))
    u = SpectralVectorField(grid, u.coeffs * (amplitude / u_h2))
    tau = SpectralTensorField(grid, tau.coeffs * (amplitude / tau_h2))
    return u, tau


def fields_from_profiles(
    grid: FourierGrid,
    u_profile=None,
    tau_profile=None,
    u_amplitude: float = 1.0,
    tau_amplitude: float = 1.0,
) -> tuple[SpectralVectorField, SpectralTensorField]:
    """Lattice initial data sampled from radial profiles.

    The velocity uses the projected fixed-axis pattern and the stress the
    constant tensor pattern, both real and even in k, hence Hermitian.
    """
    from .decay import DEFAULT_AXIS, DEFAULT_TENSOR

    kmag = grid.k_mag
    mask = grid.dealias_mask & (kmag > 0)
    u_c = np.zeros(grid.shape(3), dtype=np.complex128)
    tau_c = np.zeros(grid.shape(6), dtype=np.complex128)
    if u_profile is not None:
        law = np.where(mask, u_profile.law(np.where(mask, kmag, 1.0)), 0.0)
        axis = (u_profile.angular_param if u_profile.angular == "solenoidal_axis"
                else DEFAULT_AXIS)
        k = grid.wavenumbers
        inv = np.zeros_like(kmag)
        inv[mask] = 1.0 / kmag[mask]
        sigma = k * inv[None]
        sa = np.einsum("i,i...->...", axis, sigma)
        for i in range(3):
            u_c[i] = u_amplitude * law * (axis[i] - sigma[i] * sa)
    if tau_profile is not None:
        law = np.where(mask, tau_profile.law(np.where(mask, kmag, 1.0)), 0.0)
        pattern = (tau_profile.angular_param if tau_profile.angular == "constant_tensor"
                   else DEFAULT_TENSOR)
        for c, (j, l) in enumerate(SYM_COMPONENTS):
            tau_c[c] = tau_amplitude * law * pattern[j, l]
    return SpectralVectorField(grid, u_c), SpectralTensorField(grid, tau_c)
