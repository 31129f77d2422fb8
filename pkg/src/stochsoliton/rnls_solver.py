"""Time integration of the transformed equation, forward and backward.

The equation is

    i du/dt + (d^2/dx^2 + b_* d/dx + c_*) u + |u|^{p-1} u = 0,

with the purely imaginary first-order coefficient b_* and the zero-order c_*
supplied by a noise realization (both vanish without noise).

Two schemes:

* StrangSplit: exact Fourier flow for the Laplacian, wrapped around the
  non-stiff remainder.  Without noise the remainder is a pointwise phase
  rotation and is applied exactly, which makes the step time-symmetric and
  mass-preserving to roundoff; with noise the remainder is advanced by one
  explicit midpoint (RK2) step with coefficients frozen at the substep
  midpoint time.
* RK4Spectral: classical RK4 on the full right-hand side; dispersion limits
  the step to dt <= cfl_guard * spacing^2.

Both support dt < 0 (backward integration from final data).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalBlowup
from .spectral_grid import Field

BLOWUP_SUP = 1e3


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    scheme: str = "StrangSplit"
    cfl_guard: float = 0.25
    p: float = 6.0

    def __post_init__(self):
        if self.scheme not in ("StrangSplit", "RK4Spectral"):
            raise InvalidArgument(f"unknown scheme {self.scheme!r}")
        if self.dt <= 0:
            raise InvalidArgument("dt must be positive")
        if self.scheme == "StrangSplit" and self.dt > 0.1:
            raise InvalidArgument("StrangSplit requires dt <= 0.1")

    def validate_for_grid(self, grid):
        if self.scheme == "RK4Spectral" and self.dt > self.cfl_guard * grid.spacing**2:
            raise InvalidArgument(
                f"RK4Spectral requires dt <= cfl_guard * spacing^2 = "
                f"{self.cfl_guard * grid.spacing**2:.3e}, got {self.dt}"
            )


def _check_finite(vals, t):
    amax = np.max(np.abs(vals))
    if not np.isfinite(amax) or amax > BLOWUP_SUP:
        raise NumericalBlowup(f"sup |u| = {amax} at t = {t}", time=t)


def _rhs_array(grid, vals, t, noise, p):
    k = grid.wavenumbers
    spec = np.fft.fft(vals)
    lap = np.fft.ifft(-(k**2) * spec)
    if noise is None:
        return 1j * (lap + np.abs(vals) ** (p - 1.0) * vals)
    du = np.fft.ifft(1j * k * spec)
    b, c = noise.b_c_arrays(t, grid)
    return 1j * (lap + b * du + c * vals + np.abs(vals) ** (p - 1.0) * vals)


def rhs(u: Field, t: float, noise, p: float = 6.0) -> Field:
    """du/dt = i (u_xx + b_* u_x + c_* u + |u|^{p-1} u)."""
    out = _rhs_array(u.grid, u.values, t, noise, p)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowup(f"non-finite right-hand side at t = {t}", time=t)
    return Field(u.grid, out)


def _step_strang(grid, vals, t, dt, noise, p):
    half_kinetic = np.exp(-1j * grid.wavenumbers**2 * (dt / 2.0))
    vals = np.fft.ifft(half_kinetic * np.fft.fft(vals))
    if noise is None:
        # remainder is i|u|^{p-1}u: |u| is pointwise invariant, rotate exactly
        vals = vals * np.exp(1j * np.abs(vals) ** (p - 1.0) * dt)
    else:
        tm = t + dt / 2.0
        b, c = noise.b_c_arrays(tm, grid)
        k = grid.wavenumbers

        def f(v):
            dv = np.fft.ifft(1j * k * np.fft.fft(v))
            return 1j * (b * dv + c * v + np.abs(v) ** (p - 1.0) * v)

        mid = vals + (dt / 2.0) * f(vals)
        vals = vals + dt * f(mid)
    return np.fft.ifft(half_kinetic * np.fft.fft(vals))


def _step_rk4(grid, vals, t, dt, noise, p):
    k1 = _rhs_array(grid, vals, t, noise, p)
    k2 = _rhs_array(grid, vals + 0.5 * dt * k1, t + 0.5 * dt, noise, p)
    k3 = _rhs_array(grid, vals + 0.5 * dt * k2, t + 0.5 * dt, noise, p)
    k4 = _rhs_array(grid, vals + dt * k3, t + dt, noise, p)
    return vals + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_array(grid, vals, t, dt_signed, noise, config):
    if config.scheme == "StrangSplit":
        out = _step_strang(grid, vals, t, dt_signed, noise, config.p)
    else:
        out = _step_rk4(grid, vals, t, dt_signed, noise, config.p)
    _check_finite(out, t + dt_signed)
    return out


def step(u: Field, t: float, dt_signed: float, noise, config: SolverConfig) -> Field:
    """One step of the configured scheme; dt_signed < 0 integrates backward."""
    if abs(dt_signed) > config.dt * (1.0 + 1e-12):
        raise InvalidArgument(f"|dt_signed| = {abs(dt_signed)} exceeds config.dt = {config.dt}")
    if noise is not None:
        horizon = noise.horizon
        if not (0.0 <= min(t, t + dt_signed) and max(t, t + dt_signed) <= horizon + 1e-9):
            raise InvalidArgument("step leaves the noise horizon")
    config.validate_for_grid(u.grid)
    return Field(u.grid, step_array(u.grid, u.values, t, dt_signed, noise, config))


def evolve(u0: Field, t0: float, t1: float, noise, config: SolverConfig,
           observer=None, cadence: float | None = None) -> Field:
    """Repeated stepping from t0 to t1 (either direction).

    The observer is called as observer(t, u) at t0, at every cadence
    crossing (hit exactly by shortening the final step of each segment) and
    at t1.  Returns the final field.
    """
    if t0 == t1:
        if observer is not None:
            observer(t0, u0)
        return u0
    config.validate_for_grid(u0.grid)
    grid = u0.grid
    vals = u0.values.copy()
    direction = 1.0 if t1 > t0 else -1.0

    if observer is not None and cadence is not None and cadence > 0:
        n_samples = int(round(abs(t1 - t0) / cadence))
        if abs(n_samples * cadence - abs(t1 - t0)) > 1e-9:
            targets = list(t0 + direction * cadence * np.arange(1, n_samples + 1))
            targets.append(t1)
        else:
            targets = list(t0 + direction * cadence * np.arange(1, n_samples)) + [t1]
    else:
        targets = [t1]

    if observer is not None:
        observer(t0, Field(grid, vals))
    t = t0
    try:
        for target in targets:
            span = abs(target - t)
            n_steps = max(1, int(np.ceil(span / config.dt - 1e-12)))
            dt = direction * span / n_steps
            for _ in range(n_steps):
                vals = step_array(grid, vals, t, dt, noise, config)
                t += dt
            t = target
            if observer is not None:
                observer(t, Field(grid, vals))
    except NumericalBlowup as exc:
        raise NumericalBlowup(f"blow-up during evolve: {exc}", time=exc.time) from exc
    return Field(grid, vals)


def to_physical(u: Field, noise, t: float) -> Field:
    """Undo the gauge transform: X = exp(W_*(t, .)) u, |X| = |u| pointwise."""
    if noise is None:
        return u
    w = noise.w_array(t, u.grid)
    return Field(u.grid, np.exp(w) * u.values)


def mass(u: Field) -> float:
    return float(np.sum(np.abs(u.values) ** 2) * u.grid.spacing)
