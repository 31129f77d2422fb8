"""Localized energy functional, remainder quadratic form and decay fits.

The Lyapunov functional attaches to each soliton a moving window built from
a smooth monotone cutoff Psi and combines energy, mass and momentum so that
its leading variation around the soliton sum is the quadratic form H(eps).
Near-conservation of the functional plus coercivity of H is what controls
the remainder, and this module exposes every term of that chain as a
measurable quantity.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import FitFailure, InvalidArgument
from .ground_state import GroundState
from .modulation import ModulationState, _profile_arrays
from .spectral_grid import Field, derivative_array


def _smoothstep(s):
    """Quintic smoothstep: S(0)=0, S(1)=1, (S')^2 <= C S, (S'')^2 <= C S'."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _smoothstep_d1(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 30.0 * s**2 * (1.0 - s) ** 2, 0.0)


def _smoothstep_d3(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 60.0 * (1.0 - 6.0 * s + 6.0 * s**2), 0.0)


@dataclass
class LocalizationSet:
    """Partition of unity traveling with the soliton package.

    Solitons are ranked by velocity; the cutoff between consecutive pairs
    sits at the average velocity and has width A0 = min gap / 4.  For K = 1
    the single window is identically one.
    """

    params: list
    order: np.ndarray = field(init=False)
    cuts: np.ndarray = field(init=False)
    A0: float = field(init=False)

    def __post_init__(self):
        vs = np.array([p.v for p in self.params])
        self.order = np.argsort(vs)
        v_sorted = vs[self.order]
        if len(self.params) > 1:
            gaps = np.diff(v_sorted)
            if np.min(gaps) <= 0:
                raise InvalidArgument("localization needs distinct velocities")
            self.A0 = 0.25 * float(np.min(gaps))
            self.cuts = 0.5 * (v_sorted[:-1] + v_sorted[1:])
        else:
            self.A0 = 1.0
            self.cuts = np.array([])

    @property
    def K(self):
        return len(self.params)

    def psi(self, y):
        return _smoothstep((y + self.A0) / (2.0 * self.A0))

    def _steps(self, t, x):
        """Psi((x - cut t)/t) for each cut, stacked."""
        return np.array([self.psi((x - c * t) / t) for c in self.cuts])

    def windows_sorted(self, t, x):
        """phi_k arrays in velocity order, shape (K, len(x)); sums to 1."""
        if t < 1.0:
            raise InvalidArgument(f"localization requires t >= 1, got {t}")
        K = self.K
        if K == 1:
            return np.ones((1, np.size(x)))
        steps = self._steps(t, x)
        phis = np.empty((K, np.size(x)))
        phis[0] = 1.0 - steps[0]
        for j in range(1, K - 1):
            phis[j] = steps[j - 1] - steps[j]
        phis[K - 1] = steps[K - 2]
        return phis

    def windows(self, t, x):
        """phi_k arrays aligned with the original soliton order."""
        srt = self.windows_sorted(t, x)
        out = np.empty_like(srt)
        out[self.order] = srt
        return out

    def derivative_bound_constant(self, t, x):
        """max over k, x of t * (|d_x phi| + |d_x^3 phi| + |d_t phi|)."""
        if self.K == 1:
            return 0.0
        scale = 1.0 / (2.0 * self.A0)
        worst = 0.0
        for c in self.cuts:
            s = (((x - c * t) / t) + self.A0) * scale
            d1 = _smoothstep_d1(s) * scale / t
            d3 = _smoothstep_d3(s) * scale**3 / t**3
            dt_ = _smoothstep_d1(s) * scale * np.abs(x) / t**2
            worst = max(worst, float(np.max(np.abs(d1) + np.abs(d3) + dt_)) * t)
        return worst

    def cutoff_inequality_constants(self, n=40001):
        """Fitted C in (Psi')^2 <= C Psi and (Psi'')^2 <= C Psi' on a fine grid."""
        s = np.linspace(1e-9, 1.0 - 1e-9, n)
        v = _smoothstep(s)
        d1 = _smoothstep_d1(s)
        d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
        scale = 1.0 / (2.0 * self.A0)
        c1 = np.max((d1 * scale) ** 2 / np.maximum(v, 1e-300))
        c2 = np.max((d2 * scale**2) ** 2 / np.maximum(d1 * scale, 1e-300))
        return float(c1), float(c2)


def lyapunov(u: Field, t: float, locs: LocalizationSet, params, p: float) -> float:
    """Localized energy-mass-momentum functional of the field at time t."""
    if t < 1.0:
        raise InvalidArgument(f"lyapunov requires t >= 1, got {t}")
    grid = u.grid
    h = grid.spacing
    du = derivative_array(grid, u.values, 1)
    total = float(np.sum(np.abs(du) ** 2) * h)
    total -= 2.0 / (p + 1.0) * float(np.sum(np.abs(u.values) ** (p + 1.0)) * h)
    phis = locs.windows(t, grid.x)
    dens = np.abs(u.values) ** 2
    mom = np.imag(du * np.conj(u.values))
    for k, par in enumerate(params):
        total += (par.w**-2 + par.v**2 / 4.0) * float(np.sum(dens * phis[k]) * h)
        total -= par.v * float(np.sum(mom * phis[k]) * h)
    return total


def quadratic_H(state: ModulationState, locs: LocalizationSet, params,
                Q: GroundState) -> float:
    """Quadratic part of the functional along the remainder direction."""
    grid = state.epsilon.grid
    h = grid.spacing
    eps = state.epsilon.values
    deps = derivative_array(grid, eps, 1)
    p = Q.p
    total = float(np.sum(np.abs(deps) ** 2) * h)
    phis = locs.windows(max(state.t, 1.0), grid.x)
    dens = np.abs(eps) ** 2
    mom = np.imag(deps * np.conj(eps))
    for k, par in enumerate(params):
        prof, _ = _profile_arrays(grid, par, Q, state.t, state.alpha[k], state.theta[k])
        mag = np.abs(prof)
        re_cross = np.real(prof * np.conj(eps))
        total -= float(np.sum(mag ** (p - 1.0) * dens) * h)
        total -= (p - 1.0) * float(np.sum(mag ** (p - 3.0) * re_cross**2) * h)
        total += (par.w**-2 + par.v**2 / 4.0) * float(np.sum(dens * phis[k]) * h)
        total -= par.v * float(np.sum(mom * phis[k]) * h)
    return total


def remainder_control_report(states, tube, noise=None, aminus_target=None,
                             delta1=0.25, delta2=2.0, p=6.0):
    """Term-by-term budget of the remainder bound along a trajectory.

    For each sample time t the bound reads (constants dropped)

        ||eps(t)||^2 <~ int_t (1/s + B_*) ||eps||^2 + (int_t ||eps||^min(p,2))^2
                        + int_t B_* phi(delta1 s) + (int_t B_* phi)^2
                        + |a^-(t)|^2 + |a^-(end)|^2 + exp(-delta2 t)

    and the report returns every term plus the fitted domination constant
    max_t ||eps(t)||^2 / sum(terms).
    """
    ts = np.array([s.t for s in states])
    order = np.argsort(ts)
    ts = ts[order]
    sts = [states[i] for i in order]
    eps2 = np.array([s.eps_h1**2 for s in sts])
    eps_pcap = np.array([s.eps_h1 ** min(p, 2.0) for s in sts])
    bstar = np.array([noise.B_star_at(t) for t in ts]) if noise is not None else np.zeros_like(ts)
    phi_vals = tube.phi(tube.delta_tilde * ts)
    am2 = np.array([float(np.sum(s.a_minus**2)) for s in sts])
    target2 = am2[-1] if aminus_target is None else float(np.sum(np.asarray(aminus_target) ** 2))

    def tail_int(vals):
        out = np.zeros_like(vals)
        for i in range(len(ts) - 2, -1, -1):
            out[i] = out[i + 1] + 0.5 * (vals[i] + vals[i + 1]) * (ts[i + 1] - ts[i])
        return out

    t1 = tail_int((1.0 / ts + bstar) * eps2)
    t2 = tail_int(eps_pcap) ** 2
    t3 = tail_int(bstar * phi_vals)
    terms = {
        "weighted_eps_sq_integral": t1,
        "eps_pcap_integral_sq": t2,
        "noise_decay_integral": t3,
        "noise_decay_integral_sq": t3**2,
        "aminus_sq": am2 + target2,
        "exp_tail": np.exp(-delta2 * ts),
    }
    total = sum(terms.values())
    ratio = eps2 / np.maximum(total, 1e-300)
    return {"t": ts, "eps_h1_sq": eps2, "terms": terms,
            "domination_constant": float(np.max(ratio)), "ratio": ratio}


def decay_fit(ts, errs, case: str, min_samples=10, prefactor_power=0.0):
    """Least-squares decay fit of an error series.

    Case 'I': slope of log err vs t (exponential rate).  Case 'II': exponent
    of log err vs log t.  ``prefactor_power`` divides out a known t^q factor
    first (the convergence bound carries a linear-in-t prefactor).  Returns
    (rate_or_exponent, constant, rms_residual).
    """
    ts = np.asarray(ts, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if prefactor_power != 0.0:
        errs = errs / ts**prefactor_power
    mask = errs > 1e-12
    if case == "II" or prefactor_power != 0.0:
        mask &= ts > 0
    if np.sum(mask) < min_samples:
        raise FitFailure(
            f"need >= {min_samples} samples with err > 1e-12, got {np.sum(mask)}"
        )
    xs = ts[mask] if case == "I" else np.log(ts[mask])
    ys = np.log(errs[mask])
    if np.ptp(xs) == 0:
        raise FitFailure("degenerate fit window")
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
    return float(slope), float(np.exp(intercept)), residual
