"""Geometric decomposition u = sum_k R~_k + eps and the unstable projections.

Given a field close to a sum of modulated solitons, Newton iteration on the
2K orthogonality residuals

    Re int dR~_k/dx conj(eps) dx = 0,   Im int R~_k conj(eps) dx = 0,

fixes the translation and phase parameters (alpha_k, theta_k) uniquely in a
neighborhood of the soliton sum.  The leading Jacobian is block diagonal
with per-soliton blocks

    [[ ||dQ_w/dx||^2,  -(v/2) ||Q_w||^2 ],
     [       0      ,       ||Q_w||^2   ]]

up to O(||eps||) corrections; a finite-difference refresh every few
iterations covers the correction terms.  After convergence the unstable
directions a_k^± = Im int Y~_k^± conj(eps) dx are read off against the
modulated, rescaled eigenfunctions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DecompositionFailure, DomainExceeded, InvalidArgument, OutOfBasin
from .ground_state import GroundState, SolitonParams, check_center_in_range
from .linearized_spectrum import Eigenpair
from .spectral_grid import Field, h1_norm_array, shift_real_spectrum


@dataclass
class ModulationState:
    """Decomposed field at one time: parameters, remainder and projections."""

    t: float
    alpha: np.ndarray    # (K,)
    theta: np.ndarray    # (K,)
    epsilon: Field
    a_plus: np.ndarray   # (K,)
    a_minus: np.ndarray  # (K,)
    eps_h1: float

    @property
    def K(self):
        return self.alpha.size


def _phase(grid, par: SolitonParams, t, theta):
    return np.exp(
        1j * (0.5 * par.v * grid.x - 0.25 * par.v**2 * t + t / par.w**2 + theta)
    )


def _profile_arrays(grid, par, Q, t, alpha, theta, want_derivative=False):
    sc = Q.scaled(par.w)
    s = par.v * t + alpha
    ph = _phase(grid, par, t, theta)
    prof = shift_real_spectrum(grid, sc["qw_rfft"], s) * ph
    if not want_derivative:
        return prof, None
    dprof = shift_real_spectrum(grid, sc["dqw_rfft"], s) * ph + 0.5j * par.v * prof
    return prof, dprof


def modulated_profile(k, alpha_k, theta_k, t, params, Q: GroundState) -> Field:
    """R~_k with modulated center and phase; reduces to the soliton at
    (alpha0, theta0)."""
    par = params[k]
    center = par.v * t + alpha_k
    check_center_in_range(Q.grid, center)
    prof, _ = _profile_arrays(Q.grid, par, Q, t, alpha_k, theta_k)
    return Field(Q.grid, prof)


def _eigenfunction_arrays(grid, par, eig, t, alpha, theta):
    sc = eig.scaled(par.w)
    s = par.v * t + alpha
    y1 = shift_real_spectrum(grid, sc["y1w_rfft"], s)
    y2 = shift_real_spectrum(grid, sc["y2w_rfft"], s)
    return y1, y2, _phase(grid, par, t, theta)


def modulated_eigenfunction(k, sign, alpha_k, theta_k, t, params, eig: Eigenpair) -> Field:
    """Y~_k^± : rescaled eigenfunction, boosted and phased like R~_k."""
    if sign not in (+1, -1):
        raise InvalidArgument(f"sign must be +-1, got {sign}")
    par = params[k]
    check_center_in_range(eig.grid, par.v * t + alpha_k)
    y1, y2, ph = _eigenfunction_arrays(eig.grid, par, eig, t, alpha_k, theta_k)
    return Field(eig.grid, (y1 + 1j * sign * y2) * ph)


def _projections(grid, eps, params, eig, t, alpha, theta):
    h = grid.spacing
    K = len(params)
    a_plus = np.empty(K)
    a_minus = np.empty(K)
    ceps = np.conj(eps)
    for k, par in enumerate(params):
        y1, y2, ph = _eigenfunction_arrays(grid, par, eig, t, alpha[k], theta[k])
        base = ph * ceps
        re_part = np.sum(y1 * base)
        im_part = np.sum(y2 * base)
        a_plus[k] = (re_part + 1j * im_part).imag * h
        a_minus[k] = (re_part - 1j * im_part).imag * h
    return a_plus, a_minus


def unstable_directions(state: ModulationState, eig: Eigenpair, params):
    """a_k^± = Im int Y~_k^± conj(eps) dx for the decomposed state."""
    grid = state.epsilon.grid
    return _projections(
        grid, state.epsilon.values, params, eig, state.t, state.alpha, state.theta
    )


def _residuals(grid, u, params, Q, t, alpha, theta):
    h = grid.spacing
    K = len(params)
    profs = []
    dprofs = []
    for k, par in enumerate(params):
        prof, dprof = _profile_arrays(grid, par, Q, t, alpha[k], theta[k], True)
        profs.append(prof)
        dprofs.append(dprof)
    eps = u - np.sum(profs, axis=0)
    r = np.empty(2 * K)
    ceps = np.conj(eps)
    for k in range(K):
        r[2 * k] = np.real(np.sum(dprofs[k] * ceps)) * h
        r[2 * k + 1] = np.imag(np.sum(profs[k] * ceps)) * h
    return r, eps


def _leading_jacobian(params, Q):
    K = len(params)
    jac = np.zeros((2 * K, 2 * K))
    for k, par in enumerate(params):
        sc = Q.scaled(par.w)
        jac[2 * k, 2 * k] = sc["dl2sq"]
        jac[2 * k, 2 * k + 1] = -0.5 * par.v * sc["l2sq"]
        jac[2 * k + 1, 2 * k + 1] = sc["l2sq"]
    return jac


def _fd_jacobian(grid, u, params, Q, t, alpha, theta, h_fd=1e-7):
    K = len(params)
    jac = np.empty((2 * K, 2 * K))
    base, _ = _residuals(grid, u, params, Q, t, alpha, theta)
    for j in range(K):
        da = alpha.copy()
        da[j] += h_fd
        ra, _ = _residuals(grid, u, params, Q, t, da, theta)
        jac[:, 2 * j] = (ra - base) / h_fd
        dth = theta.copy()
        dth[j] += h_fd
        rt, _ = _residuals(grid, u, params, Q, t, alpha, dth)
        jac[:, 2 * j + 1] = (rt - base) / h_fd
    return jac


def default_proximity_radius(params, Q):
    """0.3 min_k ||Q_{w_k}||_{H1}: an empirically safe Newton basin."""
    vals = []
    for par in params:
        sc = Q.scaled(par.w)
        vals.append(np.sqrt(sc["l2sq"] + sc["dl2sq"]))
    return 0.3 * min(vals)


def decompose(u: Field, t: float, guess, params, Q: GroundState, eig: Eigenpair,
              newton_tol=1e-11, max_iter=50, proximity=None) -> ModulationState:
    """Fix (alpha_k, theta_k) by the orthogonality conditions; extract eps, a^±.

    ``guess`` is an (alpha, theta) pair of length-K sequences inside the
    Newton basin (along a trajectory: the previous sample's parameters).
    Raises OutOfBasin when u is too far from the modulated sum at the guess
    and DecompositionFailure when Newton stalls (tube exit signal).
    """
    grid = u.grid
    if eig.grid != grid or Q.grid != grid:
        raise InvalidArgument("u, Q and eig must share one grid")
    alpha = np.array(guess[0], dtype=float).copy()
    theta = np.array(guess[1], dtype=float).copy()
    K = len(params)
    if alpha.shape != (K,) or theta.shape != (K,):
        raise InvalidArgument("guess must provide alpha, theta per soliton")

    u_h1 = h1_norm_array(grid, u.values)
    tol = newton_tol * (1.0 + u_h1)

    r, eps = _residuals(grid, u.values, params, Q, t, alpha, theta)
    radius = default_proximity_radius(params, Q) if proximity is None else proximity
    if h1_norm_array(grid, eps) > radius:
        raise OutOfBasin(
            f"||u - R~(guess)||_H1 = {h1_norm_array(grid, eps):.3e} exceeds "
            f"proximity radius {radius:.3e} at t = {t}"
        )

    jac = _leading_jacobian(params, Q)
    history = [float(np.max(np.abs(r)))]
    for it in range(max_iter):
        if history[-1] <= tol:
            break
        if it > 0 and it % 5 == 0:
            jac = _fd_jacobian(grid, u.values, params, Q, t, alpha, theta)
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise DecompositionFailure(f"singular Jacobian at t = {t}", history) from exc
        # damped update: backtrack if the residual grows
        scale = 1.0
        for _ in range(5):
            na = alpha + scale * delta[0::2]
            nth = theta + scale * delta[1::2]
            nr, neps = _residuals(grid, u.values, params, Q, t, na, nth)
            if np.max(np.abs(nr)) < history[-1] or scale < 0.2:
                break
            scale *= 0.5
        alpha, theta, r, eps = na, nth, nr, neps
        history.append(float(np.max(np.abs(r))))
    if history[-1] > tol:
        raise DecompositionFailure(
            f"orthogonality residuals did not reach {tol:.2e} at t = {t}; "
            f"history tail {history[-3:]}", history
        )

    a_plus, a_minus = _projections(grid, eps, params, eig, t, alpha, theta)
    return ModulationState(
        t=t, alpha=alpha, theta=theta,
        epsilon=Field(grid, eps),
        a_plus=a_plus, a_minus=a_minus,
        eps_h1=h1_norm_array(grid, eps),
    )


# ---------------------------------------------------------------------------
# Finite-difference diagnostics along a trajectory slice


def _centered_rates(ts, series):
    ts = np.asarray(ts, dtype=float)
    series = np.asarray(series, dtype=float)
    out = np.empty_like(series)
    out[1:-1] = (series[2:] - series[:-2]) / (ts[2:] - ts[:-2])[:, None]
    out[0] = (series[1] - series[0]) / (ts[1] - ts[0])
    out[-1] = (series[-1] - series[-2]) / (ts[-1] - ts[-2])
    return out


def modulation_residual(states, noise=None, delta1=0.25, delta2=2.0, phi=None):
    """Finite-difference parameter velocities against their predicted bound.

    Returns per-sample sum_k (|alpha_dot_k| + |theta_dot_k|), the bound
    ||eps||_H1 + B_* phi(delta1 t) + exp(-delta2 t) and their ratio, whose
    boundedness realizes the modulation-equation estimate.
    """
    if len(states) < 3:
        raise InvalidArgument("need at least 3 consecutive states")
    ts = np.array([s.t for s in states])
    alphas = np.array([s.alpha for s in states])
    thetas = np.array([s.theta for s in states])
    adot = _centered_rates(ts, alphas)
    thdot = _centered_rates(ts, thetas)
    lhs = np.sum(np.abs(adot), axis=1) + np.sum(np.abs(thdot), axis=1)
    phi = phi or (lambda s: np.exp(-np.abs(s)))
    eps_h1 = np.array([s.eps_h1 for s in states])
    bstar = np.array([noise.B_star_at(t) for t in ts]) if noise is not None else np.zeros_like(ts)
    bound = eps_h1 + bstar * phi(delta1 * ts) + np.exp(-delta2 * ts)
    return {
        "t": ts,
        "alpha_dot": adot,
        "theta_dot": thdot,
        "lhs": lhs,
        "bound": bound,
        "ratio": lhs / bound,
    }


def aminus_ode_residual(states, eig: Eigenpair, params, noise=None,
                        delta1=0.25, delta2=2.0, phi=None):
    """Residual of the unstable-direction ODE against its predicted bound.

    Checks |da^±/dt -+ e0 w_k^{-2} a^±| <= C (||eps||^min(p,2) + noise + tail)
    and reports the per-sample ratios.
    """
    if len(states) < 3:
        raise InvalidArgument("need at least 3 consecutive states")
    ts = np.array([s.t for s in states])
    ap = np.array([s.a_plus for s in states])
    am = np.array([s.a_minus for s in states])
    apdot = _centered_rates(ts, ap)
    amdot = _centered_rates(ts, am)
    rates = np.array([eig.e0 / par.w**2 for par in params])
    res_plus = np.abs(apdot - rates[None, :] * ap)
    res_minus = np.abs(amdot + rates[None, :] * am)
    phi = phi or (lambda s: np.exp(-np.abs(s)))
    p_cap = min(eig.p, 2.0)
    eps_h1 = np.array([s.eps_h1 for s in states])
    bstar = np.array([noise.B_star_at(t) for t in ts]) if noise is not None else np.zeros_like(ts)
    bound = eps_h1**p_cap + bstar * phi(delta1 * ts) + np.exp(-delta2 * ts)
    return {
        "t": ts,
        "residual_plus": res_plus,
        "residual_minus": res_minus,
        "bound": bound,
        "ratio_plus": res_plus / bound[:, None],
        "ratio_minus": res_minus / bound[:, None],
    }
