"""Multi-soliton construction by backward integration and shooting.

The approximating problem prescribes final data at a large time n,

    u(n) = R(n) + i sum_{k,±} b_k^± Y_k^±(n),

and integrates backward while the trajectory stays inside a tube of bounds
shaped by the noise decay function phi:

    ||eps||_H1 <= phi^(1/2)(dt~ t),      |a^+| <= phi^(1/2)(dt~ t),
    |a^-| <= phi^(3/4)(dt~ t),           sum_k |P_k - P_k^0| <= t phi^(1/2)(dt~ t),

(d = 1, all bounds carry a configurable slack factor).  The perturbation
vector b is chosen so the unstable projections at time n hit a prescribed
target; the backward-stable direction a^- is then controlled by shooting:
the target is adjusted by root finding on the exit map, replacing the
topological fixed-point argument with a constructive bracketing/Newton
search that exploits the known backward growth rate e0 / w_k^2 of a^-.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import LocalizationSet, lyapunov
from .errors import (
    DecompositionFailure,
    InvalidArgument,
    ModulatedDataFailure,
    NumericalBlowup,
    ShootingFailure,
)
from .ground_state import GroundState, SolitonParams, check_distinct_velocities, soliton_sum
from .linearized_spectrum import Eigenpair
from .modulation import (
    ModulationState,
    _eigenfunction_arrays,
    decompose,
    default_proximity_radius,
)
from .rnls_solver import SolverConfig, evolve, mass
from .spectral_grid import Field, Grid, h1_norm_array


@dataclass(frozen=True)
class TubeSpec:
    """Time-dependent bootstrap bounds with decay function phi.

    case 'I': phi(s) = exp(-|s|); case 'II': phi(s) = |s|^(-nu_star).
    The exponent of the a^- bound is 1/2 + 1/(4d) = 3/4 in d = 1.
    """

    delta_tilde: float
    case: str = "I"
    nu_star: float = 8.0
    slack: float = 4.0

    def __post_init__(self):
        if self.delta_tilde <= 0:
            raise InvalidArgument(f"delta_tilde must be positive, got {self.delta_tilde}")
        if self.case not in ("I", "II"):
            raise InvalidArgument(f"case must be 'I' or 'II', got {self.case!r}")

    def phi(self, s):
        if self.case == "I":
            return np.exp(-np.abs(s))
        return np.abs(s) ** (-self.nu_star)

    def eps_bound(self, t):
        return self.slack * self.phi(self.delta_tilde * t) ** 0.5

    def aplus_bound(self, t):
        return self.slack * self.phi(self.delta_tilde * t) ** 0.5

    def aminus_bound(self, t):
        return self.slack * self.phi(self.delta_tilde * t) ** 0.75

    def param_bound(self, t):
        return self.slack * t * self.phi(self.delta_tilde * t) ** 0.5

    def n_functional(self, t, a_minus):
        """N(t, a^-) = |phi^(-3/4)(dt~ t) a^-(t)|^2; equals 1 on the sphere."""
        scale = self.phi(self.delta_tilde * t) ** (-0.75)
        return float(np.sum((scale * np.asarray(a_minus)) ** 2))


@dataclass
class MultiSolitonProblem:
    """Everything one construction needs: profiles, spectrum, noise, solver."""

    params: list
    Q: GroundState
    eig: Eigenpair
    config: SolverConfig
    noise: object = None

    def __post_init__(self):
        check_distinct_velocities(self.params)
        if self.eig.grid != self.Q.grid:
            raise InvalidArgument("eigenpair must be upsampled to the ground-state grid")

    @property
    def grid(self) -> Grid:
        return self.Q.grid

    @property
    def K(self):
        return len(self.params)

    def alpha0(self):
        return np.array([p.alpha0 for p in self.params])

    def theta0(self):
        return np.array([p.theta0 for p in self.params])

    def soliton_sum_values(self, t):
        return soliton_sum(self.params, self.Q, t, self.grid)

    def growth_rates(self):
        return np.array([self.eig.e0 / p.w**2 for p in self.params])


def overlap_decay_rate(params, Q: GroundState, window=(5.0, 15.0), n_samples=21):
    """Fitted exponential rate of the pairwise profile overlap in time.

    Realizes the decoupling of distinct-velocity profiles; returns the
    smallest fitted rate over pairs (infinity for a single soliton).
    """
    K = len(params)
    if K < 2:
        return np.inf
    grid = Q.grid
    h = grid.spacing
    ts = np.linspace(window[0], window[1], n_samples)
    worst = np.inf
    from .spectral_grid import shift_real_spectrum

    for i in range(K):
        for j in range(i + 1, K):
            vals = []
            for t in ts:
                a = np.abs(shift_real_spectrum(
                    grid, Q.scaled(params[i].w)["qw_rfft"], params[i].v * t + params[i].alpha0))
                b = np.abs(shift_real_spectrum(
                    grid, Q.scaled(params[j].w)["qw_rfft"], params[j].v * t + params[j].alpha0))
                vals.append(np.sum(a * b) * h)
            slope = np.polyfit(ts, np.log(np.maximum(vals, 1e-300)), 1)[0]
            worst = min(worst, -float(slope))
    return worst


def decay_exponents(problem: MultiSolitonProblem, delta1=None, delta2=None):
    """(delta1, delta2, delta3): noise travel rate, decoupling rate, e0-rate."""
    if delta1 is None:
        vmin = min(abs(p.v) for p in problem.params)
        delta1 = vmin / 4.0
    if delta2 is None:
        delta2 = overlap_decay_rate(problem.params, problem.Q)
    delta3 = 0.5 * float(np.min(problem.growth_rates()))
    return delta1, delta2, delta3


def compute_delta_tilde(problem: MultiSolitonProblem, case: str,
                        delta1=None, delta2=None):
    """Tube decay rate: (1/2) min(delta1, delta2, delta3) in case I, delta1 in II."""
    d1, d2, d3 = decay_exponents(problem, delta1, delta2)
    dt_ = 0.5 * min(d1, d2, d3) if case == "I" else d1
    if not (dt_ > 0 and np.isfinite(dt_)):
        raise InvalidArgument(
            f"delta_tilde must be positive and finite, got {dt_} "
            f"(delta1={d1}, delta2={d2}, delta3={d3})"
        )
    return dt_


# ---------------------------------------------------------------------------
# Final data and the map b -> (a^+(n), a^-(n))


def default_eta(problem: MultiSolitonProblem):
    """Calibrated radius for |b|: keeps the final data in the Newton basin."""
    return 0.25 * default_proximity_radius(problem.params, problem.Q)


def final_data(b, n, problem: MultiSolitonProblem, eta=None) -> Field:
    """u(n) = R(n) + i sum_{k,±} b_k^± Y_k^±(n) on the lattice.

    b is ordered (b_1^+, ..., b_K^+, b_1^-, ..., b_K^-).
    """
    b = np.asarray(b, dtype=float)
    K = problem.K
    if b.shape != (2 * K,):
        raise InvalidArgument(f"b must have shape ({2 * K},), got {b.shape}")
    limit = default_eta(problem) if eta is None else eta
    if np.linalg.norm(b) > limit:
        raise InvalidArgument(f"|b| = {np.linalg.norm(b):.3e} exceeds eta = {limit:.3e}")
    if problem.noise is not None and n > problem.noise.horizon:
        raise InvalidArgument(f"n = {n} beyond the noise horizon {problem.noise.horizon}")
    grid = problem.grid
    vals = problem.soliton_sum_values(n)
    for k, par in enumerate(problem.params):
        y1, y2, ph = _eigenfunction_arrays(grid, par, problem.eig, n,
                                           par.alpha0, par.theta0)
        vals = vals + 1j * b[k] * (y1 + 1j * y2) * ph
        vals = vals + 1j * b[K + k] * (y1 - 1j * y2) * ph
    return Field(grid, vals)


def _decompose_final(b, n, problem, eta=None) -> ModulationState:
    u = final_data(b, n, problem, eta)
    return decompose(u, n, (problem.alpha0(), problem.theta0()),
                     problem.params, problem.Q, problem.eig)


def analytic_final_jacobian(problem: MultiSolitonProblem):
    """Leading Jacobian [[A, y*A], [y*A, A]] of b -> (a^+(n), a^-(n)).

    A = diag(-w_k^(1 - 4/(p-1))) in d = 1; y* = int (Y1^2 - Y2^2) dx.
    """
    K = problem.K
    p = problem.Q.p
    ystar = problem.eig.y_star
    diag = np.array([-par.w ** (1.0 - 4.0 / (p - 1.0)) for par in problem.params])
    jac = np.zeros((2 * K, 2 * K))
    jac[:K, :K] = np.diag(diag)
    jac[K:, K:] = np.diag(diag)
    jac[:K, K:] = ystar * np.diag(diag)
    jac[K:, :K] = ystar * np.diag(diag)
    return jac


def fd_final_jacobian(problem: MultiSolitonProblem, n, h=1e-6, b0=None):
    """Finite-difference Jacobian of b -> (a^+(n), a^-(n))."""
    K = problem.K
    b0 = np.zeros(2 * K) if b0 is None else np.asarray(b0, dtype=float)
    s0 = _decompose_final(b0, n, problem)
    g0 = np.concatenate([s0.a_plus, s0.a_minus])
    jac = np.empty((2 * K, 2 * K))
    for j in range(2 * K):
        bj = b0.copy()
        bj[j] += h
        sj = _decompose_final(bj, n, problem)
        jac[:, j] = (np.concatenate([sj.a_plus, sj.a_minus]) - g0) / h
    return jac


def solve_final_b(target_aminus, n, problem: MultiSolitonProblem,
                  tol=1e-9, max_iter=25, radius=None):
    """Newton on b -> (a^+(n), a^-(n)) hitting (0, target).

    Returns (b, achieved_state).  The initial Jacobian is the analytic block
    matrix; a finite-difference refresh kicks in when progress stalls.
    """
    K = problem.K
    target = np.asarray(target_aminus, dtype=float)
    if target.shape != (K,):
        raise InvalidArgument(f"target must have shape ({K},)")
    limit = tube_ball_radius_default(problem) if radius is None else radius
    if np.linalg.norm(target) > limit:
        raise InvalidArgument(
            f"|target| = {np.linalg.norm(target):.3e} exceeds radius {limit:.3e}")
    goal = np.concatenate([np.zeros(K), target])
    b = np.zeros(2 * K)
    jac = analytic_final_jacobian(problem)
    state = None
    prev_gap = np.inf
    for it in range(max_iter):
        state = _decompose_final(b, n, problem)
        got = np.concatenate([state.a_plus, state.a_minus])
        gap = float(np.max(np.abs(got - goal)))
        if gap <= tol:
            cbound = np.linalg.norm(b) / max(np.linalg.norm(target), 1e-300)
            return b, state, cbound
        if it >= 3 and gap > 0.5 * prev_gap:
            jac = fd_final_jacobian(problem, n, b0=b)
        prev_gap = gap
        b = b - np.linalg.solve(jac, got - goal)
    raise ModulatedDataFailure(
        f"final-data Newton stalled at gap {prev_gap:.3e} for n = {n} "
        "(radius too large or n too small for decoupling)"
    )


def tube_ball_radius_default(problem: MultiSolitonProblem):
    """Default radius of the target ball for a^-; calibrated, not derived."""
    return 0.5 * default_eta(problem)


# ---------------------------------------------------------------------------
# Backward runs inside the tube


CSV_EXIT_SUCCESS = "floor"


@dataclass
class Trajectory:
    """Sampled backward trajectory with the full diagnostics panel."""

    K: int
    t: list = field(default_factory=list)
    eps_h1: list = field(default_factory=list)
    a_plus: list = field(default_factory=list)
    a_minus: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    B_star: list = field(default_factory=list)
    lyapunov: list = field(default_factory=list)
    n_functional: list = field(default_factory=list)
    bounds: list = field(default_factory=list)  # (eps, aplus, aminus, param)
    mass: list = field(default_factory=list)
    err_R: list = field(default_factory=list)
    states: list = field(default_factory=list)
    u_floor: Field = None

    def record(self, state, bstar, lyap, nfun, bounds, m, err):
        self.t.append(state.t)
        self.eps_h1.append(state.eps_h1)
        self.a_plus.append(state.a_plus.copy())
        self.a_minus.append(state.a_minus.copy())
        self.alpha.append(state.alpha.copy())
        self.theta.append(state.theta.copy())
        self.B_star.append(bstar)
        self.lyapunov.append(lyap)
        self.n_functional.append(nfun)
        self.bounds.append(bounds)
        self.mass.append(m)
        self.err_R.append(err)
        self.states.append(state)

    def csv_header(self):
        cols = ["t", "eps_h1"]
        cols += [f"a_plus_{k + 1}" for k in range(self.K)]
        cols += [f"a_minus_{k + 1}" for k in range(self.K)]
        cols += [f"alpha_{k + 1}" for k in range(self.K)]
        cols += [f"theta_{k + 1}" for k in range(self.K)]
        cols += ["B_star", "lyapunov", "N_functional", "tube_eps_bound",
                 "tube_aplus_bound", "tube_aminus_bound", "tube_param_bound", "mass"]
        return cols

    def csv_rows(self):
        for i in range(len(self.t)):
            row = [self.t[i], self.eps_h1[i]]
            row += list(self.a_plus[i]) + list(self.a_minus[i])
            row += list(self.alpha[i]) + list(self.theta[i])
            row += [self.B_star[i], self.lyapunov[i], self.n_functional[i]]
            row += list(self.bounds[i]) + [self.mass[i]]
            yield row

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.csv_header()) + "\n")
            for row in self.csv_rows():
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class BackwardResult:
    trajectory: Trajectory
    exit_time: float
    exit_cause: str

    @property
    def survived(self):
        return self.exit_cause == CSV_EXIT_SUCCESS

    def last_a_minus(self):
        return np.asarray(self.trajectory.a_minus[-1])


def _tube_violation(tube, state, t, param_drift):
    if state.eps_h1 > tube.eps_bound(t):
        return "eps"
    if np.linalg.norm(state.a_plus) > tube.aplus_bound(t):
        return "aplus"
    if np.linalg.norm(state.a_minus) > tube.aminus_bound(t):
        return "aminus"
    if param_drift > tube.param_bound(t):
        return "params"
    return None


def backward_run(b, n, t_floor, tube: TubeSpec, problem: MultiSolitonProblem,
                 cadence=0.1, eta=None) -> BackwardResult:
    """Integrate the final-data problem backward, checking the tube at each
    sample.

    Returns the trajectory together with the first sample time at which a
    bound failed (and why), or t_floor with cause 'floor' on full success.
    """
    if t_floor < 1.0:
        raise InvalidArgument("t_floor must be >= 1 (localization window)")
    if t_floor >= n:
        raise InvalidArgument("t_floor must be below n")
    grid = problem.grid
    locs = LocalizationSet(problem.params)
    traj = Trajectory(K=problem.K)
    alpha0, theta0 = problem.alpha0(), problem.theta0()

    u = final_data(b, n, problem, eta)
    state = decompose(u, n, (alpha0, theta0), problem.params, problem.Q, problem.eig)

    def record(state, u):
        drift = float(np.sum(np.abs(state.alpha - alpha0) + np.abs(state.theta - theta0)))
        bstar = problem.noise.B_star_at(state.t) if problem.noise is not None else 0.0
        lyap = lyapunov(u, state.t, locs, problem.params, problem.Q.p)
        nfun = tube.n_functional(state.t, state.a_minus)
        bounds = (tube.eps_bound(state.t), tube.aplus_bound(state.t),
                  tube.aminus_bound(state.t), tube.param_bound(state.t))
        err = h1_norm_array(grid, u.values - problem.soliton_sum_values(state.t))
        traj.record(state, bstar, lyap, nfun, bounds, mass(u), err)
        return drift

    drift = record(state, u)
    cause = _tube_violation(tube, state, n, drift)
    if cause is not None:
        return BackwardResult(traj, n, cause)

    n_samples = int(round((n - t_floor) / cadence))
    targets = n - cadence * np.arange(1, n_samples + 1)
    targets[-1] = t_floor
    t = n
    for target in targets:
        try:
            u = evolve(u, t, float(target), problem.noise, problem.config)
            state = decompose(u, float(target), (state.alpha, state.theta),
                              problem.params, problem.Q, problem.eig)
        except NumericalBlowup:
            return BackwardResult(traj, float(target), "blowup")
        except DecompositionFailure:
            return BackwardResult(traj, float(target), "decomposition")
        t = float(target)
        drift = record(state, u)
        cause = _tube_violation(tube, state, t, drift)
        if cause is not None:
            return BackwardResult(traj, t, cause)

    traj.u_floor = u
    return BackwardResult(traj, t_floor, CSV_EXIT_SUCCESS)


# ---------------------------------------------------------------------------
# Shooting on the backward-unstable direction


@dataclass
class ShootingResult:
    a_minus_final: np.ndarray
    b: np.ndarray
    exit_time: float
    trajectory: Trajectory
    n_runs: int
    used_bisection: bool

    @property
    def survived(self):
        return self.trajectory.u_floor is not None


def shoot(problem: MultiSolitonProblem, n, tube: TubeSpec, t_floor,
          method="auto", max_runs=64, cadence=0.1, multistart_seed=0) -> ShootingResult:
    """Find the final value of a^- whose backward trajectory fills the tube.

    Candidates move along the smooth linear family b(tau) = J^-1 (0, tau)
    with J the finite-difference Jacobian of the final-data map at b = 0, so
    the exit map is a continuous function of tau and can be driven to the
    floor by damped Newton on the exit value (using the known growth rate)
    with a sign-bracket bisection fallback in K = 1.
    """
    K = problem.K
    if K not in (1, 2):
        raise InvalidArgument("shooting ships with root-finders for K in {1, 2}")
    if method not in ("auto", "newton", "bisection"):
        raise InvalidArgument(f"unknown shooting method {method!r}")
    jac = fd_final_jacobian(problem, n)
    rates = problem.growth_rates()
    radius = tube.phi(tube.delta_tilde * n) ** 0.75

    def b_of(tau):
        return np.linalg.solve(jac, np.concatenate([np.zeros(K), tau]))

    evaluations = []

    def run(tau):
        res = backward_run(b_of(tau), n, t_floor, tube, problem, cadence=cadence)
        evaluations.append((np.asarray(tau, dtype=float), res))
        return res

    best = None

    def consider(tau, res):
        nonlocal best
        if best is None or res.exit_time < best[1].exit_time:
            best = (np.asarray(tau, dtype=float), res)

    rng = np.random.default_rng(multistart_seed)
    used_bisection = False
    brackets = {}  # K=1: sign -> tau with that exit sign, closest to the root

    tau = np.zeros(K)
    for _ in range(max_runs):
        res = run(tau)
        consider(tau, res)
        if res.survived:
            if used_bisection:
                # exit-side monotonicity: a bracket needs both exit signs
                assert 1 in brackets and -1 in brackets
            return ShootingResult(
                a_minus_final=tau.copy(), b=b_of(tau), exit_time=res.exit_time,
                trajectory=res.trajectory, n_runs=len(evaluations),
                used_bisection=used_bisection,
            )
        am_exit = res.last_a_minus()
        te = res.exit_time
        if K == 1 and res.exit_cause == "aminus":
            brackets[int(np.sign(am_exit[0]))] = float(tau[0])

        newton_step = am_exit * np.exp(-rates * (n - te))
        tau_next = tau - newton_step
        if K == 1 and 1 in brackets and -1 in brackets:
            lo, hi = brackets[-1], brackets[1]
            if method == "bisection" or not (min(lo, hi) < tau_next[0] < max(lo, hi)):
                tau_next = np.array([0.5 * (lo + hi)])
                used_bisection = True
        if np.linalg.norm(tau_next) > radius:
            # stay inside the prescribed ball; shrink toward it
            tau_next *= 0.9 * radius / np.linalg.norm(tau_next)
        if np.allclose(tau_next, tau, rtol=0.0, atol=1e-18):
            tau_next = tau + rng.normal(0.0, 1e-14, size=K)
        tau = tau_next

    raise ShootingFailure(
        f"no candidate survived to t = {t_floor} within {max_runs} runs for n = {n} "
        "(n too small, noise too large, or tube too tight)",
        best={"a_minus": best[0], "exit_time": best[1].exit_time,
              "exit_cause": best[1].exit_cause},
    )


# ---------------------------------------------------------------------------
# Full construction over a ladder of final times


def construct(problem: MultiSolitonProblem, n_list, tube: TubeSpec, t_floor=2.0,
              cadence=0.1, max_runs=64, out_dir=None, seed=None):
    """Run the shooting construction over increasing final times.

    Returns a report with the per-n shooting data, the fitted uniform
    constant of the convergence bound, the finite-n Cauchy differences of
    the floor fields and the physical-side error panel for the largest n.
    """
    n_list = sorted(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidArgument("n_list must be strictly increasing")
    runs = []
    floors = []
    for n in n_list:
        result = shoot(problem, n, tube, t_floor, cadence=cadence, max_runs=max_runs)
        traj = result.trajectory
        ts = np.array(traj.t)
        errs = np.array(traj.err_R)
        envelope = ts * tube.phi(tube.delta_tilde * ts) ** 0.5
        fitted_c = float(np.max(errs / envelope))
        runs.append({
            "n": float(n),
            "a_minus": [float(v) for v in result.a_minus_final],
            "b": [float(v) for v in result.b],
            "exit_time": float(result.exit_time),
            "fitted_C": fitted_c,
            "tube_slack": tube.slack,
            "seed": seed,
            "n_runs": result.n_runs,
            "used_bisection": result.used_bisection,
        })
        floors.append(result.trajectory.u_floor)
        if out_dir is not None:
            traj.write_csv(f"{out_dir}/trajectory_n{n:g}.csv")
        runs[-1]["_trajectory"] = traj

    h = problem.grid.spacing
    cauchy = []
    for (n1, f1), (n2, f2) in zip(zip(n_list, floors), zip(n_list[1:], floors[1:])):
        diff = float(np.sqrt(np.sum(np.abs(f2.values - f1.values) ** 2) * h))
        cauchy.append({"n1": float(n1), "n2": float(n2), "l2_diff": diff})

    report = {
        "delta_tilde": tube.delta_tilde,
        "tube_case": tube.case,
        "tube_slack": tube.slack,
        "t_floor": t_floor,
        "eta": default_eta(problem),
        "target_radius": tube.phi(tube.delta_tilde * n_list[-1]) ** 0.75,
        "runs": runs,
        "cauchy": cauchy,
        "fitted_C_spread": (
            float(max(r["fitted_C"] for r in runs) / min(r["fitted_C"] for r in runs))
            if runs else None
        ),
    }
    if out_dir is not None:
        serializable = {k: v for k, v in report.items()}
        serializable["runs"] = [
            {k: v for k, v in r.items() if not k.startswith("_")} for r in runs
        ]
        with open(f"{out_dir}/construct_report.json", "w") as fh:
            json.dump(serializable, fh, indent=2)
    return report
