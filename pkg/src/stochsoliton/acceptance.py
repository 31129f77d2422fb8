"""Acceptance suite: one callable per criterion, shared lazy workspace.

Every criterion pins its tolerances here and returns a dict with at least
{'index', 'name', 'passed', 'runtime_s', 'details'}; run_all() executes the
full ladder and prints one pass/fail line per criterion.  The CLI `verify`
subcommand and tests/test_acceptance.py both run through this module, so
there is a single source of truth for the gate.
"""

import time

import numpy as np

from .construction import (
    MultiSolitonProblem,
    TubeSpec,
    compute_delta_tilde,
    construct,
    fd_final_jacobian,
    shoot,
    solve_final_b,
)
from .errors import ShootingFailure
from .ground_state import ode_residual, solve_ground_state
from .linearized_spectrum import (
    coercivity_gap,
    eigen_residual,
    form_min_eigenvalue,
    solve_eigenpair,
)
from .modulation import decompose, modulated_eigenfunction
from .noise_path import (
    ControlledPath,
    NoiseSpec,
    build_realization,
    ito_enhancement,
    rough_integral,
    sample_brownian,
)
from .rnls_solver import SolverConfig, evolve, mass
from .spectral_grid import Field, Grid, derivative, h1_norm_array, inner_product
from .ground_state import SolitonParams, soliton


class Workspace:
    """Caches the expensive shared artifacts across criteria."""

    def __init__(self):
        self._c = {}

    def _get(self, key, builder):
        if key not in self._c:
            self._c[key] = builder()
        return self._c[key]

    def grid(self):
        return self._get("grid", lambda: Grid(2048, 60.0))

    def Q(self):
        return self._get("Q", lambda: solve_ground_state(6.0, self.grid(), tol=1e-9))

    def Q_at(self, n):
        return self._get(f"Q{n}", lambda: solve_ground_state(6.0, Grid(n, 60.0), tol=1e-9))

    def eig_at(self, n):
        return self._get(f"eig{n}", lambda: solve_eigenpair(self.Q_at(n)))

    def eig_main(self):
        return self._get("eig_main", lambda: self.eig_at(1024).on_grid(self.grid()))

    def det2_problem(self, dt=1e-3):
        def build():
            params = [SolitonParams(w=1.0, v=-1.0), SolitonParams(w=1.0, v=1.0)]
            cfg = SolverConfig(dt=dt, scheme="StrangSplit")
            return MultiSolitonProblem(params=params, Q=self.Q(),
                                       eig=self.eig_main(), config=cfg, noise=None)
        return self._get(f"det2_{dt}", build)

    def det_construct(self):
        def build():
            problem = self.det2_problem()
            tube = TubeSpec(delta_tilde=compute_delta_tilde(problem, "I"),
                            case="I", slack=4.0)
            return construct(problem, [12.0, 16.0, 20.0], tube, t_floor=2.0)
        return self._get("det_construct", build)


_WORKSPACE = Workspace()


def workspace():
    return _WORKSPACE


def _result(index, name, passed, t0, **details):
    out = {"index": index, "name": name, "passed": bool(passed),
           "runtime_s": time.perf_counter() - t0, "details": details}
    status = "PASS" if out["passed"] else "FAIL"
    brief = ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}"
                      for k, v in list(details.items())[:4])
    print(f"[criterion {index:2d}] {status}  {name}  ({out['runtime_s']:.1f}s)  {brief}")
    return out


def criterion_1():
    """Ground state: residual and peak value on the production grid."""
    t0 = time.perf_counter()
    ws = workspace()
    grid = ws.grid()
    Q = ws.Q()
    residual = ode_residual(6.0, grid, Q.values)
    q0 = float(Q.values[grid.n_points // 2])
    q0_exact = 3.5 ** 0.2
    runtime = time.perf_counter() - t0
    passed = residual <= 1e-9 and abs(q0 - q0_exact) <= 1e-8 and runtime < 5.0
    return _result(1, "ground state residual and peak", passed, t0,
                   residual=residual, q0_error=abs(q0 - q0_exact), runtime=runtime)


def criterion_2():
    """Eigenpair: residuals, normalization, kernel identities, stability."""
    t0 = time.perf_counter()
    ws = workspace()
    checks = {}
    e0s = {}
    for n in (1024, 2048):
        Q = ws.Q_at(n)
        eig = ws.eig_at(n)
        e0s[n] = eig.e0
        grid = eig.grid
        checks[f"residual_{n}"] = eigen_residual(Q, eig)
        checks[f"norm_err_{n}"] = abs(
            float(np.sqrt(np.sum(eig.Y1**2 + eig.Y2**2) * grid.spacing)) - 1.0)
        checks[f"re_QY_{n}"] = abs(inner_product(Q.profile, eig.Yplus).real)
        checks[f"im_dQY_{n}"] = abs(inner_product(derivative(Q.profile, 1), eig.Yplus).imag)
        checks[f"ystar_sq_{n}"] = eig.y_star**2
    rel = abs(e0s[1024] - e0s[2048]) / e0s[2048]
    runtime = time.perf_counter() - t0
    passed = (
        all(checks[f"residual_{n}"] <= 1e-8 for n in (1024, 2048))
        and all(checks[f"norm_err_{n}"] <= 1e-10 for n in (1024, 2048))
        and all(checks[f"re_QY_{n}"] <= 1e-8 for n in (1024, 2048))
        and all(checks[f"im_dQY_{n}"] <= 1e-8 for n in (1024, 2048))
        and all(checks[f"ystar_sq_{n}"] < 1.0 for n in (1024, 2048))
        and rel <= 1e-6
        and runtime < 120.0
    )
    return _result(2, "eigenpair residuals and stability", passed, t0,
                   e0=e0s[2048], e0_rel_diff=rel, **checks)


def criterion_3():
    """Coercivity: constrained gap positive and resolution-stable; the
    unconstrained form has a negative direction."""
    t0 = time.perf_counter()
    ws = workspace()
    gaps = {}
    for n in (1024, 2048):
        Q = ws.Q_at(n)
        eig = ws.eig_at(1024).on_grid(Q.grid) if n != 1024 else ws.eig_at(1024)
        gaps[n] = coercivity_gap(Q, eig)
    unconstrained = form_min_eigenvalue(ws.Q_at(1024), constrained=False)
    spread = abs(gaps[1024] - gaps[2048]) / gaps[2048]
    passed = gaps[1024] > 0 and gaps[2048] > 0 and spread <= 0.05 and unconstrained < 0
    return _result(3, "constrained coercivity gap", passed, t0,
                   gap_1024=gaps[1024], gap_2048=gaps[2048], spread=spread,
                   unconstrained_min=unconstrained)


def criterion_4():
    """Zero-noise single-soliton benchmark with the spectral RK4 scheme."""
    t0 = time.perf_counter()
    ws = workspace()
    grid = ws.grid()
    Q = ws.Q()
    par = SolitonParams(w=1.0, v=1.0)
    u0 = soliton(par, Q, 0.0, grid)
    exact = soliton(par, Q, 10.0, grid)
    errs = {}
    drift = None
    for dt in (8e-4, 4e-4):
        cfg = SolverConfig(dt=dt, scheme="RK4Spectral")
        u = evolve(u0, 0.0, 10.0, None, cfg)
        errs[dt] = h1_norm_array(grid, u.values - exact.values)
        if dt == 8e-4:
            drift = abs(mass(u) - mass(u0))
    ratio = errs[8e-4] / errs[4e-4]
    runtime = time.perf_counter() - t0
    passed = errs[8e-4] <= 1e-4 and drift <= 1e-8 and ratio >= 3.5 and runtime < 60.0
    return _result(4, "single-soliton solver benchmark", passed, t0,
                   h1_error=errs[8e-4], mass_drift=drift, halving_ratio=ratio,
                   runtime=runtime)


def criterion_5():
    """Rough paths: Chen relation on sampled triples; Ito value of the
    quadratic integral at dt = 1e-4 over 100 seeds."""
    t0 = time.perf_counter()
    path = sample_brownian(seed=0, horizon=1.0, dt=1e-3, n_channels=2)
    enh = ito_enhancement(path)
    rng = np.random.default_rng(1)
    chen = 0.0
    for _ in range(200):
        i, j, k = sorted(int(v) for v in rng.integers(0, path.n_steps + 1, size=3))
        chen = max(chen, enh.chen_defect(i, j, k))

    horizon, dt = 0.02, 1e-4
    abs_errors = []
    for seed in range(100):
        p = sample_brownian(seed=seed, horizon=horizon, dt=dt, n_channels=1)
        e = ito_enhancement(p)
        vals = p.values()
        gub = np.ones((1, 1, p.n_steps + 1))
        controlled = ControlledPath(times=p.times, g=vals.copy(), gubinelli=gub)
        ito = rough_integral(controlled, e, (0.0, horizon), channel=0)
        exact = 0.5 * vals[0, -1] ** 2 - 0.5 * horizon
        abs_errors.append(abs(ito - exact))
    mae = float(np.mean(abs_errors))
    passed = chen <= 1e-12 and mae <= 1e-3
    return _result(5, "rough-path enhancement and Ito integral", passed, t0,
                   chen_defect=chen, ito_mae=mae)


def criterion_6():
    """Pathwise mass conservation of the transformed flow with noise."""
    t0 = time.perf_counter()
    ws = workspace()
    grid = ws.grid()
    Q = ws.Q()
    params = [SolitonParams(w=1.0, v=-1.0), SolitonParams(w=1.0, v=1.0)]
    spec = NoiseSpec(n_channels=1, case="I", amplitude=0.05, spatial_rates=(1.0,),
                     temporal="exp", temporal_rate=0.25, horizon=64.0, dt=0.01)
    cfg = SolverConfig(dt=2.5e-4, scheme="StrangSplit")
    # start on the preset evolve window, where the pair is separated
    u0_vals = (soliton(params[0], Q, 2.0, grid).values
               + soliton(params[1], Q, 2.0, grid).values)
    u0 = Field(grid, u0_vals)
    m0 = mass(u0)
    drifts = []
    for seed in range(20):
        noise = build_realization(spec, seed)
        u1 = evolve(u0, 2.0, 3.0, noise, cfg)
        drifts.append(abs(mass(u1) - m0))
    worst = float(np.max(drifts))
    passed = worst <= 1e-7
    return _result(6, "mass conservation with noise (20 seeds)", passed, t0,
                   worst_drift=worst, median_drift=float(np.median(drifts)))


def criterion_7():
    """Final-data map: target hitting and the block Jacobian pattern."""
    t0 = time.perf_counter()
    ws = workspace()
    problem = ws.det2_problem()
    K = problem.K
    target = np.array([1e-4, -5e-5])
    b, state, c_bound = solve_final_b(target, 20.0, problem, tol=1e-9)
    hit_gap = float(max(np.max(np.abs(state.a_plus)),
                        np.max(np.abs(state.a_minus - target))))
    jac = fd_final_jacobian(problem, 20.0)
    ystar = problem.eig.y_star
    ratio_errs = []
    for k in range(K):
        ratio_errs.append(abs(jac[k, K + k] / jac[k, k] - ystar) / abs(ystar))
        ratio_errs.append(abs(jac[K + k, k] / jac[K + k, K + k] - ystar) / abs(ystar))
    worst_ratio = float(np.max(ratio_errs))
    passed = hit_gap <= 1e-9 and worst_ratio <= 0.05
    return _result(7, "modulated final data and Jacobian blocks", passed, t0,
                   hit_gap=hit_gap, jacobian_ratio_err=worst_ratio,
                   b_over_target=c_bound)


def criterion_8():
    """Measured growth/decay rates of the unstable projections."""
    t0 = time.perf_counter()
    ws = workspace()
    grid = ws.grid()
    Q = ws.Q()
    eig = ws.eig_main()
    par = SolitonParams(w=1.0, v=0.0)
    params = [par]
    cfg = SolverConfig(dt=2.5e-4, scheme="StrangSplit")
    delta = 1e-4
    rates = {}
    for sign in (+1, -1):
        seedfun = modulated_eigenfunction(0, sign, 0.0, 0.0, 0.0, params, eig)
        u = Field(grid, soliton(par, Q, 0.0, grid).values + delta * 1j * seedfun.values)
        samples = {"t": [], "a": []}
        guess = {"alpha": np.zeros(1), "theta": np.zeros(1)}

        def observer(t, uf, sign=sign, samples=samples, guess=guess):
            st = decompose(uf, t, (guess["alpha"], guess["theta"]), params, Q, eig)
            guess["alpha"], guess["theta"] = st.alpha, st.theta
            samples["t"].append(t)
            samples["a"].append(st.a_plus[0] if sign > 0 else st.a_minus[0])

        evolve(u, 0.0, 0.5, None, cfg, observer=observer, cadence=0.05)
        slope = np.polyfit(samples["t"], np.log(np.abs(samples["a"])), 1)[0]
        rates[sign] = float(slope)
    err_plus = abs(rates[+1] - eig.e0) / eig.e0
    err_minus = abs(rates[-1] + eig.e0) / eig.e0
    passed = err_plus <= 0.1 and err_minus <= 0.1
    return _result(8, "linearized eigen-rates from seeded runs", passed, t0,
                   rate_plus=rates[+1], rate_minus=rates[-1], e0=eig.e0,
                   rel_err_plus=err_plus, rel_err_minus=err_minus)


def criterion_9():
    """Deterministic two-soliton construction over the final-time ladder."""
    t0 = time.perf_counter()
    ws = workspace()
    report = ws.det_construct()
    dt_ = report["delta_tilde"]
    all_floor = all(r["exit_time"] == 2.0 for r in report["runs"])
    slopes = []
    for r in report["runs"]:
        traj = r["_trajectory"]
        ts = np.array(traj.t)
        errs = np.array(traj.err_R)
        m = (ts >= 3.0) & (ts <= 10.0) & (errs > 1e-12)
        slopes.append(float(np.polyfit(ts[m], np.log(errs[m]), 1)[0]))
    slope_ok = all(s <= -0.8 * dt_ / 2.0 for s in slopes)
    spread = report["fitted_C_spread"]
    runtime = time.perf_counter() - t0
    passed = all_floor and slope_ok and spread < 2.0 and runtime < 1200.0
    return _result(9, "deterministic construction ladder", passed, t0,
                   all_reached_floor=all_floor, decay_slopes=slopes,
                   fitted_C_spread=spread, delta_tilde=dt_, runtime=runtime)


def _stochastic_batch(ws, case, seeds, n=20.0, t_floor=2.0):
    grid = ws.grid()
    Q = ws.Q()
    eig = ws.eig_main()
    params = [SolitonParams(w=1.0, v=1.0)]
    cfg = SolverConfig(dt=1e-3, scheme="StrangSplit")
    if case == "I":
        spec = NoiseSpec(n_channels=1, case="I", amplitude=0.05, spatial_rates=(1.0,),
                         temporal="exp", temporal_rate=0.25, horizon=64.0, dt=0.01)
    else:
        spec = NoiseSpec(n_channels=1, case="II", nu_star=8.0, amplitude=0.05,
                         temporal="poly", horizon=960.0, dt=0.01)
    outcomes = []
    for seed in seeds:
        noise = build_realization(spec, seed)
        problem = MultiSolitonProblem(params=params, Q=Q, eig=eig, config=cfg,
                                      noise=noise)
        tube = TubeSpec(delta_tilde=compute_delta_tilde(problem, case),
                        case=case, nu_star=spec.nu_star, slack=4.0)
        try:
            res = shoot(problem, n, tube, t_floor, max_runs=48)
            ts = np.array(res.trajectory.t)
            errs = np.array(res.trajectory.err_R)
            envelope = tube.slack * ts * tube.phi(tube.delta_tilde * ts) ** 0.5
            outcomes.append({
                "seed": seed, "survived": True,
                "bound_ratio": float(np.max(errs / envelope)),
                "n_runs": res.n_runs,
            })
        except ShootingFailure as exc:
            outcomes.append({"seed": seed, "survived": False,
                             "best": str(exc.best)})
    return outcomes, spec


def _tail_boundedness(spec, seeds, n=20.0):
    """Fraction of seeds with t B_*(t) below the time-change envelope."""
    tail_env_const = None
    ts_dense = np.linspace(1e-3, spec.horizon, 4000)
    i_t = spec.g_tail_sq(ts_dense)
    env = spec.n_channels * 2.0 * np.sqrt(2.0 * i_t * np.log(1.0 / np.maximum(i_t, 1e-300)))
    tail_env_const = float(np.max(ts_dense * env))
    ok = 0
    worst = 0.0
    for seed in seeds:
        noise = build_realization(spec, seed)
        times = noise.path.times
        m = (times >= noise.sigma_hat) & (times <= n)
        top = float(np.max(times[m] * noise.B_star[m]))
        worst = max(worst, top)
        if top <= tail_env_const:
            ok += 1
    return ok / len(seeds), tail_env_const, worst


def criterion_10():
    """Stochastic constructions in both noise scenarios."""
    t0 = time.perf_counter()
    ws = workspace()
    out_i, _ = _stochastic_batch(ws, "I", seeds=range(5))
    out_ii, spec_ii = _stochastic_batch(ws, "II", seeds=range(5))
    succ_i = [o for o in out_i if o["survived"]]
    succ_ii = [o for o in out_ii if o["survived"]]
    bounds_i = all(o["bound_ratio"] <= 1.0 for o in succ_i)
    bounds_ii = all(o["bound_ratio"] <= 1.0 for o in succ_ii)
    frac, env_const, worst_tail = _tail_boundedness(spec_ii, range(100))
    runtime = time.perf_counter() - t0
    passed = (len(succ_i) >= 4 and len(succ_ii) >= 4 and bounds_i and bounds_ii
              and frac >= 0.9 and runtime < 3600.0)
    return _result(10, "stochastic constructions (cases I and II)", passed, t0,
                   case_I_successes=len(succ_i), case_II_successes=len(succ_ii),
                   bounds_hold=(bounds_i and bounds_ii),
                   tail_bounded_fraction=frac, tail_envelope=env_const,
                   worst_tail=worst_tail, runtime=runtime)


def criterion_11():
    """Finite-n Cauchy property of the floor fields (deterministic ladder)."""
    t0 = time.perf_counter()
    ws = workspace()
    report = ws.det_construct()
    diffs = [c["l2_diff"] for c in report["cauchy"]]
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    passed = decreasing and len(diffs) >= 2
    return _result(11, "finite-n Cauchy differences decrease", passed, t0,
                   l2_diffs=diffs)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_all(indices=None):
    indices = sorted(CRITERIA) if indices is None else sorted(indices)
    results = [CRITERIA[i]() for i in indices]
    n_pass = sum(r["passed"] for r in results)
    print(f"acceptance: {n_pass}/{len(results)} criteria passed")
    return results
