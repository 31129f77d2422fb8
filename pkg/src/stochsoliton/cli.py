"""Experiment runner: config parsing, subcommands, deterministic emission.

Config files are INI-style text with sections and key=value entries; see
README for the schema.  Three presets are built in.  All outputs are
deterministic functions of (config, seed): CSV columns follow the fixed
trajectory schema with 17 significant digits, fields go to the binary
snapshot format.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 acceptance
failure.
"""

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import acceptance
from .construction import (
    MultiSolitonProblem,
    TubeSpec,
    compute_delta_tilde,
    construct,
)
from .diagnostics import LocalizationSet, lyapunov
from .errors import (
    ConfigError,
    InvalidArgument,
    ModulatedDataFailure,
    NumericalBlowup,
    ShootingFailure,
    SolverFailure,
    SpectralFailure,
)
from .ground_state import SolitonParams, solve_ground_state, soliton_sum
from .linearized_spectrum import (
    coercivity_gap,
    eigen_residual,
    form_min_eigenvalue,
    solve_eigenpair,
)
from .modulation import decompose
from .noise_path import NoiseSpec, build_realization
from .rnls_solver import SolverConfig, evolve, mass
from .snapshots import write_snapshot
from .spectral_grid import Field, Grid, derivative, inner_product

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4

PRESETS = {
    "deterministic-2sol": {
        "grid": {"n_points": "2048", "half_length": "60.0"},
        "model": {"p": "6.0"},
        "soliton.1": {"w": "1.0", "v": "-1.0", "alpha0": "0.0", "theta0": "0.0"},
        "soliton.2": {"w": "1.0", "v": "1.0", "alpha0": "0.0", "theta0": "0.0"},
        "noise": {"enabled": "false"},
        "solver": {"dt": "1e-3", "scheme": "StrangSplit"},
        "construction": {"n_list": "12,16,20", "t_floor": "2.0", "tube_slack": "4.0",
                         "tube_case": "I", "cadence": "0.1", "shooting_method": "auto"},
        "evolve": {"t_start": "2.0", "t_end": "7.0"},
        "output": {"directory": "out", "cadence": "0.1"},
        "spectrum": {"n_points": "1024"},
    },
    "caseI-2sol": {
        "grid": {"n_points": "2048", "half_length": "60.0"},
        "model": {"p": "6.0"},
        "soliton.1": {"w": "1.0", "v": "-1.0", "alpha0": "0.0", "theta0": "0.0"},
        "soliton.2": {"w": "1.0", "v": "1.0", "alpha0": "0.0", "theta0": "0.0"},
        "noise": {"enabled": "true", "case": "I", "n_channels": "1",
                  "amplitude": "0.05", "spatial_rate": "1.0", "temporal": "exp",
                  "temporal_rate": "0.25", "horizon": "64.0", "dt": "0.01",
                  "seed": "1"},
        "solver": {"dt": "2.5e-4", "scheme": "StrangSplit"},
        "construction": {"n_list": "12,16,20", "t_floor": "2.0", "tube_slack": "4.0",
                         "tube_case": "I", "cadence": "0.1", "dt": "1e-3",
                         "shooting_method": "auto"},
        "evolve": {"t_start": "2.0", "t_end": "3.0"},
        "output": {"directory": "out", "cadence": "0.1"},
        "spectrum": {"n_points": "1024"},
    },
    "caseII-2sol": {
        "grid": {"n_points": "2048", "half_length": "60.0"},
        "model": {"p": "6.0"},
        "soliton.1": {"w": "1.0", "v": "-1.0", "alpha0": "0.0", "theta0": "0.0"},
        "soliton.2": {"w": "1.0", "v": "1.0", "alpha0": "0.0", "theta0": "0.0"},
        "noise": {"enabled": "true", "case": "II", "n_channels": "1",
                  "amplitude": "0.05", "nu_star": "8.0", "temporal": "poly",
                  "horizon": "960.0", "dt": "0.01", "seed": "1"},
        "solver": {"dt": "2.5e-4", "scheme": "StrangSplit"},
        "construction": {"n_list": "12,16,20", "t_floor": "2.0", "tube_slack": "4.0",
                         "tube_case": "II", "cadence": "0.1", "dt": "1e-3",
                         "shooting_method": "auto"},
        "evolve": {"t_start": "2.0", "t_end": "3.0"},
        "output": {"directory": "out", "cadence": "0.1"},
        "spectrum": {"n_points": "1024"},
    },
}


@dataclass
class ExperimentConfig:
    """Validated experiment description (see README for the file schema)."""

    grid: Grid
    p: float
    solitons: list
    noise_spec: NoiseSpec | None
    noise_seed: int
    solver: SolverConfig
    n_list: list
    t_floor: float
    tube_slack: float
    tube_case: str
    cadence: float
    construction_dt: float
    shooting_method: str
    out_dir: str
    out_cadence: float
    spectrum_n: int
    t_start: float = 0.0
    t_end: float = 5.0
    raw: dict = field(default_factory=dict, repr=False)


def _getfloat(sections, sec, key, default=None, path=""):
    try:
        if key in sections.get(sec, {}):
            return float(sections[sec][key])
        if default is None:
            raise ConfigError("missing required key", field=f"{sec}.{key}")
        return default
    except ValueError as exc:
        raise ConfigError(f"not a number: {sections[sec][key]!r}", field=f"{sec}.{key}") from exc


def parse_config(sections: dict) -> ExperimentConfig:
    """Validate the (possibly preset-based) section map into a config."""
    try:
        n_points = int(sections.get("grid", {}).get("n_points", "2048"))
        half_length = _getfloat(sections, "grid", "half_length", 60.0)
        grid = Grid(n_points, half_length)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="grid") from exc

    p = _getfloat(sections, "model", "p", 6.0)
    if p <= 5:
        raise ConfigError(f"p must exceed 5 (mass-supercritical, d=1), got {p}",
                          field="model.p")

    solitons = []
    for name in sorted(s for s in sections if s.startswith("soliton.")):
        sec = sections[name]
        try:
            solitons.append(SolitonParams(
                w=float(sec.get("w", "1.0")), v=float(sec.get("v", "0.0")),
                alpha0=float(sec.get("alpha0", "0.0")),
                theta0=float(sec.get("theta0", "0.0"))))
        except (ValueError, InvalidArgument) as exc:
            raise ConfigError(str(exc), field=name) from exc
    if not solitons:
        raise ConfigError("at least one [soliton.N] section required", field="soliton")
    vs = [s.v for s in solitons]
    if len(set(vs)) != len(vs):
        raise ConfigError(f"velocities must be pairwise distinct, got {vs}",
                          field="soliton")

    noise = sections.get("noise", {})
    noise_spec = None
    noise_seed = int(noise.get("seed", "0"))
    if noise.get("enabled", "false").lower() in ("true", "1", "yes"):
        try:
            case = noise.get("case", "I")
            noise_spec = NoiseSpec(
                n_channels=int(noise.get("n_channels", "1")),
                case=case,
                nu_star=float(noise.get("nu_star", "8.0")),
                amplitude=float(noise.get("amplitude", "0.05")),
                spatial_rates=tuple(
                    float(v) for v in noise.get("spatial_rate", "1.0").split(",")),
                temporal=noise.get("temporal", "exp" if case == "I" else "poly"),
                temporal_rate=float(noise.get("temporal_rate", "0.25")),
                horizon=float(noise.get("horizon", "64.0")),
                dt=float(noise.get("dt", "0.01")),
            )
        except (ValueError, InvalidArgument) as exc:
            raise ConfigError(str(exc), field="noise") from exc

    sol = sections.get("solver", {})
    try:
        solver = SolverConfig(
            dt=float(sol.get("dt", "1e-3")),
            scheme=sol.get("scheme", "StrangSplit"),
            cfl_guard=float(sol.get("cfl_guard", "0.25")),
            p=p,
        )
    except (ValueError, InvalidArgument) as exc:
        raise ConfigError(str(exc), field="solver") from exc

    cons = sections.get("construction", {})
    try:
        n_list = [float(v) for v in cons.get("n_list", "12,16,20").split(",")]
    except ValueError as exc:
        raise ConfigError("n_list must be comma-separated numbers",
                          field="construction.n_list") from exc
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(f"n_list must be increasing, got {n_list}",
                          field="construction.n_list")
    if noise_spec is not None and n_list and max(n_list) > noise_spec.horizon:
        raise ConfigError(
            f"largest n = {max(n_list)} exceeds noise horizon {noise_spec.horizon}",
            field="construction.n_list")
    method = cons.get("shooting_method", "auto")
    if method not in ("auto", "newton", "bisection"):
        raise ConfigError(f"unknown shooting method {method!r}",
                          field="construction.shooting_method")

    out = sections.get("output", {})
    ev = sections.get("evolve", {})
    return ExperimentConfig(
        grid=grid, p=p, solitons=solitons,
        noise_spec=noise_spec, noise_seed=noise_seed, solver=solver,
        n_list=n_list,
        t_floor=float(cons.get("t_floor", "2.0")),
        tube_slack=float(cons.get("tube_slack", "4.0")),
        tube_case=cons.get("tube_case", "I" if noise_spec is None else noise_spec.case),
        cadence=float(cons.get("cadence", "0.1")),
        construction_dt=float(cons.get("dt", sol.get("dt", "1e-3"))),
        shooting_method=method,
        out_dir=out.get("directory", "out"),
        out_cadence=float(out.get("cadence", "0.1")),
        spectrum_n=int(sections.get("spectrum", {}).get("n_points", "1024")),
        t_start=float(ev.get("t_start", "0.0")),
        t_end=float(ev.get("t_end", "5.0")),
        raw=sections,
    )


def load_config(path=None, preset=None, seed=None, out=None) -> ExperimentConfig:
    sections = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}", field="preset")
        sections = {k: dict(v) for k, v in PRESETS[preset].items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}", field="config")
        for sec in parser.sections():
            sections.setdefault(sec, {}).update(dict(parser[sec]))
    if not sections:
        raise ConfigError("either --config or --preset is required", field="config")
    cfg = parse_config(sections)
    if seed is not None:
        cfg.noise_seed = seed
    if out is not None:
        cfg.out_dir = out
    return cfg


def _fmt(x):
    return f"{x:.17g}"


def _json_dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


class Laboratory:
    """Lazy builder of the expensive shared objects for one config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._cache = {}

    def ground_state(self):
        if "Q" not in self._cache:
            self._cache["Q"] = solve_ground_state(self.cfg.p, self.cfg.grid, tol=1e-9)
        return self._cache["Q"]

    def spectrum_ground_state(self):
        if "Qs" not in self._cache:
            grid = Grid(self.cfg.spectrum_n, self.cfg.grid.half_length)
            self._cache["Qs"] = solve_ground_state(self.cfg.p, grid, tol=1e-9)
        return self._cache["Qs"]

    def eigenpair(self):
        if "eig" not in self._cache:
            self._cache["eig"] = solve_eigenpair(self.spectrum_ground_state())
        return self._cache["eig"]

    def noise(self):
        if self.cfg.noise_spec is None:
            return None
        if "noise" not in self._cache:
            self._cache["noise"] = build_realization(self.cfg.noise_spec,
                                                     self.cfg.noise_seed)
        return self._cache["noise"]

    def problem(self, solver=None):
        return MultiSolitonProblem(
            params=self.cfg.solitons,
            Q=self.ground_state(),
            eig=self.eigenpair().on_grid(self.cfg.grid),
            config=solver or self.cfg.solver,
            noise=self.noise(),
        )


def cmd_ground_state(cfg: ExperimentConfig) -> int:
    from .ground_state import ode_residual

    lab = Laboratory(cfg)
    Q = lab.ground_state()
    grid = cfg.grid
    report = {
        "p": cfg.p,
        "n_points": grid.n_points,
        "half_length": grid.half_length,
        "Q0": float(Q.values[grid.n_points // 2]),
        "closed_form_Q0": float(((cfg.p + 1) / 2.0) ** (1.0 / (cfg.p - 1.0))),
        "residual": ode_residual(cfg.p, grid, Q.values),
        "decay_rate": Q.decay_rate,
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    _json_dump(os.path.join(cfg.out_dir, "ground_state.json"), report)
    write_snapshot(os.path.join(cfg.out_dir, "ground_state.snap"), Q.profile, 0.0)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_spectrum(cfg: ExperimentConfig) -> int:
    lab = Laboratory(cfg)
    Qs = lab.spectrum_ground_state()
    eig = lab.eigenpair()
    grid = Qs.grid
    dq = derivative(Qs.profile, 1)
    re_ident = abs(inner_product(Qs.profile, eig.Yplus).real)
    im_ident = abs(inner_product(dq, eig.Yplus).imag)
    report = {
        "n_points": grid.n_points,
        "e0": eig.e0,
        "y_star": eig.y_star,
        "eig_residual": eigen_residual(Qs, eig),
        "Yplus_l2": float(np.sqrt(np.sum(eig.Y1**2 + eig.Y2**2) * grid.spacing)),
        "identity_re_QY": re_ident,
        "identity_im_dQY": im_ident,
        "coercivity_gap": coercivity_gap(Qs, eig),
        "unconstrained_min": form_min_eigenvalue(Qs, constrained=False),
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    _json_dump(os.path.join(cfg.out_dir, "spectrum.json"), report)
    write_snapshot(os.path.join(cfg.out_dir, "eigenfunction.snap"), eig.Yplus, 0.0)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_noise(cfg: ExperimentConfig) -> int:
    from .noise_path import flatness_defect, log_tail_constant, spatial_decay_fit

    if cfg.noise_spec is None:
        raise ConfigError("noise subcommand needs [noise] enabled = true",
                          field="noise.enabled")
    lab = Laboratory(cfg)
    noise = lab.noise()
    spec = cfg.noise_spec
    enh = noise.enhancement()
    rng = np.random.default_rng(0)
    chen = 0.0
    for _ in range(64):
        i, j, k = sorted(rng.integers(0, noise.path.n_steps + 1, size=3))
        chen = max(chen, enh.chen_defect(int(i), int(j), int(k)))
    rate, amp = spatial_decay_fit(spec, cfg.grid)
    report = {
        "seed": cfg.noise_seed,
        "sigma_hat": noise.sigma_hat,
        "B_star_0": noise.B_star_at(0.0),
        "chen_defect_max": chen,
        "flatness_edge_defect": flatness_defect(spec, cfg.grid),
        "spatial_decay_fit": rate,
        "tail_sq_at_horizon": spec.g_tail_sq(spec.horizon),
    }
    if spec.case == "II":
        report["log_tail_constant"] = log_tail_constant(spec)
    os.makedirs(cfg.out_dir, exist_ok=True)
    _json_dump(os.path.join(cfg.out_dir, "noise.json"), report)
    stride = max(1, noise.path.n_steps // 4096)
    with open(os.path.join(cfg.out_dir, "noise.csv"), "w") as fh:
        cols = ["t"] + [f"B_star_{k + 1}" for k in range(spec.n_channels)] + ["B_star"]
        fh.write(",".join(cols) + "\n")
        for i in range(0, noise.path.n_steps + 1, stride):
            row = [noise.path.times[i]] + list(noise.tails[:, i]) + [noise.B_star[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_evolve(cfg: ExperimentConfig) -> int:
    lab = Laboratory(cfg)
    problem = lab.problem()
    grid = cfg.grid
    t0, t1 = cfg.t_start, cfg.t_end
    u0 = Field(grid, problem.soliton_sum_values(t0))
    locs = LocalizationSet(cfg.solitons)
    tube = TubeSpec(delta_tilde=compute_delta_tilde(problem, cfg.tube_case),
                    case=cfg.tube_case, slack=cfg.tube_slack)
    from .construction import Trajectory
    from .spectral_grid import h1_norm_array

    traj = Trajectory(K=len(cfg.solitons))
    alpha0, theta0 = problem.alpha0(), problem.theta0()
    guess = {"alpha": alpha0, "theta": theta0}

    def observer(t, u):
        state = decompose(u, t, (guess["alpha"], guess["theta"]), cfg.solitons,
                          problem.Q, problem.eig)
        guess["alpha"], guess["theta"] = state.alpha, state.theta
        bstar = problem.noise.B_star_at(t) if problem.noise is not None else 0.0
        lyap = lyapunov(u, t, locs, cfg.solitons, cfg.p) if t >= 1.0 else 0.0
        bounds = (tube.eps_bound(t), tube.aplus_bound(t),
                  tube.aminus_bound(t), tube.param_bound(t))
        err = h1_norm_array(grid, u.values - problem.soliton_sum_values(t))
        traj.record(state, bstar, lyap, tube.n_functional(t, state.a_minus),
                    bounds, mass(u), err)

    u1 = evolve(u0, t0, t1, problem.noise, cfg.solver, observer=observer,
                cadence=cfg.out_cadence)
    os.makedirs(cfg.out_dir, exist_ok=True)
    traj.write_csv(os.path.join(cfg.out_dir, "evolve.csv"))
    write_snapshot(os.path.join(cfg.out_dir, "evolve_final.snap"), u1, t1)
    print(f"evolved [{t0}, {t1}]: final mass {mass(u1):.12g}, "
          f"rows {len(traj.t)} -> {cfg.out_dir}/evolve.csv")
    return EXIT_OK


def cmd_construct(cfg: ExperimentConfig) -> int:
    lab = Laboratory(cfg)
    solver = SolverConfig(dt=cfg.construction_dt, scheme=cfg.solver.scheme,
                          cfl_guard=cfg.solver.cfl_guard, p=cfg.p)
    problem = lab.problem(solver=solver)
    tube = TubeSpec(
        delta_tilde=compute_delta_tilde(problem, cfg.tube_case),
        case=cfg.tube_case,
        nu_star=cfg.noise_spec.nu_star if cfg.noise_spec is not None else 8.0,
        slack=cfg.tube_slack,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    report = construct(problem, cfg.n_list, tube, t_floor=cfg.t_floor,
                       cadence=cfg.cadence, out_dir=cfg.out_dir,
                       seed=cfg.noise_seed)
    printable = {k: v for k, v in report.items() if k != "runs"}
    printable["runs"] = [{k: v for k, v in r.items() if not k.startswith("_")}
                         for r in report["runs"]]
    print(json.dumps(printable, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(cfg) -> int:
    results = acceptance.run_all()
    failed = [r for r in results if not r["passed"]]
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stochsoliton",
        description="multi-soliton laboratory for the noisy supercritical NLS",
    )
    parser.add_argument("subcommand", choices=[
        "ground-state", "spectrum", "noise", "evolve", "construct", "verify"])
    parser.add_argument("--config", help="path to an INI config file")
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="built-in experiment preset")
    parser.add_argument("--seed", type=int, help="override the noise seed")
    parser.add_argument("--out", help="override the output directory")
    args = parser.parse_args(argv)

    try:
        if args.subcommand == "verify":
            cfg = None
            if args.config or args.preset:
                cfg = load_config(args.config, args.preset, args.seed, args.out)
            return cmd_verify(cfg)
        cfg = load_config(args.config, args.preset, args.seed, args.out)
        handler = {
            "ground-state": cmd_ground_state,
            "spectrum": cmd_spectrum,
            "noise": cmd_noise,
            "evolve": cmd_evolve,
            "construct": cmd_construct,
        }[args.subcommand]
        return handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBlowup, SolverFailure, SpectralFailure, ShootingFailure,
            ModulatedDataFailure, InvalidArgument) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
