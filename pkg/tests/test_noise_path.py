import numpy as np
import pytest

from stochsoliton.errors import InvalidArgument, TruncationError
from stochsoliton.noise_path import (
    ControlledPath,
    NoiseSpec,
    build_realization,
    coefficients,
    flatness_defect,
    holder_remainder_report,
    ito_enhancement,
    log_tail_constant,
    phase_field_W,
    rough_integral,
    sample_brownian,
    spatial_decay_fit,
    tail_processes,
)
from stochsoliton.spectral_grid import Grid, derivative


def case1_spec(**kw):
    base = dict(n_channels=1, case="I", amplitude=0.05, spatial_rates=(1.0,),
                temporal="exp", temporal_rate=0.25, horizon=64.0, dt=0.01)
    base.update(kw)
    return NoiseSpec(**base)


def case2_spec(**kw):
    base = dict(n_channels=1, case="II", nu_star=8.0, amplitude=0.05,
                temporal="poly", horizon=960.0, dt=0.01)
    base.update(kw)
    return NoiseSpec(**base)


class TestBrownianSampling:
    def test_reproducible_from_seed(self):
        a = sample_brownian(7, 1.0, 1e-3, 2)
        b = sample_brownian(7, 1.0, 1e-3, 2)
        assert np.array_equal(a.increments, b.increments)

    def test_non_integral_step_count_rejected(self):
        with pytest.raises(InvalidArgument):
            sample_brownian(0, 1.0, 0.3, 1)

    def test_terminal_statistics(self):
        # CLT bound on the mean and chi-square concentration of the variance
        horizon, n_seeds = 1.0, 10_000
        finals = np.array([
            np.sum(sample_brownian(seed, horizon, 0.05, 1).increments)
            for seed in range(n_seeds)
        ])
        assert abs(np.mean(finals)) <= 4.0 * np.sqrt(horizon / n_seeds)
        assert abs(np.var(finals) - horizon) <= 0.1 * horizon


class TestEnhancement:
    def test_chen_relation_exact(self):
        path = sample_brownian(1, 1.0, 1e-2, 2)
        enh = ito_enhancement(path)
        rng = np.random.default_rng(0)
        for _ in range(50):
            i, j, k = sorted(int(v) for v in rng.integers(0, path.n_steps + 1, 3))
            assert enh.chen_defect(i, j, k) <= 1e-12

    def test_single_step_area_vanishes(self):
        # left-point convention: the inner sum over one step is empty
        path = sample_brownian(2, 1.0, 1e-2, 2)
        enh = ito_enhancement(path)
        for i in (0, 17, 99):
            assert np.max(np.abs(enh.levy_area(i, i + 1))) <= 1e-15

    def test_diagonal_mean_is_ito(self):
        # E int B dB = 0 in the Ito convention
        t, dt, n_seeds = 1.0, 0.05, 10_000
        vals = []
        for seed in range(n_seeds):
            path = sample_brownian(seed, t, dt, 1)
            enh = ito_enhancement(path)
            vals.append(enh.levy_area(0, path.n_steps)[0, 0])
        # var of B_kk(0,t) is ~ t^2/2; 4-sigma band on the mean
        assert abs(np.mean(vals)) <= 4.0 * (t / np.sqrt(2.0)) / np.sqrt(n_seeds)


class TestRoughIntegral:
    def test_constant_integrand_telescopes(self):
        path = sample_brownian(3, 1.0, 1e-3, 1)
        enh = ito_enhancement(path)
        g = np.ones((1, path.n_steps + 1))
        gub = np.zeros((1, 1, path.n_steps + 1))
        cp = ControlledPath(times=path.times, g=g, gubinelli=gub)
        vals = path.values()
        got = rough_integral(cp, enh, (0.2, 0.8), 0)
        want = vals[0, path.index_of(0.8)] - vals[0, path.index_of(0.2)]
        assert abs(got - want) <= 1e-14

    def test_brownian_integrand_is_stride_independent(self):
        # for g = B with identity Gubinelli derivative the compensated sum
        # telescopes to the fine Ito sum on any sub-partition
        path = sample_brownian(4, 1.0, 1e-3, 1)
        enh = ito_enhancement(path)
        vals = path.values()
        cp = ControlledPath(times=path.times, g=vals.copy(),
                            gubinelli=np.ones((1, 1, path.n_steps + 1)))
        fine = rough_integral(cp, enh, (0.0, 1.0), 0, stride=1)
        for stride in (4, 16, 1000):
            coarse = rough_integral(cp, enh, (0.0, 1.0), 0, stride=stride)
            assert abs(coarse - fine) <= 1e-12 * max(1.0, abs(fine))

    def test_ito_formula_value(self):
        # int_0^T B dB = (B(T)^2 - T) / 2 up to the partition fluctuation
        horizon, dt = 0.02, 1e-4
        errs = []
        for seed in range(40):
            path = sample_brownian(seed, horizon, dt, 1)
            enh = ito_enhancement(path)
            vals = path.values()
            cp = ControlledPath(times=path.times, g=vals.copy(),
                                gubinelli=np.ones((1, 1, path.n_steps + 1)))
            got = rough_integral(cp, enh, (0.0, horizon), 0)
            errs.append(abs(got - 0.5 * vals[0, -1] ** 2 + 0.5 * horizon))
        assert np.mean(errs) <= 1e-3

    def test_refinement_shrinks_the_error(self):
        # quadratic-variation fluctuation scales like sqrt(dt)
        horizon = 0.02
        maes = []
        for dt in (4e-4, 1e-4):
            errs = []
            for seed in range(60):
                path = sample_brownian(seed, horizon, dt, 1)
                enh = ito_enhancement(path)
                vals = path.values()
                cp = ControlledPath(times=path.times, g=vals.copy(),
                                    gubinelli=np.ones((1, 1, path.n_steps + 1)))
                got = rough_integral(cp, enh, (0.0, horizon), 0)
                errs.append(abs(got - 0.5 * vals[0, -1] ** 2 + 0.5 * horizon))
            maes.append(np.mean(errs))
        assert maes[1] <= maes[0]

    def test_controlled_weights_have_gubinelli_derivative(self):
        spec = case1_spec(temporal="controlled", horizon=8.0, dt=1e-3)
        path = sample_brownian(5, spec.horizon, spec.dt, 1)
        cp = spec.controlled_path(path)
        report = holder_remainder_report(cp, path)
        # remainder of a controlled path scales ~ h^(2 alpha), alpha ~ 1/2
        assert report["fitted_exponent"] > 0.6


class TestTailProcesses:
    def test_zero_amplitude_gives_zero_tails(self):
        spec = case1_spec(amplitude=0.0)
        path = sample_brownian(0, spec.horizon, spec.dt, 1)
        tails, b_star, sigma_hat = tail_processes(spec, path)
        assert np.all(tails == 0.0) and np.all(b_star == 0.0)
        assert sigma_hat == 0.0

    def test_b_star_nonincreasing_and_terminal_zero(self):
        noise = build_realization(case1_spec(), seed=11)
        assert np.all(np.diff(noise.B_star) <= 1e-15)
        assert noise.B_star[-1] == 0.0
        assert abs(noise.tails[0, -1]) == 0.0

    def test_truncation_contract_enforced(self):
        spec = case1_spec(horizon=4.0)  # exp tail at t=4 is far above 1e-12
        path = sample_brownian(0, spec.horizon, spec.dt, 1)
        with pytest.raises(TruncationError):
            tail_processes(spec, path)

    def test_sigma_hat_is_first_time_below_one(self):
        spec = case1_spec(amplitude=3.0, horizon=120.0)
        noise = build_realization(spec, seed=2)
        i = np.argmax(noise.B_star <= 1.0)
        assert noise.sigma_hat == noise.path.times[i]
        assert noise.B_star_at(noise.sigma_hat) <= 1.0


class TestTransformFields:
    def test_phase_field_purely_imaginary(self, grid):
        noise = build_realization(case1_spec(), seed=5)
        w = phase_field_W(noise, 3.0, grid)
        assert np.max(np.abs(w.values.real)) == 0.0

    def test_phase_field_vanishes_at_horizon(self, grid):
        noise = build_realization(case1_spec(), seed=5)
        w = phase_field_W(noise, noise.horizon, grid)
        assert np.max(np.abs(w.values)) == 0.0

    def test_gauge_factor_unimodular(self, grid):
        noise = build_realization(case1_spec(), seed=5)
        w = phase_field_W(noise, 1.5, grid)
        assert np.max(np.abs(np.abs(np.exp(w.values)) - 1.0)) <= 1e-14

    def test_zero_noise_coefficients_vanish(self, grid):
        noise = build_realization(case1_spec(amplitude=0.0), seed=5)
        b, c = coefficients(noise, 2.0, grid)
        assert np.max(np.abs(b.values)) == 0.0
        assert np.max(np.abs(c.values)) == 0.0

    def test_real_part_of_c_nonpositive(self, grid):
        noise = build_realization(case1_spec(), seed=6)
        _, c = coefficients(noise, 2.0, grid)
        assert np.max(c.values.real) <= 0.0

    def test_b_is_twice_gradient_of_W(self, grid):
        noise = build_realization(case1_spec(), seed=6)
        for t in (0.5, 2.0, 10.0):
            b, _ = coefficients(noise, t, grid)
            w = phase_field_W(noise, t, grid)
            dw = derivative(w, 1)
            assert np.max(np.abs(b.values - 2.0 * dw.values)) <= 1e-10
            assert np.max(np.abs(b.values.real)) <= 1e-14


class TestAssumptionValidators:
    @pytest.mark.parametrize("spec_fn", [case1_spec, case2_spec])
    def test_asymptotic_flatness(self, grid, spec_fn):
        assert flatness_defect(spec_fn(), grid) <= 1e-6

    def test_case1_decay_fit(self, grid):
        rate, _ = spatial_decay_fit(case1_spec(), grid)
        assert rate >= 0.9  # sech(x) tail

    def test_case2_decay_fit(self, grid):
        exponent, _ = spatial_decay_fit(case2_spec(), grid)
        assert exponent >= 7.0  # nu_star = 8 power-law tail

    def test_log_tail_inequality(self):
        # int_t g^2 log(1 / int_t g^2) <= c / t^2 for t >= 2, by construction
        spec = case2_spec()
        c_star = log_tail_constant(spec)
        assert np.isfinite(c_star) and c_star > 0
        for t in (2.0, 5.0, 17.0, 100.0):
            tail = spec.g_tail_sq(t)
            assert tail * np.log(1.0 / tail) <= c_star / t**2 + 1e-15

    def test_case2_requires_nu_star_at_least_4(self):
        with pytest.raises(InvalidArgument):
            case2_spec(nu_star=2.0)
