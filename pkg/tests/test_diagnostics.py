import numpy as np
import pytest

from stochsoliton.diagnostics import (
    LocalizationSet,
    decay_fit,
    lyapunov,
    quadratic_H,
    remainder_control_report,
)
from stochsoliton.errors import FitFailure, InvalidArgument
from stochsoliton.construction import TubeSpec
from stochsoliton.ground_state import SolitonParams, rescale, soliton
from stochsoliton.modulation import decompose
from stochsoliton.spectral_grid import Field, derivative, norm


TWO_SOL = [SolitonParams(w=1.0, v=-1.0), SolitonParams(w=1.0, v=1.0)]


class TestLocalization:
    def test_partition_of_unity(self, grid):
        locs = LocalizationSet(TWO_SOL)
        for t in (1.0, 4.0, 19.0):
            phis = locs.windows(t, grid.x)
            assert np.max(np.abs(np.sum(phis, axis=0) - 1.0)) <= 1e-12

    def test_single_soliton_window_is_one(self, grid):
        locs = LocalizationSet([SolitonParams(w=1.0, v=1.0)])
        assert np.all(locs.windows(2.0, grid.x) == 1.0)

    def test_cutoff_inequalities(self):
        # (Psi')^2 <= C Psi and (Psi'')^2 <= C Psi' with finite fitted C
        locs = LocalizationSet(TWO_SOL)
        c1, c2 = locs.cutoff_inequality_constants()
        assert np.isfinite(c1) and np.isfinite(c2)
        assert c1 > 0 and c2 > 0

    def test_derivative_bounds_admit_uniform_constant(self, grid):
        # t (|d_x phi| + |d_x^3 phi| + |d_t phi|) stays below a fitted C;
        # the third-derivative term makes the supremum sit at early times
        locs = LocalizationSet(TWO_SOL)
        consts = [locs.derivative_bound_constant(t, grid.x) for t in (2.0, 8.0, 32.0)]
        assert all(np.isfinite(c) and c > 0 for c in consts)
        assert max(consts) == consts[0] < 20.0

    def test_windows_track_soliton_order(self, grid):
        # soliton 0 has v = -1: its window must cover the left half
        locs = LocalizationSet(TWO_SOL)
        phis = locs.windows(10.0, grid.x)
        left = grid.x < -5.0
        assert np.all(phis[0][left] > 0.99)
        assert np.all(phis[1][left] < 0.01)

    def test_requires_t_at_least_one(self, grid):
        locs = LocalizationSet(TWO_SOL)
        with pytest.raises(InvalidArgument):
            locs.windows_sorted(0.5, grid.x)


class TestLyapunov:
    def test_zero_field(self, grid):
        locs = LocalizationSet(TWO_SOL)
        assert lyapunov(Field.zero(grid), 2.0, locs, TWO_SOL, 6.0) == 0.0

    def test_gauge_invariance(self, Q, grid):
        locs = LocalizationSet(TWO_SOL)
        vals = (soliton(TWO_SOL[0], Q, 4.0, grid).values
                + soliton(TWO_SOL[1], Q, 4.0, grid).values)
        u = Field(grid, vals)
        rotated = Field(grid, np.exp(1.3j) * vals)
        a = lyapunov(u, 4.0, locs, TWO_SOL, 6.0)
        b = lyapunov(rotated, 4.0, locs, TWO_SOL, 6.0)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_value_on_exact_soliton_sum(self, Q, grid):
        # G = sum_k ||dQ_w||^2 - 2/(p+1) ||Q_w||_{p+1}^{p+1} + w^-2 ||Q_w||^2
        # up to the exponentially small window cross terms
        locs = LocalizationSet(TWO_SOL)
        t = 8.0
        vals = (soliton(TWO_SOL[0], Q, t, grid).values
                + soliton(TWO_SOL[1], Q, t, grid).values)
        got = lyapunov(Field(grid, vals), t, locs, TWO_SOL, 6.0)
        pred = 0.0
        for par in TWO_SOL:
            qw = rescale(Q, par.w)
            dqw = derivative(qw, 1)
            pred += (norm(dqw, "L2") ** 2
                     - (2.0 / 7.0) * norm(qw, "Lp", p=7.0) ** 7
                     + norm(qw, "L2") ** 2 / par.w**2)
        assert abs(got - pred) <= 1e-4

    def test_early_time_rejected(self, grid):
        locs = LocalizationSet(TWO_SOL)
        with pytest.raises(InvalidArgument):
            lyapunov(Field.zero(grid), 0.5, locs, TWO_SOL, 6.0)


class TestQuadraticH:
    def _decomposed(self, Q, eig, scale):
        grid = Q.grid
        t = 6.0
        vals = (soliton(TWO_SOL[0], Q, t, grid).values
                + soliton(TWO_SOL[1], Q, t, grid).values)
        bump = scale * np.exp(-0.3 * (grid.x - 2.0) ** 2) * (1.0 + 0.7j)
        u = Field(grid, vals + bump)
        return decompose(u, t, (np.zeros(2), np.zeros(2)), TWO_SOL, Q, eig)

    def test_zero_remainder(self, Q, eig):
        st = self._decomposed(Q, eig, 0.0)
        locs = LocalizationSet(TWO_SOL)
        assert abs(quadratic_H(st, locs, TWO_SOL, Q)) <= 1e-10

    def test_quadratic_homogeneity(self, Q, eig):
        locs = LocalizationSet(TWO_SOL)
        st1 = self._decomposed(Q, eig, 1e-3)
        st2 = self._decomposed(Q, eig, 2e-3)
        h1 = quadratic_H(st1, locs, TWO_SOL, Q)
        h2 = quadratic_H(st2, locs, TWO_SOL, Q)
        # parameters adjust slightly, so homogeneity holds to leading order
        assert abs(h2 / h1 - 4.0) <= 0.05

    def test_coercivity_with_projections(self, Q, eig):
        # || eps ||_H1^2 <= C (H(eps) + |a+|^2 + |a-|^2) on decomposed states
        locs = LocalizationSet(TWO_SOL)
        rng = np.random.default_rng(7)
        ratios = []
        for _ in range(5):
            grid = Q.grid
            t = 6.0
            vals = (soliton(TWO_SOL[0], Q, t, grid).values
                    + soliton(TWO_SOL[1], Q, t, grid).values)
            envelope = np.exp(-0.25 * grid.x**2) + np.exp(-0.25 * (grid.x - 4) ** 2)
            bump = 1e-3 * envelope * (rng.normal() + 1j * rng.normal())
            bump += 1e-3 * np.exp(-0.3 * (grid.x + 6) ** 2) * rng.normal()
            u = Field(grid, vals + bump)
            st = decompose(u, t, (np.zeros(2), np.zeros(2)), TWO_SOL, Q, eig)
            h_val = quadratic_H(st, locs, TWO_SOL, Q)
            control = h_val + np.sum(st.a_plus**2) + np.sum(st.a_minus**2)
            ratios.append(st.eps_h1**2 / control)
        assert all(r > 0 for r in ratios)
        assert max(ratios) < 100.0

    def test_second_difference_of_lyapunov(self, Q, eig):
        # |G(R + eps) - G(R) - H(eps)| = O(||eps||^3) for a single soliton
        par = SolitonParams(w=1.0, v=1.0)
        locs = LocalizationSet([par])
        grid = Q.grid
        t = 6.0
        base = soliton(par, Q, t, grid).values
        diffs = []
        sizes = (1e-2, 1e-3)
        for scale in sizes:
            bump = scale * np.exp(-0.4 * (grid.x - 6.0) ** 2) * (1.0 - 0.5j)
            u = Field(grid, base + bump)
            st = decompose(u, t, (np.zeros(1), np.zeros(1)), [par], Q, eig)
            g_val = lyapunov(u, t, locs, [par], 6.0)
            g_base = lyapunov(Field(grid, base), t, locs, [par], 6.0)
            h_val = quadratic_H(st, locs, [par], Q)
            diffs.append(abs(g_val - g_base - h_val))
        # cubic scaling: shrinking eps by 10 shrinks the defect by ~1000
        assert diffs[1] <= 5e-2 * diffs[0]


class TestRemainderControl:
    def test_zero_trajectory_dominated(self, Q, eig):
        from stochsoliton.modulation import ModulationState

        grid = Q.grid
        states = [
            ModulationState(t=float(t), alpha=np.zeros(2), theta=np.zeros(2),
                            epsilon=Field.zero(grid), a_plus=np.zeros(2),
                            a_minus=np.zeros(2), eps_h1=0.0)
            for t in (2.0, 3.0, 4.0)
        ]
        tube = TubeSpec(delta_tilde=0.125, case="I")
        rep = remainder_control_report(states, tube)
        assert rep["domination_constant"] == 0.0

    def test_constructed_run_dominated(self, ws):
        report = ws.det_construct()
        traj = report["runs"][0]["_trajectory"]
        tube = TubeSpec(delta_tilde=report["delta_tilde"], case="I", slack=4.0)
        rep = remainder_control_report(traj.states, tube, p=6.0)
        assert rep["domination_constant"] <= 1e3 * tube.slack


class TestDecayFit:
    def test_exponential_with_linear_prefactor(self):
        ts = np.linspace(10.0, 20.0, 40)
        errs = ts * np.exp(-0.5 * ts)
        slope, _, _ = decay_fit(ts, errs, "I", prefactor_power=1.0)
        assert abs(slope + 0.5) <= 0.01

    def test_power_law(self):
        ts = np.linspace(5.0, 50.0, 40)
        errs = ts**-3.0
        exponent, _, _ = decay_fit(ts, errs, "II")
        assert abs(exponent + 3.0) <= 0.06

    def test_constant_series(self):
        ts = np.linspace(1.0, 10.0, 20)
        slope, _, _ = decay_fit(ts, np.full(20, 0.1), "I")
        assert abs(slope) <= 1e-12

    def test_degenerate_window_rejected(self):
        ts = np.linspace(0.0, 1.0, 20)
        with pytest.raises(FitFailure):
            decay_fit(ts, np.full(20, 1e-15), "I")
