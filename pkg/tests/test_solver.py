import numpy as np
import pytest

from besovmhd.littlewood_paley import build_partition
from besovmhd.solver import (ConfigError, InvariantViolation, MHDState, NormSeries, SolverConfig,
                             make_initial_data, nonlinear_terms, rhs, run, step, with_overrides)
from besovmhd.spectral import FourierGrid
from oracles import cosine_mode


def ot_state(N=32, **kw):
    return make_initial_data("orszag_tang", FourierGrid(2, N), **kw)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(nu=0.0), dict(dt=-1.0), dict(t_end=float("nan")), dict(R=0.0),
                                    dict(dealias="none"), dict(sample_every=0), dict(integrator="euler")])
    def test_rejects_invalid(self, kw):
        base = dict(nu=0.1, dt=0.01, t_end=0.1)
        base.update(kw)
        with pytest.raises(ConfigError):
            SolverConfig(**base)

    def test_steps_land_on_end_time(self):
        cfg = SolverConfig(nu=0.1, dt=0.03, t_end=0.1)
        assert cfg.n_steps == 4
        assert cfg.step_size * cfg.n_steps == pytest.approx(0.1, rel=1e-15)


class TestInitialData:
    def test_orszag_tang_is_solenoidal(self):
        s = ot_state()
        g = s.grid
        assert g.divergence_defect(s.u) < 1e-12 and g.divergence_defect(s.B) < 1e-12
        assert g.hermitian_defect(s.u) == 0.0
        assert not np.any(g.mean(s.u)) and not np.any(g.mean(s.B))

    def test_random_spectrum_is_deterministic(self):
        g = FourierGrid(3, 8)
        a = make_initial_data("random_spectrum", g, seed=5)
        b = make_initial_data("random_spectrum", g, seed=5)
        c = make_initial_data("random_spectrum", g, seed=6)
        assert np.array_equal(a.u, b.u) and np.array_equal(a.B, b.B)
        assert not np.array_equal(a.u, c.u)

    def test_besov_norm_proportional_to_amplitude(self):
        from besovmhd.littlewood_paley import besov

        g = FourierGrid(3, 8)
        part = build_partition(g)
        norms = [besov(part, make_initial_data("random_spectrum", g, seed=2, amp_B=a).B, 1.5) for a in (0.5, 2.0)]
        assert np.isfinite(norms[0]) and norms[1] == pytest.approx(4 * norms[0], rel=1e-12)

    def test_kind_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            make_initial_data("orszag_tang", FourierGrid(3, 8))
        with pytest.raises(ConfigError):
            make_initial_data("abc_like", FourierGrid(2, 8))
        with pytest.raises(ConfigError):
            make_initial_data("vortex", FourierGrid(2, 8))


class TestRHS:
    def test_single_mode_navier_stokes(self):
        g = FourierGrid(2, 16)
        u = g.leray(np.stack([np.zeros(g.shape, dtype=complex), cosine_mode(g, (1, 0))]))
        s = MHDState(0.0, u, np.zeros_like(u), g)
        cfg = SolverConfig(nu=0.3, dt=0.01, t_end=0.1)
        du, dB = rhs(s, cfg)
        assert np.max(np.abs(du - 0.3 * g.laplacian(u))) < 1e-15
        assert not np.any(dB)

    def test_zero_velocity(self):
        s = make_initial_data("random_spectrum", FourierGrid(3, 8), seed=3)
        s.u[...] = 0
        g = s.grid
        cfg = SolverConfig(nu=0.1, dt=0.01, t_end=0.1, R=3.0)
        du, dB = rhs(s, cfg)
        expected = g.leray(g.truncate(g.advect(s.B, s.B), 3.0))
        assert np.max(np.abs(du - expected)) < 1e-15
        assert np.max(np.abs(dB)) < 1e-15

    @pytest.mark.parametrize("dim", [2, 3])
    def test_energy_pairing(self, dim):
        g = FourierGrid(dim, 16 if dim == 2 else 8)
        s = make_initial_data("random_spectrum", g, seed=11, alpha_u=1.5, alpha_B=1.5)
        cfg = SolverConfig(nu=0.07, dt=0.01, t_end=0.1, R=5.0)
        s.u, s.B = g.truncate(s.u, 5.0), g.truncate(s.B, 5.0)
        du, dB = rhs(s, cfg)
        lhs = g.inner(du, s.u) + g.inner(dB, s.B)
        ref = -0.07 * g.sobolev_norm(s.u, 1.0) ** 2
        assert abs(lhs - ref) <= 1e-11 * abs(ref)

    def test_outputs_in_ball_and_solenoidal(self):
        s = make_initial_data("random_spectrum", FourierGrid(3, 8), seed=13)
        g = s.grid
        du, dB = rhs(s, SolverConfig(nu=0.1, dt=0.01, t_end=0.1, R=2.5))
        for f in (du, dB):
            assert g.divergence_defect(f) < 1e-13
            assert not np.any(f[:, g.xi_abs > 2.5])


class TestRun:
    def test_heat_decay(self):
        s = make_initial_data("random_spectrum", FourierGrid(2, 16), seed=1)
        s.B[...] = 0
        cfg = SolverConfig(nu=0.2, dt=0.01, t_end=0.3, nonlinear=False)
        final, _ = run(s, cfg)
        exact = np.exp(-0.2 * s.grid.xi2 * 0.3) * s.u
        assert np.max(np.abs(final.u - exact)) <= 1e-10 * np.max(np.abs(s.u))

    def test_frozen_velocity_keeps_B(self):
        s = make_initial_data("random_spectrum", FourierGrid(2, 16), seed=1)
        s.u[...] = 0
        cfg = SolverConfig(nu=0.2, dt=0.01, t_end=0.2, freeze_u=True)
        final, series = run(s, cfg)
        assert np.array_equal(final.B, s.B)
        assert np.all(series["B_Bn2"] == series["B_Bn2"][0])

    def test_zero_magnetic_field_stays_zero(self):
        s = ot_state(16)
        s.B[...] = 0
        final, _ = run(s, SolverConfig(nu=0.05, dt=0.01, t_end=0.1))
        assert not np.any(final.B)

    def test_fourth_order_convergence(self):
        s = ot_state(32)
        g = s.grid

        def at(dt):
            return run(s, SolverConfig(nu=0.01, dt=dt, t_end=0.4))[0]

        a, b, c = at(0.04), at(0.02), at(0.01)
        e1 = g.l2_norm(a.u - b.u) + g.l2_norm(a.B - b.B)
        e2 = g.l2_norm(b.u - c.u) + g.l2_norm(b.B - c.B)
        assert 12 < e1 / e2 < 20

    def test_deterministic_replay(self):
        s = make_initial_data("random_spectrum", FourierGrid(3, 8), seed=4)
        cfg = SolverConfig(nu=0.05, dt=0.01, t_end=0.05)
        f1, s1 = run(s, cfg)
        f2, s2 = run(s, cfg)
        assert np.array_equal(f1.u, f2.u) and np.array_equal(f1.B, f2.B)
        assert np.array_equal(s1.as_array(), s2.as_array())

    def test_invariants_along_run(self):
        s = make_initial_data("random_spectrum", FourierGrid(3, 8), seed=4)
        g = s.grid
        R = 3.0
        seen = []

        def check(n, state, y):
            seen.append(n)
            assert g.divergence_defect(state.u) < 1e-11
            assert not np.any(state.u[:, g.xi_abs > R]) and not np.any(state.B[:, g.xi_abs > R])

        _, series = run(s, SolverConfig(nu=0.05, dt=0.01, t_end=0.1, R=R, sample_every=3), on_sample=check)
        assert seen == [0, 3, 6, 9, 10]
        t = series["t"]
        assert np.all(np.diff(t) > 0)
        for key in ("Y", "Z", "int_u_Hn2_sq", "int_grad_u_sq"):
            assert np.all(np.diff(series[key]) >= 0)

    def test_extras_do_not_change_trajectory(self):
        s = make_initial_data("random_spectrum", FourierGrid(3, 8), seed=4)
        cfg = SolverConfig(nu=0.05, dt=0.01, t_end=0.05)
        plain, _ = run(s, cfg)
        extra, _ = run(s, cfg, extras={"v": (np.zeros_like(s.u), lambda nl: nl.NBB)})
        assert np.array_equal(plain.u, extra.u)

    def test_nan_aborts(self):
        s = ot_state(16)
        s.u[0, 1, 0] = np.nan
        with pytest.raises(InvariantViolation):
            run(s, SolverConfig(nu=0.05, dt=0.01, t_end=0.05))

    def test_cfl_violation_is_config_error(self):
        s = ot_state(32, amp_u=50.0)
        with pytest.raises(ConfigError):
            run(s, SolverConfig(nu=0.05, dt=0.1, t_end=0.5))

    def test_zero_end_time(self):
        s = ot_state(16)
        final, series = run(s, SolverConfig(nu=0.05, dt=0.01, t_end=0.0))
        assert len(series) == 1 and np.array_equal(final.u, s.u)

    def test_single_step_matches_run(self):
        s = ot_state(16)
        cfg = SolverConfig(nu=0.05, dt=0.01, t_end=0.01)
        assert np.array_equal(step(s, cfg).u, run(s, cfg)[0].u)


class TestSeries:
    def test_rejects_non_increasing_time(self):
        s = ot_state(16)
        _, series = run(s, SolverConfig(nu=0.05, dt=0.01, t_end=0.02))
        row = {c: series[c][-1] for c in series.columns}
        with pytest.raises(InvariantViolation):
            series.append(row)

    def test_column_round_trip(self):
        s = ot_state(16)
        _, series = run(s, SolverConfig(nu=0.05, dt=0.01, t_end=0.02))
        again = NormSeries.from_columns(2, 0.05, {c: series[c] for c in series.columns})
        assert np.array_equal(again.as_array(), series.as_array())
        with pytest.raises(ValueError):
            NormSeries.from_columns(2, 0.05, {"t": series["t"]})

    def test_time_derivative_columns(self):
        s = ot_state(16)
        cfg = SolverConfig(nu=0.05, dt=0.01, t_end=0.0)
        _, series = run(s, cfg)
        nl = nonlinear_terms(s.grid, s.u, s.B, cfg)
        from besovmhd.littlewood_paley import besov

        part = build_partition(s.grid)
        assert series["dBdt_Bn2m1"][0] == pytest.approx(besov(part, nl.NB, 0.0), rel=1e-14)
        cfg2 = with_overrides(cfg, nonlinear=False)
        assert run(s, cfg2)[1]["nl_u_Bn2m1"][0] == 0.0
