"""Built-in models: species table, forest dynamics, birth cache, juveniles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sddesim.delay import constant_survival, default_survival
from sddesim.errors import ConfigError
from sddesim.history import grid_positions, history_from_profiles, make_time_profile
from sddesim.models import (
    BirthCache,
    ForestParams,
    balance_residual,
    balance_residual_series,
    build_model,
    comparison_bound_check,
    comparison_bound_margin,
    decay_model,
    finite_species_model,
    forest_model,
    juvenile_integral,
    juvenile_series,
)
from sddesim.spatial import ResolventOperator
from sddesim.stepper import (
    REACHED_HORIZON,
    SolverConfig,
    simulate,
    verify_solution_residual,
)


def constant_history(value, n):
    return history_from_profiles(make_time_profile("constant", value=1.0),
                                 np.full(n, float(value)))


class TestFiniteSpecies:
    def test_single_species_decay_matches_the_scalar_model(self):
        mu = 0.8
        g = [lambda fields, lag, row: -mu * fields[0]]
        model = finite_species_model(g, 1, survival=constant_survival(1.0))
        init = constant_history(1.0, 1)
        cfg = SolverConfig(dt=1e-2, residual_samples=0)
        traj = simulate(model, init, np.ones(1), 1.0, cfg)
        ref = simulate(decay_model(rate=mu, survival=constant_survival(1.0)),
                       init, np.ones(1), 1.0, cfg)
        assert_allclose(traj.fields, ref.fields, atol=1e-13)

    def test_zero_table_is_stationary(self):
        g = [lambda fields, lag, row: 0.0] * 3
        model = finite_species_model(g, 3, survival=default_survival())
        init = constant_history(2.0, 3)
        traj = simulate(model, init, np.full(3, 0.5), 1.0,
                        SolverConfig(dt=1e-2, residual_samples=0))
        assert_allclose(traj.fields, 2.0, atol=1e-14)
        assert_allclose(traj.lags, 0.5, atol=1e-10)

    def test_cross_delayed_coupling_satisfies_the_contract(self):
        # species 0 grows from species 1's lagged value and self-limits
        g = [
            lambda fields, lag, row: row[1] - fields[0],
            lambda fields, lag, row: -0.3 * fields[1],
        ]
        model = finite_species_model(g, 2, survival=constant_survival(1.0))
        init = constant_history(1.0, 2)
        cfg = SolverConfig(dt=5e-3, residual_samples=0)
        traj = simulate(model, init, np.full(2, 0.7), 2.0, cfg)
        report = verify_solution_residual(traj, model, n_samples=6)
        assert report["state_residual_max"] <= 5e-5
        assert report["lag_residual_max"] <= 1e-10

    def test_wrong_table_length_is_rejected(self):
        with pytest.raises(ConfigError):
            finite_species_model([lambda f, v, r: 0.0], 2)


class TestForestDynamics:
    def test_no_births_reduces_to_adult_decay(self):
        n = 8
        p = ForestParams(mu_juvenile=0.4, mu_adult=0.25, birth_rate=0.0,
                         smoothing=1e-2)
        space = 1.0 + 0.5 * np.sin(2 * np.pi * grid_positions(n))
        init = history_from_profiles(make_time_profile("constant", value=1.0), space)
        traj = simulate(forest_model(p, n), init, np.ones(n), 1.0,
                        SolverConfig(dt=2e-3, residual_samples=0))
        assert_allclose(traj.fields[-1], space * np.exp(-0.25), atol=5e-7)

    def test_spatially_constant_data_matches_the_scalar_model(self):
        n = 12
        p = ForestParams(0.3, 0.15, 0.9, 2e-2)
        cfg = SolverConfig(dt=2e-3, residual_samples=0)
        traj_n = simulate(forest_model(p, n), constant_history(1.0, n),
                          np.ones(n), 1.5, cfg)
        traj_1 = simulate(forest_model(p, 1), constant_history(1.0, 1),
                          np.ones(1), 1.5, cfg)
        assert np.max(np.abs(traj_n.fields - traj_1.fields[:, :1])) <= 1e-11
        assert np.max(np.abs(traj_n.lags - traj_1.lags[:, :1])) <= 1e-11

    def test_undiscounted_births_grow_linearly_at_first(self):
        # no mortality, unit survival: growth rate is the lagged birth field,
        # so the state is affine until the lag window leaves the initial era
        n = 4
        beta = 0.6
        p = ForestParams(mu_juvenile=0.0, mu_adult=0.0, birth_rate=beta,
                         smoothing=5e-3)
        model = forest_model(p, n, survival=constant_survival(1.0))
        traj = simulate(model, constant_history(2.0, n), np.ones(n), 1.0,
                        SolverConfig(dt=2e-3, residual_samples=0))
        expected = 2.0 * (1.0 + beta * traj.times)
        assert np.max(np.abs(traj.fields - expected[:, None])) <= 1e-10

    def test_negative_rates_are_rejected(self):
        with pytest.raises(ConfigError):
            ForestParams(mu_juvenile=-0.1)


class TestBirthCache:
    def setup_method(self):
        self.n = 8
        self.op = ResolventOperator(0.05, self.n)

    def test_constant_state_gives_constant_births(self):
        beta = 0.7
        c = 2.0
        cache = BirthCache(self.op, beta)
        h = constant_history(c, self.n)
        h.append(1.0, np.full(self.n, c))
        cache.start(h, 0.5)
        for s in (-3.0, -0.2, 0.0, 0.4, 1.0):
            assert_allclose(cache.get(s), beta * c, atol=1e-12)

    def test_node_queries_return_the_stored_rows(self):
        rng = np.random.default_rng(4)
        cache = BirthCache(self.op, 1.0)
        h = constant_history(1.0, self.n)
        fields = rng.uniform(0.5, 2.0, size=(3, self.n))
        h.append_block([0.5, 1.0, 1.5], fields)
        cache.start(h, 0.5)
        for t, f in zip((0.5, 1.0, 1.5), fields):
            assert np.array_equal(cache.get(t), self.op.apply(f))

    def test_between_node_queries_interpolate_exactly_for_linear_data(self):
        # the smoothing operator commutes with linear interpolation in time
        cache = BirthCache(self.op, 1.0)
        h = history_from_profiles(make_time_profile("constant", value=0.0),
                                  np.zeros(self.n))
        ramp = np.linspace(0.5, 2.0, self.n)
        h.append(1.0, ramp)
        cache.start(h, 1.0)
        s = 0.3
        assert_allclose(cache.get(s), self.op.apply(s * ramp), atol=1e-14)

    def test_initial_era_is_computed_on_demand_and_memoized(self):
        calls = []
        base = constant_history(1.5, self.n)

        def phi(t):
            calls.append(t)
            return np.full(self.n, 1.5)

        h_cb = base.__class__(phi=phi, n=self.n)
        cache = BirthCache(self.op, 2.0)
        cache.start(h_cb, 0.5)
        first = cache.get(-0.7)
        again = cache.get(-0.7)
        assert np.array_equal(first, again)
        assert calls.count(-0.7) == 1
        assert_allclose(first, 3.0, atol=1e-12)

    def test_diagonal_matches_full_queries(self):
        rng = np.random.default_rng(5)
        cache = BirthCache(self.op, 0.9)
        prof = make_time_profile("sinusoid", value=1.0, amplitude=0.4,
                                 frequency=0.7)
        h = history_from_profiles(prof, np.linspace(1.0, 2.0, self.n))
        h.append_block([0.25, 0.5], rng.uniform(0.5, 1.5, size=(2, self.n)))
        cache.start(h, 0.25)
        ts = rng.uniform(-1.0, 0.5, size=self.n)
        diag = cache.value_diag(ts)
        expected = [cache.get(t)[i] for i, t in enumerate(ts)]
        assert_allclose(diag, expected, atol=1e-13)


class TestJuveniles:
    def make_state(self, value, lag, n=6, horizon=2.0, dt=0.05):
        h = constant_history(value, n)
        ts = dt * np.arange(1, int(horizon / dt) + 1)
        h.append_block(ts, np.full((len(ts), n), float(value)))

        class State:
            pass

        st = State()
        st.history, st.t, st.tau = h, horizon, np.full(n, lag)
        return st

    def test_no_births_means_no_juveniles(self):
        p = ForestParams(0.3, 0.1, 0.0, 1e-2)
        op = ResolventOperator(p.smoothing, 6)
        st = self.make_state(2.0, 0.8)
        J = juvenile_integral(st, p, op)
        assert_allclose(J.juveniles, 0.0, atol=0)

    def test_undiscounted_constant_births_accumulate_linearly(self):
        beta, c, lag = 0.9, 2.0, 0.8
        p = ForestParams(0.0, 0.1, beta, 1e-2)
        op = ResolventOperator(p.smoothing, 6)
        st = self.make_state(c, lag)
        J = juvenile_integral(st, p, op)
        assert_allclose(J.juveniles, beta * c * lag, atol=1e-12)

    def test_discounted_constant_births_have_the_closed_form(self):
        beta, c, lag, mu = 0.9, 2.0, 0.8, 0.6
        p = ForestParams(mu, 0.1, beta, 1e-2)
        op = ResolventOperator(p.smoothing, 6)
        st = self.make_state(c, lag)
        J = juvenile_integral(st, p, op)
        exact = beta * c * (1.0 - np.exp(-mu * lag)) / mu
        assert_allclose(J.juveniles, exact, atol=2e-5)

    def test_series_agrees_with_single_time_integrals(self):
        n = 6
        p = ForestParams(0.4, 0.2, 0.8, 1e-2)
        model = forest_model(p, n)
        init = history_from_profiles(
            make_time_profile("constant", value=1.0),
            1.0 + 0.3 * np.sin(2 * np.pi * grid_positions(n)),
        )
        cfg = SolverConfig(dt=5e-3, residual_samples=0)
        traj = simulate(model, init, np.ones(n), 1.0, cfg)
        series = juvenile_series(traj.history, traj.times, traj.lags, p,
                                 model.op, cfg.dt)
        for i in (0, len(traj.times) // 2, len(traj.times) - 1):
            st = traj.state_at(traj.times[i])
            single = juvenile_integral(st, p, model.op, dt=cfg.dt)
            assert_allclose(series[i], single.juveniles, atol=1e-11)


class TestBalanceIdentity:
    def test_stationary_zero_rates_have_zero_residual(self):
        n = 4
        p = ForestParams(0.0, 0.0, 0.0, 1e-2)
        model = forest_model(p, n)
        traj = simulate(model, constant_history(1.0, n), np.ones(n), 0.5,
                        SolverConfig(dt=1e-2, residual_samples=0))
        _, resid = balance_residual_series(traj, p, model.op, dt=1e-2)
        assert np.max(np.abs(resid)) <= 1e-12

    def test_decay_only_residual_is_second_order_small(self):
        n = 4
        dt = 5e-3
        p = ForestParams(0.3, 0.4, 0.0, 1e-2)
        model = forest_model(p, n)
        traj = simulate(model, constant_history(1.0, n), np.ones(n), 1.0,
                        SolverConfig(dt=dt, residual_samples=0))
        field = balance_residual(traj, p, model.op, index=10, dt=dt)
        assert np.max(np.abs(field)) <= 1.0 * dt**2

    def test_residual_shrinks_when_the_substep_halves(self):
        # measured past the start-up kink, where the scheme is cleanly
        # second order (the kink cell itself is first order with a
        # phase-sensitive constant)
        n = 8
        p = ForestParams(0.2, 0.1, 1.0, 1e-2)
        init = history_from_profiles(
            make_time_profile("constant", value=1.0),
            1.0 + 0.4 * np.sin(2 * np.pi * grid_positions(n)),
        )
        maxima = {}
        for dt in (4e-3, 2e-3):
            model = forest_model(p, n)
            traj = simulate(model, init, np.ones(n), 2.0,
                            SolverConfig(dt=dt, residual_samples=0))
            mids, resid = balance_residual_series(traj, p, model.op, dt=dt)
            maxima[dt] = np.max(np.abs(resid[mids > 1.5]))
        assert maxima[4e-3] / maxima[2e-3] >= 2.0


class TestComparisonBound:
    def test_decay_only_bound_is_tight_for_equal_rates(self):
        n = 8
        mu = 0.5
        p = ForestParams(mu, mu, 0.0, 1e-2)
        model = forest_model(p, n)
        traj = simulate(model, constant_history(1.0, n), np.ones(n), 1.0,
                        SolverConfig(dt=2e-3, residual_samples=0))
        margin = comparison_bound_margin(traj, p, model.op, dt=2e-3)
        assert margin <= 1e-8
        # no-juvenile decay tracks the bound closely at the final time
        bound_final = np.exp(-mu * traj.times[-1]) * traj.fields[0]
        assert_allclose(traj.fields[-1], bound_final, rtol=1e-4)

    def test_time_zero_bound_dominates_the_adults(self):
        n = 8
        p = ForestParams(0.2, 0.1, 0.8, 1e-2)
        model = forest_model(p, n)
        traj = simulate(model, constant_history(1.0, n), np.ones(n), 0.2,
                        SolverConfig(dt=5e-3, residual_samples=0))
        assert comparison_bound_check(traj, p, model.op, times=[0.0])

    def test_generic_nonnegative_run_respects_the_bound(self):
        n = 16
        p = ForestParams(0.3, 0.2, 1.1, 5e-3)
        init = history_from_profiles(
            make_time_profile("constant", value=1.0),
            1.0 + 0.6 * np.sin(2 * np.pi * grid_positions(n)),
        )
        model = forest_model(p, n)
        traj = simulate(model, init, np.full(n, 0.8), 3.0,
                        SolverConfig(dt=2e-3, residual_samples=0))
        assert traj.verdict == REACHED_HORIZON
        assert comparison_bound_check(traj, p, model.op)


class TestRegistry:
    def test_known_ids_build(self):
        for mid in ("zero", "constant", "decay", "delayed_growth", "riccati"):
            model = build_model(mid, {}, 4)
            assert model.name == mid
        forest = build_model("forest", {"birth_rate": 0.5}, 8)
        assert forest.forest.birth_rate == 0.5

    def test_unknown_id_is_rejected(self):
        with pytest.raises(ConfigError):
            build_model("mystery", {}, 4)

    def test_survival_spec_is_honored(self):
        model = build_model("decay", {"survival": {"kind": "constant",
                                                   "value": 2.0}}, 4)
        assert model.survival.bound == 2.0
