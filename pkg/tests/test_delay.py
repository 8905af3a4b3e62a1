"""Threshold computation and the lag solve against independent oracles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from sddesim.delay import (
    MassTable,
    SurvivalMap,
    compute_threshold,
    constant_survival,
    default_survival,
    delay_bounds,
    delay_lipschitz_bound,
    delay_ode_rhs,
    monotone_comparison_holds,
    solve_delay,
    survival_mass,
)
from sddesim.errors import DelayDomainError, ModelContractError, OrderingError
from sddesim.history import history_from_profiles, make_time_profile


def const_history(value, n=1):
    return history_from_profiles(make_time_profile("constant", value=value),
                                 np.ones(n))


def line_history(dt=1e-3, horizon=5.0):
    """State equal to time for positive times and zero before."""
    h = const_history(0.0)
    ts = dt * np.arange(1, int(round(horizon / dt)) + 1)
    h.append_block(ts, ts[:, None])
    return h


class TestThreshold:
    def test_unit_rate_over_unit_window(self):
        delta = compute_threshold(const_history(0.0, 3), np.ones(3),
                                  constant_survival(1.0), dt=0.1)
        assert_allclose(delta, np.ones(3), atol=1e-14)

    def test_crowding_rate_on_a_receding_ramp(self):
        # initial data -s with the default survival: rate 1/(1 - s) on s <= 0
        prof = make_time_profile("linear", value=0.0, slope=-1.0)
        h = history_from_profiles(prof, np.ones(2))
        delta = compute_threshold(h, np.ones(2), default_survival(), dt=1e-3)
        oracle, _ = quad(lambda s: 1.0 / (1.0 - s), -1.0, 0.0)
        assert oracle == pytest.approx(np.log(2.0), abs=1e-12)
        assert_allclose(delta, oracle, atol=5e-7)

    def test_empty_window_gives_zero(self):
        delta = compute_threshold(const_history(1.0, 2), np.zeros(2),
                                  default_survival(), dt=0.1)
        assert_allclose(delta, 0.0, atol=0)

    def test_negative_initial_lag_is_rejected(self):
        with pytest.raises(ValueError, match="entry 1"):
            compute_threshold(const_history(1.0, 2), np.array([0.5, -0.1]),
                              default_survival(), dt=0.1)


class TestSolve:
    def test_unit_rate_inverts_to_the_threshold(self):
        for value in (0.0, 1.0, -2.0):
            lag = solve_delay(const_history(value, 3), np.full(3, 0.7),
                              constant_survival(1.0), dt=0.05)
            assert_allclose(lag, 0.7, atol=1e-10)

    def test_zero_threshold_short_circuits_to_zero(self):
        lag = solve_delay(const_history(1.0, 2), np.zeros(2),
                          default_survival(), dt=0.1)
        assert np.array_equal(lag, np.zeros(2))

    def test_negative_threshold_uses_the_explicit_branch(self):
        h = const_history(1.0, 2)  # f(1) = 1/2 pointwise
        lag = solve_delay(h, np.array([-0.3, -1.0]), default_survival(), dt=0.1)
        assert_allclose(lag, np.array([-0.6, -2.0]), atol=1e-14)

    def test_line_state_matches_the_closed_form(self):
        dt = 1e-3
        h = line_history(dt=dt)
        f = default_survival()
        for t in (1.0, 1.5, 2.0, 3.5, 5.0):
            view = h.rebase(t)
            lag = solve_delay(view, np.ones(1), f, t=t, tau0=np.ones(1), dt=dt)
            if t >= np.e - 1.0:
                exact = (1.0 + t) * (1.0 - np.exp(-1.0))
            else:
                exact = t + 1.0 - np.log(1.0 + t)
            # quadrature oracle for the same threshold equation
            kink = [0.0] if t - exact < 0.0 < t else None
            mass, _ = quad(lambda s: 1.0 / (1.0 + max(s, 0.0)), t - exact, t,
                           points=kink)
            assert mass == pytest.approx(1.0, abs=1e-9)
            assert lag[0] == pytest.approx(exact, abs=1e-6)

    def test_unreachable_threshold_names_the_point(self):
        h = const_history(0.0, 3)
        with pytest.raises(DelayDomainError, match="grid index"):
            solve_delay(h, np.array([0.5, 1e9, 0.5]), constant_survival(1.0),
                        dt=0.1, window_cap=100.0)

    def test_solve_requires_a_rebased_history(self):
        h = line_history(dt=0.25, horizon=1.0)
        with pytest.raises(ValueError):
            solve_delay(h, np.ones(1), default_survival(), dt=0.25)

    def test_roots_are_strictly_bracketed(self):
        dt = 1e-3
        h = line_history(dt=dt, horizon=3.0)
        f = default_survival()
        t = 2.5
        view = h.rebase(t)
        tol = 1e-10
        lag = solve_delay(view, np.ones(1), f, t=t, tau0=np.ones(1), dt=dt, tol=tol)
        step = 10 * tol * (1.0 + lag)
        below = survival_mass(view, f, -(lag - step), 0.0, dt)
        above = survival_mass(view, f, -(lag + step), 0.0, dt)
        assert below[0] < 1.0 < above[0]


class TestLagEvolutionRate:
    def test_constant_state_has_stationary_lag(self):
        h = const_history(2.0, 3)
        h.append(1.0, np.full(3, 2.0))
        rate = delay_ode_rhs(h, np.full(3, 0.5), default_survival(), 0.8)
        assert_allclose(rate, 0.0, atol=1e-14)

    def test_constant_survival_freezes_the_lag(self):
        h = line_history(dt=0.25, horizon=2.0)
        rate = delay_ode_rhs(h, np.array([0.7]), constant_survival(3.0), 1.5)
        assert_allclose(rate, 0.0, atol=1e-14)

    def test_line_state_rate_has_the_closed_form(self):
        h = line_history(dt=1e-3, horizon=4.0)
        f = default_survival()
        t, lag = 3.0, 1.2  # t - lag >= 0
        rate = delay_ode_rhs(h, np.array([lag]), f, t)
        assert rate[0] == pytest.approx(lag / (1.0 + t), abs=1e-9)

    def test_nonpositive_survival_is_a_contract_violation(self):
        bad = SurvivalMap(lambda u: 1.0 - np.maximum(u, 0.0), bound=1.0, lip=1.0)
        h = const_history(2.0, 1)
        h.append(0.5, np.array([2.0]))
        with pytest.raises(ModelContractError):
            delay_ode_rhs(h, np.array([0.2]), bad, 0.4)


class TestAPrioriBounds:
    def test_constant_survival_pins_the_lag(self):
        lo, hi = delay_bounds(np.full(3, 0.8), const_history(1.0, 3),
                              constant_survival(2.0), M=5.0, dt=0.1)
        assert lo == pytest.approx(0.8)
        assert hi == pytest.approx(0.8)

    def test_default_survival_worked_example(self):
        lo, hi = delay_bounds(np.ones(2), const_history(1.0, 2),
                              default_survival(), M=1.0, dt=0.05)
        assert lo == pytest.approx(0.5)
        assert hi == pytest.approx(2.0)

    def test_zero_initial_lag_gives_zero_lower_bound(self):
        lo, _ = delay_bounds(np.zeros(2), const_history(1.0, 2),
                             default_survival(), M=1.0, dt=0.05)
        assert lo == 0.0


class TestSensitivityBound:
    def test_identical_data_has_zero_gap(self):
        h = const_history(1.0, 2)
        tau0 = np.ones(2)
        f = default_survival()
        L = delay_lipschitz_bound(f, 1.0, h, tau0, h, tau0, dt=0.05)
        delta = compute_threshold(h, tau0, f, dt=0.05)
        lag = solve_delay(h, delta, f, dt=0.05)
        assert L > 0.0
        assert np.max(np.abs(lag - lag)) <= L * 0.0 + 1e-12

    def test_constant_survival_gap_is_explicit(self):
        c = 2.0
        f = constant_survival(c)
        h = const_history(0.0, 2)
        tau_a, tau_b = np.full(2, 0.5), np.full(2, 0.9)
        delta_a = compute_threshold(h, tau_a, f, dt=0.05)
        delta_b = compute_threshold(h, tau_b, f, dt=0.05)
        lag_a = solve_delay(h, delta_a, f, dt=0.05)
        lag_b = solve_delay(h, delta_b, f, dt=0.05)
        L = delay_lipschitz_bound(f, 1.0, h, tau_a, h, tau_b, dt=0.05)
        gap = np.max(np.abs(lag_a - lag_b))
        assert gap == pytest.approx(np.max(np.abs(delta_a - delta_b)) / c, abs=1e-10)
        assert L >= 1.0 / c
        assert gap <= L * np.max(np.abs(delta_a - delta_b)) + 1e-10


class TestMonotoneComparison:
    def test_equal_histories_give_equal_lags(self):
        h = const_history(1.0, 2)
        delta = compute_threshold(h, np.ones(2), default_survival(), dt=0.05)
        assert monotone_comparison_holds(h, h, delta, default_survival(), dt=0.05)

    def test_worked_constant_pair(self):
        f = default_survival()
        lo, hi = const_history(0.0, 2), const_history(1.0, 2)
        lag_lo = solve_delay(lo, np.ones(2), f, dt=0.05)
        lag_hi = solve_delay(hi, np.ones(2), f, dt=0.05)
        assert_allclose(lag_lo, 1.0, atol=1e-9)
        assert_allclose(lag_hi, 2.0, atol=1e-9)
        assert monotone_comparison_holds(lo, hi, np.ones(2), f, dt=0.05)

    def test_randomized_ordered_pairs(self):
        rng = np.random.default_rng(17)
        f = default_survival()
        for _ in range(60):
            base = rng.uniform(0.0, 1.0)
            amp = rng.uniform(0.0, 0.4)
            freq = rng.uniform(0.1, 1.0)
            lo = history_from_profiles(
                make_time_profile("sinusoid", value=base + amp, amplitude=amp,
                                  frequency=freq),
                np.ones(4),
            )
            bump = rng.uniform(0.0, 1.0)
            hi = history_from_profiles(
                make_time_profile("sinusoid", value=base + amp + bump,
                                  amplitude=amp, frequency=freq),
                np.ones(4),
            )
            delta = compute_threshold(lo, rng.uniform(0.2, 1.0) * np.ones(4),
                                      f, dt=0.02)
            assert monotone_comparison_holds(lo, hi, delta, f, dt=0.02)

    def test_unordered_pair_raises(self):
        f = default_survival()
        lo, hi = const_history(1.0, 2), const_history(0.0, 2)
        with pytest.raises(OrderingError):
            monotone_comparison_holds(lo, hi, np.ones(2), f, dt=0.05)


class TestSurvivalRegistration:
    def test_well_behaved_map_registers(self):
        SurvivalMap.register(lambda u: 1.0 / (1.0 + np.maximum(u, 0.0)),
                             bound=1.0, lip=1.0)

    def test_increasing_map_is_rejected(self):
        with pytest.raises(ModelContractError, match="monotone"):
            SurvivalMap.register(lambda u: 1.0 + np.maximum(u, 0.0),
                                 bound=np.inf if False else 1e9, lip=1.0)

    def test_vanishing_map_is_rejected(self):
        with pytest.raises(ModelContractError):
            SurvivalMap.register(lambda u: np.maximum(-u, 0.0), bound=10.0, lip=1.0)

    def test_nonpositive_bound_is_rejected(self):
        with pytest.raises(ValueError):
            constant_survival(0.0)


class TestMassTableConsistency:
    def test_threshold_and_solve_share_the_quadrature(self):
        # a solve at time zero must return the initial lag to root tolerance
        prof = make_time_profile("sinusoid", value=1.0, amplitude=0.5,
                                 frequency=0.4)
        h = history_from_profiles(prof, np.array([1.0, 1.3, 0.8]))
        tau0 = np.array([0.37, 0.91, 1.24])
        f = default_survival()
        delta = compute_threshold(h, tau0, f, dt=0.01)
        lag = solve_delay(h, delta, f, t=0.0, tau0=tau0, dt=0.01, tol=1e-12)
        assert_allclose(lag, tau0, atol=1e-10)

    def test_mass_differences_are_stable_under_extension(self):
        h = const_history(1.0, 2)
        f = default_survival()
        table = MassTable(h, f, 0.1, lo=-1.0, hi=0.0)
        before = table.cum_at(0.0) - table.cum_at(np.array([-0.55, -0.8]))
        table.ensure_low(-5.0)
        after = table.cum_at(0.0) - table.cum_at(np.array([-0.55, -0.8]))
        assert np.array_equal(before, after)
