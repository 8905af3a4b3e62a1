"""Histories: evaluation, rebasing, append-only storage, weighted norms."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sddesim.errors import HistoryOverrunError
from sddesim.history import (
    HistoryFunction,
    grid_positions,
    history_from_profiles,
    lip_seminorm_samples,
    make_space_profile,
    make_time_profile,
    weighted_lip_seminorm,
    weighted_sup_norm,
)


def zero_start(n=3):
    return history_from_profiles(make_time_profile("constant", value=0.0),
                                 np.zeros(n))


def ramp_history(dt=0.25, horizon=2.0, n=3):
    """State equal to time for positive times, zero before."""
    h = zero_start(n)
    ts = dt * np.arange(1, int(round(horizon / dt)) + 1)
    h.append_block(ts, np.repeat(ts[:, None], n, axis=1))
    return h


class TestEvaluate:
    def test_node_value_is_returned_exactly(self):
        h = zero_start()
        field = np.array([0.3, -0.7, 2.5])
        h.append(0.5, field)
        out = h.evaluate(0.5)
        assert np.array_equal(out, field)

    def test_growth_from_rest_reaches_half_at_half_time(self):
        h = ramp_history(dt=0.25)
        assert h.evaluate(0.5)[0] == pytest.approx(0.5, abs=0.0)

    def test_linear_interpolation_between_nodes(self):
        h = zero_start(1)
        h.append(1.0, np.array([1.0]))
        assert h.evaluate(0.25)[0] == pytest.approx(0.25, abs=1e-15)

    def test_initial_era_uses_the_analytic_data(self):
        prof = make_time_profile("exponential", value=2.0, rate=0.5)
        h = history_from_profiles(prof, np.ones(2))
        assert h.evaluate(-3.0)[0] == pytest.approx(2.0 * np.exp(-1.5))

    def test_future_evaluation_raises(self):
        h = zero_start()
        with pytest.raises(HistoryOverrunError):
            h.evaluate(0.1)

    def test_single_entry_access(self):
        h = ramp_history()
        assert h.evaluate(0.75, x=1) == pytest.approx(0.75)

    def test_diagonal_matches_pointwise_evaluation(self):
        n = 5
        h = ramp_history(n=n)
        ts = np.array([-0.3, 0.1, 0.6, 1.2, 2.0])
        diag = h.evaluate_diag(ts)
        expected = [h.evaluate(t)[i] for i, t in enumerate(ts)]
        assert_allclose(diag, expected, rtol=0, atol=0)


class TestRebase:
    def test_zero_shift_is_the_identity(self):
        pristine = zero_start()
        assert pristine.rebase(0.0) is pristine
        evolved = ramp_history()
        view = evolved.rebase(0.0)
        ts = np.linspace(-2.0, 0.0, 21)
        assert np.array_equal(view.sample(ts), evolved.sample(ts))
        assert view.current_time == 0.0

    def test_shift_reads_the_past_of_the_parent(self):
        h = ramp_history(dt=0.25)
        v = h.rebase(1.0)
        assert v.evaluate(-0.5)[0] == pytest.approx(0.5)
        assert v.current_time == 0.0

    def test_two_shifts_compose_into_one(self):
        h = ramp_history(dt=0.25)
        once = h.rebase(1.5)
        twice = h.rebase(1.0).rebase(0.5)
        ts = np.linspace(-2.0, 0.0, 41)
        assert_allclose(twice.sample(ts), once.sample(ts), rtol=0, atol=0)

    def test_rebase_beyond_current_time_raises(self):
        h = ramp_history(horizon=1.0)
        with pytest.raises(ValueError):
            h.rebase(1.5)

    def test_view_rejects_positive_times(self):
        v = ramp_history().rebase(1.0)
        with pytest.raises(HistoryOverrunError):
            v.evaluate(0.5)


class TestAppendOnly:
    def test_earlier_values_are_bit_stable_under_appends(self):
        rng = np.random.default_rng(3)
        h = zero_start(4)
        for i in range(1, 40):
            h.append(0.1 * i, rng.normal(size=4))
        probe = np.linspace(-1.0, 3.9, 57)
        before = h.sample(probe)
        view = h.rebase(3.9)
        view_before = view.sample(np.linspace(-2.0, 0.0, 33))
        for i in range(40, 200):
            h.append(0.1 * i, rng.normal(size=4))
        assert np.array_equal(h.sample(probe), before)
        assert np.array_equal(view.sample(np.linspace(-2.0, 0.0, 33)), view_before)

    def test_append_must_advance_time(self):
        h = ramp_history()
        with pytest.raises(ValueError):
            h.append(1.0, np.zeros(3))


class TestSampleTimes:
    def test_window_ends_are_exact_and_nodes_included(self):
        h = ramp_history(dt=0.25, horizon=1.0)
        ts = h.sample_times(-0.6, 1.0, 0.25)
        assert ts[0] == -0.6
        assert ts[-1] == 1.0
        for node in (0.0, 0.25, 0.5):
            assert node in ts

    def test_initial_era_extends_on_the_substep_lattice(self):
        h = zero_start(1)
        ts = h.sample_times(-1.0, 0.0, 0.25)
        assert_allclose(ts, [-1.0, -0.75, -0.5, -0.25, 0.0], atol=1e-15)


class TestWeightedNorms:
    def test_constant_data_gives_the_constant(self):
        h = history_from_profiles(make_time_profile("constant", value=1.7),
                                  np.ones(3))
        for alpha in (0.0, 0.5, 2.0):
            assert weighted_sup_norm(h, alpha, 10.0, dt=0.1) == pytest.approx(1.7)

    def test_growing_exponential_cancels_its_weight(self):
        alpha = 0.6
        h = history_from_profiles(
            make_time_profile("exponential", value=1.0, rate=-alpha), np.ones(2))
        assert weighted_sup_norm(h, alpha, 12.0, dt=0.05) == pytest.approx(1.0)

    def test_zero_data_gives_zero(self):
        h = zero_start()
        assert weighted_sup_norm(h, 0.3, 5.0, dt=0.1) == 0.0

    def test_line_slope_is_the_unweighted_steepness(self):
        k = -2.5
        h = history_from_profiles(make_time_profile("linear", value=0.0, slope=k),
                                  np.ones(2))
        assert weighted_lip_seminorm(h, 0.0, 4.0, dt=0.1) == pytest.approx(abs(k))

    def test_constant_data_has_zero_steepness(self):
        h = history_from_profiles(make_time_profile("constant", value=3.0),
                                  np.ones(2))
        assert weighted_lip_seminorm(h, 0.0, 4.0, dt=0.1) == 0.0

    def test_steepness_is_subadditive_over_a_split(self):
        rng = np.random.default_rng(11)
        ts = np.linspace(-2.0, 0.0, 41)
        vals = rng.normal(size=(41, 3))
        mid = 20
        whole = lip_seminorm_samples(ts, vals)
        left = lip_seminorm_samples(ts[: mid + 1], vals[: mid + 1])
        right = lip_seminorm_samples(ts[mid:], vals[mid:])
        assert whole <= left + right + 1e-15

    def test_norms_require_a_rebased_history(self):
        h = ramp_history()
        with pytest.raises(ValueError):
            weighted_sup_norm(h, 0.0, 1.0, dt=0.1)


class TestEvolvedNormEstimates:
    """Window-splitting estimates for the weighted norms of evolved states."""

    @pytest.fixture()
    def evolved(self):
        rng = np.random.default_rng(5)
        prof = make_time_profile("sinusoid", value=1.0, amplitude=0.5, frequency=0.3)
        h = history_from_profiles(prof, 1.0 + 0.2 * grid_positions(3))
        dt = 0.125
        for i in range(1, 17):
            h.append(dt * i, rng.normal(scale=1.5, size=3) + 1.0)
        return h, dt

    @pytest.mark.parametrize("alpha", [0.0, 0.4, 1.1])
    def test_sup_norm_splits_across_the_start(self, evolved, alpha):
        h, dt = evolved
        t = h.current_time
        window = 12.0
        lhs = weighted_sup_norm(h.rebase(t), alpha, window, dt=dt)
        grid = np.arange(0.0, t + dt / 2, dt)
        recent = max(
            np.exp(alpha * (s - t)) * np.max(np.abs(h.evaluate(s))) for s in grid
        )
        initial = weighted_sup_norm(h.rebase(0.0), alpha, window, dt=dt)
        assert lhs <= recent + np.exp(-alpha * t) * initial + 1e-10

    @pytest.mark.parametrize("alpha", [0.0, 0.4, 1.1])
    def test_steepness_splits_across_the_start(self, evolved, alpha):
        h, dt = evolved
        t = h.current_time
        window = 12.0
        view = h.rebase(t)
        lhs = weighted_lip_seminorm(view, alpha, window, dt=dt)
        ts_recent = np.arange(-t, 0.0 + dt / 2, dt)
        recent = lip_seminorm_samples(
            ts_recent,
            np.exp(-alpha * np.abs(ts_recent))[:, None] * view.sample(ts_recent),
        )
        initial = weighted_lip_seminorm(h.rebase(0.0), alpha, window, dt=dt)
        assert lhs <= recent + np.exp(-alpha * t) * initial + 1e-10

    @pytest.mark.parametrize("alpha", [0.0, 0.4])
    def test_full_norm_splits_into_three_pieces(self, evolved, alpha):
        h, dt = evolved
        t = h.current_time
        window = 12.0
        view = h.rebase(t)
        lhs = (weighted_sup_norm(view, alpha, window, dt=dt)
               + weighted_lip_seminorm(view, alpha, window, dt=dt))
        grid = np.arange(0.0, t + dt / 2, dt)
        recent_sup = max(
            np.exp(alpha * (s - t)) * np.max(np.abs(h.evaluate(s))) for s in grid
        )
        ts_recent = np.arange(-t, 0.0 + dt / 2, dt)
        recent_lip = lip_seminorm_samples(
            ts_recent,
            np.exp(-alpha * np.abs(ts_recent))[:, None] * view.sample(ts_recent),
        )
        phi_norm = (weighted_sup_norm(h.rebase(0.0), alpha, window, dt=dt)
                    + weighted_lip_seminorm(h.rebase(0.0), alpha, window, dt=dt))
        assert lhs <= recent_sup + recent_lip + np.exp(-alpha * t) * phi_norm + 1e-10


class TestPresets:
    def test_space_profiles_evaluate_on_the_grid(self):
        vals = make_space_profile("sinusoid", 8, value=1.0, amplitude=0.5,
                                  frequency=1.0)
        x = grid_positions(8)
        assert_allclose(vals, 1.0 + 0.5 * np.sin(2 * np.pi * x), atol=1e-15)

    def test_unknown_kind_raises(self):
        with pytest.raises(ValueError):
            make_time_profile("polynomial", degree=3)

    def test_separable_history_matches_its_factors(self):
        prof = make_time_profile("sinusoid", value=0.5, amplitude=1.0,
                                 frequency=0.25)
        space = np.array([1.0, 2.0])
        h = history_from_profiles(prof, space)
        assert_allclose(h.evaluate(-1.3), prof(-1.3) * space, atol=1e-15)
