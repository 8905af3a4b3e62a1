"""Simulation engine for delay systems whose lag is set by a threshold
integral over the solution's own past, with a spatially structured
forest-growth model built in.

Quick start::

    import numpy as np
    from sddesim import (SolverConfig, simulate, forest_model, ForestParams,
                         history_from_profiles, make_time_profile)

    n = 64
    initial = history_from_profiles(make_time_profile("constant", value=1.0),
                                    np.ones(n))
    model = forest_model(ForestParams(0.2, 0.1, 1.0, 1e-2), n)
    traj = simulate(model, initial, np.ones(n), horizon=5.0,
                    cfg=SolverConfig(dt=1e-3))
    print(traj.verdict, traj.fields[-1])
"""

from .delay import (
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
from .errors import (
    ConfigError,
    ContractionFailure,
    DelayDomainError,
    HistoryOverrunError,
    ModelContractError,
    OrderingError,
    SddeError,
)
from .history import (
    HistoryFunction,
    RebasedHistory,
    grid_positions,
    history_from_profiles,
    lip_seminorm_samples,
    make_space_profile,
    make_time_profile,
    sup_norm_samples,
    weighted_lip_seminorm,
    weighted_sup_norm,
)
from .models import (
    BirthCache,
    DelayedField,
    ForestModel,
    ForestParams,
    JuvenileDiagnostics,
    ModelSpec,
    balance_residual,
    balance_residual_series,
    build_model,
    comparison_bound_check,
    comparison_bound_margin,
    constant_model,
    decay_model,
    delayed_growth_model,
    finite_species_model,
    forest_model,
    juvenile_integral,
    juvenile_series,
    riccati_model,
    zero_model,
)
from .spatial import ResolventOperator, resolvent_apply, resolvent_matrix
from .stepper import (
    ABORTED,
    BLOW_UP,
    DOMAIN_ERROR,
    REACHED_HORIZON,
    SemiflowState,
    SolverConfig,
    Trajectory,
    choose_radius,
    initial_bound,
    picard_window,
    restart_and_compare,
    simulate,
    verify_solution_residual,
)
from .verify import SUITE_NAMES, run_suite

__version__ = "0.1.0"
