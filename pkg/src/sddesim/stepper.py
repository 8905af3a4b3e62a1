"""Advance the coupled state (field history, lag field) window by window.

Each window of ``k`` substeps is solved by fixed-point iteration of the
integral operator: starting from the constant extension of the window's
initial value, every iterate re-solves the lag at every substep against the
current iterate, evaluates the growth map, and integrates with the
trapezoid rule.  The iteration stops when successive iterates differ by less
than the configured tolerance; the newest iterate is committed, so the
committed values sit within one contraction factor of the discrete fixed
point.  Observed iterate differences and their ratios are recorded per
window; a ratio reaching 1 (or exhausting the iteration budget) signals
contraction failure, on which the driver halves the substep and retries,
down to a fixed floor.

Blow-up is declared when the sup norm of the field crosses the configured
ceiling; the crossing time is then localized by bisection on the committed
piecewise-linear trajectory and reported with its bracketing node pair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import simpson

from .delay import (
    CumulativeTable,
    MassTable,
    WindowMass,
    _Restricted,
    _solve_root,
    compute_threshold,
)
from .errors import (
    ContractionFailure,
    DelayDomainError,
    HistoryOverrunError,
    ModelContractError,
)
from .history import (
    HistoryFunction,
    RebasedHistory,
    lip_seminorm_samples,
    weighted_lip_seminorm,
    weighted_sup_norm,
)
from .models import DelayedField, _interp_rows_diag

__all__ = [
    "SolverConfig",
    "SemiflowState",
    "Trajectory",
    "WindowHistory",
    "picard_window",
    "choose_radius",
    "simulate",
    "restart_and_compare",
    "verify_solution_residual",
    "initial_bound",
    "REACHED_HORIZON",
    "BLOW_UP",
    "DOMAIN_ERROR",
    "ABORTED",
]

REACHED_HORIZON = "reached_horizon"
BLOW_UP = "blow_up"
DOMAIN_ERROR = "domain_error"
ABORTED = "aborted"

_DT_FLOOR_HALVINGS = 10


@dataclass
class SolverConfig:
    """Numerical knobs of one run."""

    dt: float = 1e-3
    window_steps: int = 8
    picard_tol: float = 1e-9
    picard_max_iter: int = 25
    blowup_threshold: float = 1e6
    tau_tol: float = 1e-12
    alpha: float = 0.0
    norm_window: float | None = None
    residual_samples: int = 4

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.window_steps < 1:
            raise ValueError("window_steps must be at least 1")
        if self.blowup_threshold <= 0.0:
            raise ValueError("blowup_threshold must be positive")
        for name in ("picard_tol", "tau_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.picard_max_iter < 2:
            raise ValueError("picard_max_iter must be at least 2")
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")


@dataclass
class SemiflowState:
    """The restartable state: full history, current lag field, conserved
    threshold, and the current time."""

    history: HistoryFunction
    tau: np.ndarray
    threshold: np.ndarray
    t: float


@dataclass
class Trajectory:
    """Committed record of one run."""

    times: np.ndarray
    fields: np.ndarray
    lags: np.ndarray
    history: HistoryFunction
    threshold: np.ndarray
    tau0: np.ndarray
    verdict: str
    config: SolverConfig
    model_name: str
    t_blowup: float | None = None
    blowup_bracket: tuple | None = None
    windows: list = dc_field(default_factory=list)
    residuals: dict | None = None
    error: str | None = None

    @property
    def sup_norms(self):
        return np.max(np.abs(self.fields), axis=1)

    def state_at(self, t):
        """Semiflow state at a committed node time."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * (1.0 + abs(t)):
            raise ValueError(f"{t} is not a committed node time")
        return SemiflowState(self.history, self.lags[i].copy(), self.threshold,
                             float(self.times[i]))


class WindowHistory:
    """Committed history extended by the in-progress window iterate."""

    def __init__(self, base, wtimes, wvalues):
        self.base = base
        self.wtimes = wtimes
        self.wvalues = wvalues
        self.n = base.n

    def evaluate(self, t, x=None):
        if t <= self.wtimes[0]:
            return self.base.evaluate(t, x)
        if t > self.wtimes[-1] + 1e-12:
            raise HistoryOverrunError("window history evaluated beyond its top")
        j = int(np.clip(np.searchsorted(self.wtimes, t, side="right") - 1, 0,
                        len(self.wtimes) - 2))
        t0 = self.wtimes[j]
        if t == t0:
            out = self.wvalues[j].copy()
        else:
            w = (t - t0) / (self.wtimes[j + 1] - t0)
            out = (1.0 - w) * self.wvalues[j] + w * self.wvalues[j + 1]
        return out if x is None else float(out[x])

    def evaluate_diag(self, ts):
        ts = np.asarray(ts, dtype=float)
        out = np.empty(len(ts))
        cols = np.arange(len(ts))
        below = ts <= self.wtimes[0]
        if below.any():
            # the base diagonal expects one time per grid point; clamp the
            # window-era entries and keep only the masked results
            dense = np.where(below, ts, self.wtimes[0])
            out[below] = self.base.evaluate_diag(dense)[below]
        above = ~below
        if above.any():
            out[above] = _interp_rows_diag(self.wtimes, self.wvalues, ts[above],
                                           cols[above])
        return out


def picard_window(state, model, cfg, steps=None, dt=None, mass=None):
    """Advance one window by fixed-point iteration.

    Returns ``(new_state, window_record, committed)`` with ``committed`` the
    tuple ``(times, fields, lags)`` of the new nodes.  Raises
    ``ContractionFailure`` when iterate differences stop contracting or the
    iteration budget runs out; nothing is committed in that case.
    """
    k = steps or cfg.window_steps
    dt = dt or cfg.dt
    t0 = state.t
    history = state.history
    survival = model.survival
    n = history.n
    if mass is None:
        mass = MassTable(history, survival, cfg.dt,
                         lo=-float(np.max(state.tau)) - (k + 2) * dt, hi=t0)
    wtimes = t0 + dt * np.arange(k + 1)
    hi_all = (wtimes[1:, None] - t0) + state.tau[None, :] + dt
    mass.ensure_low(t0 - float(hi_all.max()) - dt)

    A0 = history.evaluate(t0)
    W = np.repeat(A0[None, :], k + 1, axis=0)
    lags = np.repeat(state.tau[None, :], k + 1, axis=0)
    g = np.empty((k + 1, n))
    g0_done = False
    diffs, ratios = [], []
    delta = state.threshold

    # all substeps solve in one vectorized batch per iterate
    t_b = np.repeat(wtimes[1:], n)
    cols_b = np.tile(np.arange(n), k)
    delta_b = np.tile(delta, k)
    hi_b = hi_all.ravel()
    pos_b = np.where(delta_b > 0.0)[0] if np.any(delta == 0.0) else None

    def solve_lags(wm, warm):
        top_b = wm.wcum[1:].ravel()
        warm_b = warm.ravel()
        if pos_b is None:
            taus = _solve_root(wm, t_b, delta_b, hi_b, cfg.tau_tol,
                               warm=warm_b, top_cum=top_b, cols=cols_b)
        else:
            taus = np.zeros(k * n)
            taus[pos_b] = _solve_root(
                wm, t_b[pos_b], delta_b[pos_b], hi_b[pos_b], cfg.tau_tol,
                warm=warm_b[pos_b], top_cum=top_b[pos_b], cols=cols_b[pos_b],
            )
        return taus.reshape(k, n)

    converged = False
    for it in range(1, cfg.picard_max_iter + 1):
        wf = survival.apply(W)
        wm = WindowMass(mass, wtimes, wf)
        wh = WindowHistory(history, wtimes, W)
        model.window_update(wtimes, W)
        if not g0_done:
            # the window-start integrand only references committed data
            g[0] = model.evaluate(W[0], lags[0], DelayedField(wh, t0, lags[0]))
            g0_done = True
        lags[1:] = solve_lags(wm, lags[1:])
        for j in range(1, k + 1):
            g[j] = model.evaluate(W[j], lags[j], DelayedField(wh, wtimes[j], lags[j]))
        incr = np.cumsum(0.5 * dt * (g[:-1] + g[1:]), axis=0)
        Wnew = np.concatenate([A0[None, :], A0[None, :] + incr])
        d = float(np.max(np.abs(Wnew - W)))
        diffs.append(d)
        if len(diffs) >= 2 and diffs[-2] > 0.0:
            ratios.append(d / diffs[-2])
        W = Wnew
        if not np.isfinite(d):
            raise ContractionFailure(
                f"window at t={t0:.6g}: non-finite iterate", iterations=it, ratios=ratios
            )
        if d < cfg.picard_tol:
            converged = True
            break
        if ratios and ratios[-1] >= 1.0:
            raise ContractionFailure(
                f"window at t={t0:.6g}: iterate differences grow (ratio "
                f"{ratios[-1]:.3f})", iterations=it, ratios=ratios,
            )
    if not converged:
        raise ContractionFailure(
            f"window at t={t0:.6g}: no convergence in {cfg.picard_max_iter} iterations",
            iterations=cfg.picard_max_iter, ratios=ratios,
        )

    if not np.all(np.isfinite(W)):
        raise ModelContractError("growth map produced non-finite field values")

    # self-consistency pass: lags of the committed values
    wf = survival.apply(W)
    wm = WindowMass(mass, wtimes, wf)
    model.window_update(wtimes, W)
    lags[1:] = solve_lags(wm, lags[1:])

    history.append_block(wtimes[1:], W[1:])
    mass.append(wtimes[1:], W[1:])
    model.commit_nodes(wtimes[1:], W[1:])
    new_state = SemiflowState(history, lags[k].copy(), delta, float(wtimes[k]))
    record = {
        "start": float(t0),
        "dt": float(dt),
        "steps": int(k),
        "iterations": len(diffs),
        "diffs": diffs,
        "ratios": ratios,
    }
    return new_state, record, (wtimes[1:], W[1:].copy(), lags[1:].copy())


# -- window radius from the certified bounds -----------------------------------

def initial_bound(initial, tau0, alpha, window, dt):
    """Size of the initial data: weighted sup plus weighted Lipschitz of the
    initial history, plus the sup of the initial lag."""
    return (
        weighted_sup_norm(initial, alpha, window, dt=dt)
        + weighted_lip_seminorm(initial, alpha, window, dt=dt)
        + float(np.max(np.abs(tau0)))
    )


def choose_radius(M0, M, model, initial, tau0, cfg):
    """Largest dyadic fraction of the substep certifying the contraction.

    Evaluates the invasion bound (growth of the sup norm over one window)
    and the contraction bound assembled from the declared Lipschitz modulus,
    the lag sensitivity constant, and the iterates' Lipschitz estimate.
    Models without a declared modulus fall back to the configured substep
    (adaptive-only mode) with a warning.
    """
    from .delay import delay_bounds, delay_lipschitz_bound

    if M <= M0:
        raise ValueError("the target bound M must exceed the initial bound M0")
    L = model.lipschitz_modulus
    if L is None:
        warnings.warn(
            f"model {model.name!r} declares no Lipschitz modulus; window radius "
            f"falls back to dt (adaptive mode)", stacklevel=2,
        )
        return cfg.dt
    dt = cfg.dt
    tau0 = np.asarray(tau0, dtype=float)
    depth = max(float(tau0.max()), dt)
    ts = initial.sample_times(-depth, 0.0, dt)
    phi_samples = initial.sample(ts)
    phi_max = float(np.max(np.abs(phi_samples)))
    phi_lip = lip_seminorm_samples(ts, phi_samples)
    m_tilde = max(M, phi_max)
    _, lag_max = delay_bounds(tau0, initial, model.survival, M, dt)
    l_tau = delay_lipschitz_bound(model.survival, M, initial, tau0, initial, tau0, dt)

    growth = (2.0 * m_tilde + lag_max) * L(2.0 * m_tilde + lag_max) + model.origin_norm
    r1 = np.inf if growth <= 0.0 else (M - M0) / growth
    m_hat_l = max(growth, phi_lip)
    c = (2.0 + l_tau * (1.0 + m_hat_l)) * L(m_tilde + lag_max)
    r2 = np.inf if c <= 0.0 else 0.5 / c
    r_max = min(r1, r2)
    if not np.isfinite(r_max):
        return dt
    r = dt
    while r > r_max * (1.0 - 1e-12) and r > dt * 2.0**-_DT_FLOOR_HALVINGS:
        r /= 2.0
    # re-evaluate both conditions on the returned radius
    if growth > 0.0 and M0 + r * growth > M * (1.0 + 1e-9):
        warnings.warn("window radius fails the growth bound after flooring",
                      stacklevel=2)
    if c > 0.0 and r * c >= 0.5:
        warnings.warn("window radius fails the contraction bound after flooring",
                      stacklevel=2)
    return r


# -- the driver -----------------------------------------------------------------

def _fresh_history(initial):
    """Private run copy of initial data (runs append; callers keep theirs)."""
    if isinstance(initial, RebasedHistory):
        return HistoryFunction(phi=initial.evaluate, n=initial.n,
                               phi_history=initial)
    if abs(initial.current_time) > 1e-12:
        raise ValueError("initial data must have current_time == 0; rebase first")
    return HistoryFunction(phi=initial.phi, n=initial.n,
                           phi_terms=initial.phi_terms,
                           phi_history=initial.phi_history)


def _localize_crossing(t_lo, f_lo, t_hi, f_hi, level):
    """Bisect the linear interpolant between two nodes for the time where its
    sup norm crosses ``level``."""
    a, b = t_lo, t_hi
    for _ in range(60):
        mid = 0.5 * (a + b)
        w = (mid - t_lo) / (t_hi - t_lo)
        val = float(np.max(np.abs((1.0 - w) * f_lo + w * f_hi)))
        if val > level:
            b = mid
        else:
            a = mid
        if (b - a) <= 1e-12 * (1.0 + abs(b)):
            break
    return 0.5 * (a + b)


def simulate(model, initial, tau0, horizon, cfg, window_length=None):
    """Run the semiflow from initial data ``(initial, tau0)`` to ``horizon``.

    The horizon is rounded up to a whole number of substeps.  Returns a
    ``Trajectory`` whose verdict is one of reached-horizon, blow-up (with a
    localized crossing-time estimate), domain-error, or aborted (contraction
    failure at the substep floor).  Identical configuration and inputs give
    bit-identical trajectories.
    """
    tau0 = np.asarray(tau0, dtype=float)
    if np.any(tau0 < 0.0):
        raise ValueError("initial lag must be nonnegative")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    history = _fresh_history(initial)
    n = history.n
    if len(tau0) != n:
        raise ValueError("initial lag length does not match the grid")

    dt_run = cfg.dt
    k_run = cfg.window_steps
    if window_length is not None:
        if window_length >= cfg.dt:
            k_run = max(1, int(round(window_length / cfg.dt)))
        else:
            dt_run = float(window_length)
            k_run = 1

    threshold = compute_threshold(history, tau0, model.survival, cfg.dt)
    model.start_run(history, cfg.dt)
    mass = MassTable(history, model.survival, cfg.dt,
                     lo=-float(tau0.max()) - (k_run + 2) * dt_run, hi=0.0)
    state = SemiflowState(history, tau0.copy(), threshold, 0.0)

    times = [np.array([0.0])]
    fields = [history.values[:1].copy()]
    lags = [tau0[None, :].copy()]
    windows = []
    verdict = None
    t_blowup = None
    bracket = None
    error_note = None
    dt_floor = cfg.dt * 2.0**-_DT_FLOOR_HALVINGS

    while state.t < horizon - 1e-12 * max(1.0, horizon):
        remaining = horizon - state.t
        steps = min(k_run, max(1, int(np.ceil(remaining / dt_run - 1e-9))))
        try:
            state, record, committed = picard_window(
                state, model, cfg, steps=steps, dt=dt_run, mass=mass
            )
        except ContractionFailure as exc:
            if dt_run * 0.5 < dt_floor * (1.0 - 1e-12):
                verdict = ABORTED
                error_note = str(exc)
                break
            dt_run *= 0.5
            windows.append({"start": float(state.t), "dt": dt_run, "steps": 0,
                            "iterations": 0, "diffs": [], "ratios": [],
                            "halved": True})
            continue
        except (DelayDomainError, ModelContractError) as exc:
            verdict = DOMAIN_ERROR
            error_note = str(exc)
            break
        windows.append(record)
        wt, wf, wl = committed
        times.append(wt)
        fields.append(wf)
        lags.append(wl)
        sup = np.max(np.abs(wf), axis=1)
        if np.any(sup > cfg.blowup_threshold):
            all_t = np.concatenate(times)
            all_f = np.concatenate(fields)
            sup_all = np.max(np.abs(all_f), axis=1)
            i = max(int(np.argmax(sup_all > cfg.blowup_threshold)), 1)
            t_blowup = _localize_crossing(
                all_t[i - 1], all_f[i - 1], all_t[i], all_f[i], cfg.blowup_threshold
            )
            bracket = (float(all_t[i - 1]), float(all_t[i]))
            verdict = BLOW_UP
            break

    if verdict is None:
        verdict = REACHED_HORIZON

    traj = Trajectory(
        times=np.concatenate(times),
        fields=np.concatenate(fields),
        lags=np.concatenate(lags),
        history=history,
        threshold=threshold,
        tau0=tau0.copy(),
        verdict=verdict,
        config=cfg,
        model_name=model.name,
        t_blowup=t_blowup,
        blowup_bracket=bracket,
        windows=windows,
        error=error_note,
    )
    if verdict in (REACHED_HORIZON, BLOW_UP) and cfg.residual_samples > 0:
        try:
            traj.residuals = verify_solution_residual(
                traj, model, n_samples=cfg.residual_samples
            )
        except (ValueError, ModelContractError):  # diagnostics must not kill a run
            traj.residuals = None
    return traj


def restart_and_compare(model, initial, tau0, s, t, cfg):
    """Largest final-state discrepancy between a direct run to ``s + t`` and
    a run stopped at ``s`` then restarted from its extracted state.

    The restart takes the rebased history as new initial data and the lag
    field at ``s`` as the new initial lag; the conserved threshold is
    recomputed from that state, which reproduces the original one up to the
    lag tolerance.
    """
    direct = simulate(model, initial, np.asarray(tau0, dtype=float), s + t, cfg)
    first = simulate(model, initial, np.asarray(tau0, dtype=float), s, cfg)
    if direct.verdict != REACHED_HORIZON or first.verdict != REACHED_HORIZON:
        raise RuntimeError("restart comparison requires both runs to reach their horizon")
    i = int(np.argmin(np.abs(first.times - s)))
    view = first.history.rebase(float(first.times[i]))
    second = simulate(model, view, first.lags[i], t, cfg)
    if second.verdict != REACHED_HORIZON:
        raise RuntimeError("restarted run failed to reach its horizon")
    dev_field = float(np.max(np.abs(direct.fields[-1] - second.fields[-1])))
    dev_lag = float(np.max(np.abs(direct.lags[-1] - second.lags[-1])))
    return max(dev_field, dev_lag)


# -- solution-contract residuals -------------------------------------------------

def _refine_grid(grid, factor):
    cells = np.linspace(grid[:-1], grid[1:], factor, endpoint=False, axis=1)
    return np.append(cells.ravel(), grid[-1])


def verify_solution_residual(traj, model, sample_times=None, n_samples=8,
                             refine=8):
    """Residuals of both defining integral identities along a finished run.

    The state identity compares each committed value against the initial
    value plus an independent quadrature (Simpson) of the re-evaluated
    growth map over committed nodes.  The lag identity recomputes the
    survival mass over each point's own lag window on a grid refined well
    below the solver's, minus the conserved threshold.  Both residual maxima
    shrink at first order or better when the substep is halved.
    """
    model.start_run(traj.history, float(np.median(np.diff(traj.times))))
    m = len(traj.times)
    if sample_times is None:
        idx = np.unique(np.linspace(2, m - 1, min(n_samples, m - 2)).astype(int))
    else:
        idx = np.unique([int(np.argmin(np.abs(traj.times - t))) for t in sample_times])
        idx = idx[idx >= 2]
    if len(idx) == 0:
        return {"times": [], "state_residuals": [], "lag_residuals": [],
                "state_residual_max": 0.0, "lag_residual_max": 0.0}
    top = int(idx.max())
    g = np.empty((top + 1, traj.history.n))
    for j in range(top + 1):
        d = DelayedField(traj.history, traj.times[j], traj.lags[j])
        g[j] = model.evaluate(traj.fields[j], traj.lags[j], d)

    dt = float(np.median(np.diff(traj.times)))
    state_res = []
    lag_res = []
    for i in idx:
        quad = simpson(g[: i + 1], x=traj.times[: i + 1], axis=0)
        state_res.append(float(np.max(np.abs(
            traj.fields[i] - traj.fields[0] - quad
        ))))
        t_i = float(traj.times[i])
        lag_i = traj.lags[i]
        lo = t_i - float(lag_i.max()) - dt
        coarse = traj.history.sample_times(lo, t_i, dt)
        fine = _refine_grid(coarse, refine)
        rows = model.survival.apply(traj.history.sample(fine))
        table = CumulativeTable(fine, rows)
        mass = table.cum_at(t_i) - table.cum_at(t_i - lag_i)
        lag_res.append(float(np.max(np.abs(mass - traj.threshold))))
    return {
        "times": traj.times[idx].tolist(),
        "state_residuals": state_res,
        "lag_residuals": lag_res,
        "state_residual_max": max(state_res),
        "lag_residual_max": max(lag_res),
    }
