"""Model definitions: the growth map, its survival map, and built-ins.

A model is the pair ``(growth rhs, survival map)`` plus parameters.  The rhs
receives the current field, the current lag field, and a per-point shifted
field accessor whose entry ``(x, y)`` is the state at time ``t - lag(x)``
evaluated at grid point ``y``.

Built-in instances: a handful of scalar-oracle models used throughout the
test suite (zero, constant, decay, delayed growth, quadratic growth) and the
spatially structured forest model, where births are smoothed by the periodic
resolvent and the delayed birth field is read from a cached birth trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .delay import CumulativeTable, SurvivalMap, constant_survival, default_survival
from .errors import ConfigError, ModelContractError
from .spatial import ResolventOperator

__all__ = [
    "DelayedField",
    "ModelSpec",
    "ForestParams",
    "ForestModel",
    "BirthCache",
    "JuvenileDiagnostics",
    "zero_model",
    "constant_model",
    "decay_model",
    "delayed_growth_model",
    "riccati_model",
    "finite_species_model",
    "forest_model",
    "juvenile_integral",
    "juvenile_series",
    "balance_residual",
    "balance_residual_series",
    "comparison_bound_margin",
    "comparison_bound_check",
    "build_model",
]


class DelayedField:
    """The per-point shifted field at one instant.

    Entry ``(x, y)`` is the state at time ``t - lag(x)``, grid point ``y``.
    Rows and the diagonal are evaluated lazily against the backing history.
    """

    def __init__(self, history, t, lags):
        self.history = history
        self.t = float(t)
        self.lags = np.asarray(lags, dtype=float)
        self.times = self.t - self.lags
        self._diag = None

    def diag(self):
        """``A(t - lag(x), x)`` for every grid point ``x``."""
        if self._diag is None:
            self._diag = self.history.evaluate_diag(self.times)
        return self._diag

    def row(self, i):
        """The full field at grid point ``i``'s shifted time."""
        return self.history.evaluate(self.times[i])

    def matrix(self):
        """Dense ``(n, n)`` shifted field; row ``x`` is the field at
        ``t - lag(x)``.  Intended for small grids (species models, oracles)."""
        return np.array([self.row(i) for i in range(len(self.times))])


class ModelSpec:
    """One instance of the evolution problem.

    Parameters
    ----------
    rhs : callable ``(fields, lags, delayed) -> field``
        Growth map; must be total on finite inputs.
    survival : SurvivalMap
    lipschitz_modulus : callable ``M -> L(M)``, optional
        Declared Lipschitz modulus on bounded sets; enables the certified
        window-radius computation.  Without it the stepper runs in
        adaptive-only mode.
    origin_norm : float
        Sup norm of the rhs at the zero state (used by the radius bound).
    """

    def __init__(self, name, rhs, survival, params=None, lipschitz_modulus=None,
                 origin_norm=0.0):
        self.name = name
        self.rhs = rhs
        self.survival = survival
        self.params = dict(params or {})
        self.lipschitz_modulus = lipschitz_modulus
        self.origin_norm = float(origin_norm)

    def evaluate(self, fields, lags, delayed):
        return np.asarray(self.rhs(fields, lags, delayed), dtype=float)

    # per-run hooks; stateless models ignore them
    def start_run(self, history, dt):
        pass

    def window_update(self, wtimes, wvalues):
        pass

    def commit_nodes(self, ts, fields):
        pass

    def __repr__(self):
        return f"ModelSpec({self.name})"


# -- scalar-oracle models ------------------------------------------------------

def zero_model(survival=None):
    """Stationary model: the state never moves."""
    return ModelSpec(
        "zero", lambda a, v, d: np.zeros_like(a), survival or constant_survival(1.0),
        lipschitz_modulus=lambda m: 0.0, origin_norm=0.0,
    )


def constant_model(value=1.0, survival=None):
    """Constant growth: the state is a straight line in time."""
    return ModelSpec(
        "constant",
        lambda a, v, d: np.full_like(a, value),
        survival or constant_survival(1.0),
        params={"value": value},
        lipschitz_modulus=lambda m: 0.0,
        origin_norm=abs(value),
    )


def decay_model(rate=1.0, survival=None):
    """Pure decay toward zero; exact solution ``exp(-rate * t)`` times data."""
    return ModelSpec(
        "decay",
        lambda a, v, d: -rate * a,
        survival or constant_survival(1.0),
        params={"rate": rate},
        lipschitz_modulus=lambda m: rate,
        origin_norm=0.0,
    )


def delayed_growth_model(rate=1.0, survival=None):
    """Growth fed by each point's own lagged value."""
    return ModelSpec(
        "delayed_growth",
        lambda a, v, d: rate * d.diag(),
        survival or constant_survival(1.0),
        params={"rate": rate},
        lipschitz_modulus=lambda m: rate,
        origin_norm=0.0,
    )


def riccati_model(survival=None):
    """Quadratic self-reinforcement; blows up in finite time from positive data."""
    return ModelSpec(
        "riccati",
        lambda a, v, d: a * a,
        survival or constant_survival(1.0),
        lipschitz_modulus=lambda m: 2.0 * m,
        origin_norm=0.0,
    )


def finite_species_model(g_table, m, survival=None):
    """Species-indexed model on a grid of ``m`` points.

    ``g_table[x]`` is a callable ``(fields, lag_x, delayed_row) -> rate`` for
    species ``x``; the delayed row is the full field at that species' shifted
    time.
    """
    g_table = list(g_table)
    if len(g_table) != m:
        raise ConfigError(f"species table has {len(g_table)} entries for m={m}")

    def rhs(fields, lags, delayed):
        out = np.empty(m)
        for x in range(m):
            out[x] = g_table[x](fields, float(lags[x]), delayed.row(x))
        return out

    return ModelSpec("finite_species", rhs, survival or default_survival(),
                     params={"m": m})


# -- the forest model ----------------------------------------------------------

@dataclass
class ForestParams:
    """Rates of the spatially structured forest model (all nonnegative)."""

    mu_juvenile: float = 0.2   # juvenile mortality (1/time)
    mu_adult: float = 0.1      # adult mortality (1/time)
    birth_rate: float = 1.0    # births per adult (1/time)
    smoothing: float = 1e-2    # seed-dispersal smoothing (length^2)

    def __post_init__(self):
        for name in ("mu_juvenile", "mu_adult", "birth_rate", "smoothing"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"forest parameter {name} must be nonnegative")


def _interp_rows_diag(grid, rows, ts, cols):
    """Per-point linear interpolation of row data: value of column ``cols[i]``
    at time ``ts[i]``."""
    m = len(grid)
    if m == 1:
        return rows[0, cols]
    j = np.clip(np.searchsorted(grid, ts, side="right") - 1, 0, m - 2)
    t0 = grid[j]
    w = (ts - t0) / (grid[j + 1] - t0)
    return (1.0 - w) * rows[j, cols] + w * rows[j + 1, cols]


class BirthCache:
    """Birth field ``B(s, .) = resolvent[beta * A(s, .)]`` along a trajectory.

    Exact at trajectory nodes (one resolvent apply per node), linear in time
    between nodes, which is exact whenever the state is itself linear in time
    because the resolvent commutes with linear interpolation.  For times in
    the initial era the field is computed from the initial data on demand and
    memoized; histories carrying sampled structure or a separable
    decomposition use equivalent exact shortcuts instead.
    """

    def __init__(self, op, beta):
        self.op = op
        self.beta = float(beta)
        self._hist = None

    def start(self, history, dt):
        self._hist = history
        self._memo = {}
        self._m = len(history.times)
        self._cap = max(2 * self._m, 256)
        self._t_buf = np.empty(self._cap)
        self._b_buf = np.empty((self._cap, self.op.n))
        self._t_buf[: self._m] = history.times
        self._b_buf[: self._m] = self.op.apply(self.beta * history.values)
        self.ntimes = self._t_buf[: self._m]
        self.nB = self._b_buf[: self._m]
        self.wtimes = None
        self.wB = None
        # initial-era strategy
        self._init_nodes = None
        self._init_B = None
        self._tail_terms = None
        if history.phi_terms is not None:
            self._tail_terms = [
                (u_m, self.op.apply(self.beta * a_m)) for u_m, a_m in history.phi_terms
            ]
        elif getattr(history, "phi_history", None) is not None:
            src = history.phi_history
            self._init_nodes = np.asarray(src.times, dtype=float)
            self._init_B = self.op.apply(self.beta * np.asarray(src.values, dtype=float))
            parent_terms = getattr(src, "_parent", None)
            parent_terms = getattr(parent_terms, "phi_terms", None)
            if parent_terms is not None:
                off = src._offset
                self._tail_terms = [
                    (lambda t, u=u_m, o=off: u(np.asarray(t) + o), self.op.apply(self.beta * a_m))
                    for u_m, a_m in parent_terms
                ]

    def window_set(self, wtimes, wvalues):
        """Install the in-progress window overlay (replaced every iterate)."""
        self.wtimes = np.asarray(wtimes, dtype=float)
        self.wB = self.op.apply(self.beta * np.asarray(wvalues, dtype=float))

    def commit(self, ts, fields):
        ts = np.asarray(ts, dtype=float)
        k = len(ts)
        if self._m + k > self._cap:
            self._cap = max(2 * self._cap, self._m + k)
            t_new = np.empty(self._cap)
            b_new = np.empty((self._cap, self.op.n))
            t_new[: self._m] = self._t_buf[: self._m]
            b_new[: self._m] = self._b_buf[: self._m]
            self._t_buf, self._b_buf = t_new, b_new
        self._t_buf[self._m : self._m + k] = ts
        self._b_buf[self._m : self._m + k] = self.op.apply(self.beta * np.asarray(fields))
        self._m += k
        self.ntimes = self._t_buf[: self._m]
        self.nB = self._b_buf[: self._m]
        self.wtimes = None
        self.wB = None

    def _initial_diag(self, ts, cols):
        out = np.empty(len(ts))
        remaining = np.ones(len(ts), dtype=bool)
        if self._init_nodes is not None:
            deep = self._init_nodes[0]
            inside = ts >= deep
            if inside.any():
                out[inside] = _interp_rows_diag(
                    self._init_nodes, self._init_B, ts[inside], cols[inside]
                )
            remaining = ~inside
        if remaining.any():
            tr, cr = ts[remaining], cols[remaining]
            if self._tail_terms is not None:
                acc = np.zeros(len(tr))
                for u_m, rb_m in self._tail_terms:
                    acc += np.asarray(u_m(tr), dtype=float) * rb_m[cr]
                out[remaining] = acc
            else:
                vals = np.empty(len(tr))
                for k, (t_k, c_k) in enumerate(zip(tr, cr)):
                    key = float(t_k)
                    row = self._memo.get(key)
                    if row is None:
                        row = self.op.apply(self.beta * np.asarray(self._hist.phi(key)))
                        if len(self._memo) < 200_000:
                            self._memo[key] = row
                    vals[k] = row[c_k]
                out[remaining] = vals
        return out

    def value_diag(self, ts):
        """``B(ts[i], x_i)`` per grid point (the solver's hot path)."""
        ts = np.asarray(ts, dtype=float)
        cols = np.arange(len(ts))
        out = np.empty(len(ts))
        neg = ts < 0.0
        if neg.any():
            out[neg] = self._initial_diag(ts[neg], cols[neg])
        pos = ~neg
        if pos.any():
            tp, cp = ts[pos], cols[pos]
            top = self.ntimes[-1]
            if self.wtimes is not None:
                in_w = tp > top
                vals = np.empty(len(tp))
                if in_w.any():
                    vals[in_w] = _interp_rows_diag(self.wtimes, self.wB, tp[in_w], cp[in_w])
                if (~in_w).any():
                    vals[~in_w] = _interp_rows_diag(self.ntimes, self.nB, tp[~in_w], cp[~in_w])
                out[pos] = vals
            else:
                out[pos] = _interp_rows_diag(self.ntimes, self.nB, tp, cp)
        return out

    def get(self, s):
        """Full birth field at time ``s`` (the reference access path):
        stored rows at nodes, linear interpolation between nodes, on-demand
        computation from the initial data (memoized) for ``s <= 0``."""
        s = float(s)
        if s < 0.0:
            row = self._memo.get(s)
            if row is None:
                row = self.op.apply(self.beta * np.asarray(self._hist.phi(s)))
                self._memo[s] = row
            return row.copy()
        grid, rows = self.ntimes, self.nB
        if self.wtimes is not None and s > self.ntimes[-1]:
            grid, rows = self.wtimes, self.wB
        j = int(np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 1))
        if s == grid[j] or len(grid) == 1:
            return rows[j].copy()
        j = min(j, len(grid) - 2)
        w = (s - grid[j]) / (grid[j + 1] - grid[j])
        return (1.0 - w) * rows[j] + w * rows[j + 1]


class ForestModel(ModelSpec):
    """Adult-density dynamics with smoothed, maturation-lagged births.

    The rhs at a point discounts the delayed birth field by juvenile
    survival through the maturation lag and by the crowding ratio, then
    subtracts adult mortality.  The crowding ratio applies the survival map
    pointwise, matching the scalar arguments it receives here.
    """

    def __init__(self, params, n, survival=None):
        self.forest = params
        self.op = ResolventOperator(params.smoothing, n)
        self.cache = BirthCache(self.op, params.birth_rate)
        survival = survival or default_survival()
        super().__init__(
            "forest", self._rhs, survival,
            params={
                "mu_juvenile": params.mu_juvenile,
                "mu_adult": params.mu_adult,
                "birth_rate": params.birth_rate,
                "smoothing": params.smoothing,
            },
            lipschitz_modulus=None,
            origin_norm=0.0,
        )

    def _rhs(self, fields, lags, delayed):
        p = self.forest
        births = self.cache.value_diag(delayed.times)
        f_now = self.survival.apply(fields)
        f_then = self.survival.apply(delayed.diag())
        return np.exp(-p.mu_juvenile * lags) * (f_now / f_then) * births - p.mu_adult * fields

    def start_run(self, history, dt):
        self.cache.start(history, dt)

    def window_update(self, wtimes, wvalues):
        self.cache.window_set(wtimes, wvalues)

    def commit_nodes(self, ts, fields):
        self.cache.commit(ts, fields)


def forest_model(params, n, survival=None):
    return ForestModel(params, n, survival=survival)


# -- juvenile diagnostics --------------------------------------------------------

@dataclass
class JuvenileDiagnostics:
    """Standing juvenile count and (optionally) the budget-identity residual."""

    juveniles: np.ndarray
    balance: np.ndarray | None = None


def juvenile_integral(state, params, op, dt=None):
    """Juveniles alive at the state's time: births over the maturation
    window, discounted by juvenile mortality, integrated with the shared
    linear-interpolant rule (exact partial end cell)."""
    history, t, lags = state.history, state.t, state.tau
    if dt is None:
        spacings = np.diff(history.times)
        dt = float(np.median(spacings)) if len(spacings) else float(np.max(lags)) / 64
        dt = max(dt, 1e-12)
    depth = max(float(np.max(lags)), dt)
    ts = history.sample_times(t - depth - dt, t, dt)
    rows = op.apply(params.birth_rate * history.sample(ts))
    weighted = np.exp(-params.mu_juvenile * (t - ts))[:, None] * rows
    table = CumulativeTable(ts, weighted)
    juveniles = table.cum_at(float(t)) - table.cum_at(t - lags)
    return JuvenileDiagnostics(juveniles=juveniles)


def juvenile_series(history, times, lags, params, op, dt):
    """Juvenile fields at every trajectory node, for diagnostics and output.

    Uses the factorization ``exp(-mu (t-s)) = exp(-mu t) exp(mu s)`` to share
    one cumulative table across all nodes.
    """
    times = np.asarray(times, dtype=float)
    lags = np.asarray(lags, dtype=float)
    span = params.mu_juvenile * (times[-1] - min(0.0, float((times - lags.max()).min())))
    if span > 500.0:  # the shared-table weights would overflow; do it per node
        out = []
        for t_i, lag_i in zip(times, lags):
            state = _BareState(history, t_i, lag_i)
            out.append(juvenile_integral(state, params, op, dt=dt).juveniles)
        return np.array(out)
    lo = float(np.min(times - np.max(lags, axis=1))) - dt
    grid = history.sample_times(lo, float(times[-1]), dt)
    rows = op.apply(params.birth_rate * history.sample(grid))
    wrows = np.exp(params.mu_juvenile * grid)[:, None] * rows
    table = CumulativeTable(grid, wrows)
    out = np.empty((len(times), history.n))
    for i, t_i in enumerate(times):
        top = table.cum_at(float(t_i))
        out[i] = np.exp(-params.mu_juvenile * t_i) * (top - table.cum_at(t_i - lags[i]))
    return out


class _BareState:
    def __init__(self, history, t, tau):
        self.history, self.t, self.tau = history, t, tau


def balance_residual_series(traj, params, op, dt=None):
    """Budget-identity residual between every consecutive node pair.

    Central in time: the difference quotient of adults + juveniles minus the
    average of ``beta * resolvent[A] - mu_A A - mu_J J`` at the two nodes.
    Returns ``(midpoint times, residual fields)``.
    """
    dt = dt or float(np.median(np.diff(traj.times)))
    J = juvenile_series(traj.history, traj.times, traj.lags, params, op, dt)
    A = traj.fields
    rhs = params.birth_rate * op.apply(A) - params.mu_adult * A - params.mu_juvenile * J
    widths = np.diff(traj.times)[:, None]
    lhs = np.diff(A + J, axis=0) / widths
    resid = lhs - 0.5 * (rhs[:-1] + rhs[1:])
    mids = 0.5 * (traj.times[:-1] + traj.times[1:])
    return mids, resid


def balance_residual(traj, params, op, index, dt=None):
    """Budget-identity residual field between nodes ``index`` and ``index+1``."""
    mids, resid = balance_residual_series(traj, params, op, dt=dt)
    return resid[index]


# -- global-existence comparison bound --------------------------------------------

def comparison_bound_margin(traj, params, op, times=None, dt=None):
    """Largest relative excess of the adult field over the linear upper bound.

    The bound propagates adults + juveniles at time zero by the matrix
    exponential of ``beta * R - min(mu_A, mu_J) * I`` with ``R`` the dense
    resolvent (scaling-and-squaring exponential).  Nonpositive margin means
    the bound holds everywhere sampled.
    """
    R = op.dense_matrix()
    mu = min(params.mu_adult, params.mu_juvenile)
    gen = params.birth_rate * R - mu * np.eye(op.n)
    dt = dt or float(np.median(np.diff(traj.times)))
    J = juvenile_series(traj.history, traj.times, traj.lags, params, op, dt)
    u0 = traj.fields[0] + J[0]
    if times is None:
        step = max(1, len(traj.times) // 64)
        idx = np.arange(0, len(traj.times), step)
    else:
        idx = [int(np.argmin(np.abs(traj.times - t))) for t in times]
    worst = -np.inf
    for i in idx:
        bound = expm(gen * traj.times[i]) @ u0
        worst = max(worst, float(np.max((traj.fields[i] - bound) / (1.0 + np.abs(bound)))))
    return worst


def comparison_bound_check(traj, params, op, times=None, tol=1e-8):
    """True iff the matrix-exponential upper bound holds at all sampled times."""
    return comparison_bound_margin(traj, params, op, times=times) <= tol


# -- registry ---------------------------------------------------------------------

def _build_survival(spec):
    if spec is None:
        return None
    kind = spec.get("kind", "default")
    if kind == "default":
        return default_survival()
    if kind == "constant":
        return constant_survival(float(spec.get("value", 1.0)))
    raise ConfigError(f"unknown survival kind: {kind!r}")


def build_model(model_id, params, n):
    """Construct a registered model from configuration values."""
    params = dict(params or {})
    survival = _build_survival(params.pop("survival", None))
    if model_id == "zero":
        return zero_model(survival=survival)
    if model_id == "constant":
        return constant_model(value=float(params.pop("value", 1.0)), survival=survival)
    if model_id == "decay":
        return decay_model(rate=float(params.pop("rate", 1.0)), survival=survival)
    if model_id == "delayed_growth":
        return delayed_growth_model(rate=float(params.pop("rate", 1.0)), survival=survival)
    if model_id == "riccati":
        return riccati_model(survival=survival)
    if model_id == "forest":
        fp = ForestParams(
            mu_juvenile=float(params.pop("mu_juvenile", 0.2)),
            mu_adult=float(params.pop("mu_adult", 0.1)),
            birth_rate=float(params.pop("birth_rate", 1.0)),
            smoothing=float(params.pop("smoothing", 1e-2)),
        )
        return forest_model(fp, n, survival=survival)
    raise ConfigError(f"unknown model id: {model_id!r}")
