"""The state-dependent lag defined by a threshold integral.

Along a trajectory the lag ``tau(t, x)`` is the unique number for which the
survival mass accumulated over ``[t - tau, t]`` equals a per-point threshold
fixed by the initial data:

    integral of f(A(s, .))(x) over [t - tau(t, x), t]  ==  threshold(x).

The integrand is strictly positive, so the mass is strictly increasing in
``tau`` and the root is unique, bracketed in ``[0, t + tau0(x)]``.

Quadrature model
----------------
All masses are computed from one shared rule: the integrand is sampled at the
history's node grid (computed nodes, plus a uniform extension of the solver
substep through the analytic era) and interpolated linearly inside each cell;
partial end cells are integrated exactly under that interpolant.  Using the
identical rule for thresholds and for root solving makes the trajectory
self-consistency identity exact up to the root tolerance, not just up to
quadrature error.  On smooth stretches the rule is composite trapezoid,
second order in the node spacing.
"""

from __future__ import annotations

import numpy as np

from .errors import DelayDomainError, ModelContractError, OrderingError

__all__ = [
    "SurvivalMap",
    "default_survival",
    "constant_survival",
    "CumulativeTable",
    "MassTable",
    "WindowMass",
    "compute_threshold",
    "solve_delay",
    "delay_ode_rhs",
    "delay_bounds",
    "delay_lipschitz_bound",
    "monotone_comparison_holds",
    "survival_mass",
]

_REG_SEED = 12345
_REG_TRIALS = 64


class SurvivalMap:
    """A strictly positive, bounded, monotone non-increasing field map.

    ``fn`` maps a field (shape ``(..., n)``, vectorized when ``vectorized``
    is true) to a field of the same shape with values in ``(0, bound]``;
    larger inputs must never produce larger outputs (pointwise).  These are
    exactly the properties the delay solve relies on, so they are probed by
    a seeded randomized check at registration.
    """

    def __init__(self, fn, bound, lip, vectorized=True, name="survival"):
        if bound <= 0.0:
            raise ValueError("survival bound must be positive")
        self.fn = fn
        self.bound = float(bound)
        self.lip = float(lip)
        self.vectorized = bool(vectorized)
        self.name = name

    @classmethod
    def register(cls, fn, bound, lip, vectorized=True, name="survival", probe_n=16):
        """Construct and run the randomized contract check."""
        m = cls(fn, bound, lip, vectorized=vectorized, name=name)
        m.check_contract(probe_n)
        return m

    def check_contract(self, n=16, trials=_REG_TRIALS, seed=_REG_SEED):
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            lo = rng.uniform(-3.0, 3.0, size=n)
            hi = lo + rng.uniform(0.0, 2.0, size=n)
            flo, fhi = self.apply(lo), self.apply(hi)
            for v, tag in ((flo, "lower"), (fhi, "upper")):
                if not np.all(np.isfinite(v)):
                    raise ModelContractError(f"{self.name}: non-finite output ({tag})")
                if np.any(v <= 0.0) or np.any(v > self.bound * (1 + 1e-12)):
                    raise ModelContractError(
                        f"{self.name}: output outside (0, {self.bound}] ({tag})"
                    )
            if np.any(flo < fhi - 1e-12):
                raise ModelContractError(
                    f"{self.name}: not monotone non-increasing on random ordered pair"
                )

    def apply(self, fields):
        """Evaluate on one field or a stack of fields (last axis is space)."""
        fields = np.asarray(fields, dtype=float)
        if self.vectorized or fields.ndim == 1:
            return np.asarray(self.fn(fields), dtype=float)
        flat = fields.reshape(-1, fields.shape[-1])
        return np.stack([np.asarray(self.fn(row), dtype=float) for row in flat]).reshape(
            fields.shape
        )


def default_survival():
    """``u -> 1 / (1 + max(u, 0))`` pointwise: positive, bounded by 1,
    non-increasing, Lipschitz with modulus 1."""
    return SurvivalMap(
        fn=lambda u: 1.0 / (1.0 + np.maximum(u, 0.0)),
        bound=1.0,
        lip=1.0,
        vectorized=True,
        name="reciprocal-crowding",
    )


def constant_survival(c=1.0):
    """Constant survival rate; the lag then stays at its initial profile."""
    if c <= 0.0:
        raise ValueError("survival constant must be positive")
    return SurvivalMap(
        fn=lambda u: np.full_like(np.asarray(u, dtype=float), c),
        bound=c,
        lip=0.0,
        vectorized=True,
        name=f"constant({c})",
    )


# -- cumulative survival mass -------------------------------------------------

def _check_frows(fvals, name):
    if not np.all(np.isfinite(fvals)):
        raise ModelContractError(f"{name}: non-finite survival values on history")
    if np.any(fvals <= 0.0):
        raise ModelContractError(f"{name}: survival values must stay positive")


def _cells(nodes, fvals):
    """Per-cell masses of the linear-interpolant rule, shape (m-1, n)."""
    widths = np.diff(nodes)[:, None]
    return 0.5 * widths * (fvals[:-1] + fvals[1:])


class CumulativeTable:
    """Cumulative integral of sampled integrand rows on a shared node grid.

    ``C(theta)`` is the integral of the linearly interpolated rows from the
    lowest node up to ``theta``; queries are differences of ``C``, so the
    arbitrary lower reference cancels.
    """

    def __init__(self, nodes, rows):
        self._set(np.asarray(nodes, dtype=float), np.asarray(rows, dtype=float))

    def _set(self, nodes, rows):
        self.nodes = nodes
        self.fvals = rows
        self.cum = np.zeros_like(rows)
        np.cumsum(_cells(nodes, rows), axis=0, out=self.cum[1:])
        self.n = rows.shape[1]

    def _locate(self, thetas):
        j = np.searchsorted(self.nodes, thetas, side="right") - 1
        return j.clip(0, len(self.nodes) - 2)

    def cum_cols(self, th, cols):
        """``C`` at times ``th[i]``, column ``cols[i]`` (arrays only, hot path)."""
        j = self._locate(th)
        left = self.nodes[j]
        width = self.nodes[j + 1] - left
        u = (th - left) / width
        fj = self.fvals[j, cols]
        fj1 = self.fvals[j + 1, cols]
        fhat = fj + (fj1 - fj) * u
        return self.cum[j, cols] + width * u * 0.5 * (fj + fhat)

    def f_cols(self, th, cols):
        """Interpolated integrand value per (time, column) pair (solve slope)."""
        j = self._locate(th)
        left = self.nodes[j]
        u = (th - left) / (self.nodes[j + 1] - left)
        fj = self.fvals[j, cols]
        return fj + (self.fvals[j + 1, cols] - fj) * u

    def cum_at(self, thetas, cols=None):
        """``C`` at per-point times ``thetas`` (scalar or shape (k,)).

        With ``cols`` given, entry ``i`` reads grid column ``cols[i]``;
        a scalar ``thetas`` with ``cols=None`` returns the full row.
        """
        if np.isscalar(thetas) and cols is None:
            j = int(self._locate(np.array([float(thetas)]))[0])
            left = self.nodes[j]
            u = (float(thetas) - left) / (self.nodes[j + 1] - left)
            fj, fj1 = self.fvals[j], self.fvals[j + 1]
            fhat = fj + (fj1 - fj) * u
            return self.cum[j] + (self.nodes[j + 1] - left) * u * 0.5 * (fj + fhat)
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        if cols is None:
            cols = np.arange(self.n)
        return self.cum_cols(th, np.asarray(cols))

    def f_at(self, thetas, cols=None):
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        if cols is None:
            cols = np.arange(self.n)
        return self.f_cols(th, np.asarray(cols))


class MassTable(CumulativeTable):
    """Cumulative survival mass along one history's sample grid.

    Extending the table downward (doubling into the analytic era) or
    appending committed nodes preserves every previously returned mass
    difference bit-for-bit.  Appends amortize through capacity-doubling
    buffers; the public ``nodes``/``fvals``/``cum`` arrays are views.
    """

    def __init__(self, history, survival, dt, lo, hi):
        self.history = history
        self.survival = survival
        self.dt = float(dt)
        nodes = history.sample_times(lo, hi, self.dt)
        rows = survival.apply(history.sample(nodes))
        _check_frows(rows, survival.name)
        self._install(nodes, rows)

    def _install(self, nodes, rows):
        self._m = len(nodes)
        self._cap = max(2 * self._m, 256)
        width = rows.shape[1]
        self._nodes_buf = np.empty(self._cap)
        self._fvals_buf = np.empty((self._cap, width))
        self._cum_buf = np.empty((self._cap, width))
        self._nodes_buf[: self._m] = nodes
        self._fvals_buf[: self._m] = rows
        self._cum_buf[0] = 0.0
        np.cumsum(_cells(nodes, rows), axis=0, out=self._cum_buf[1 : self._m])
        self._refresh_views()

    def _refresh_views(self):
        self.nodes = self._nodes_buf[: self._m]
        self.fvals = self._fvals_buf[: self._m]
        self.cum = self._cum_buf[: self._m]
        self.n = self._fvals_buf.shape[1]

    def ensure_low(self, lo):
        """Extend the grid downward so queries at ``theta >= lo`` resolve.

        Prepended cells carry negative cumulative values, so every entry the
        table already held (and hence every previously returned mass
        difference) stays bit-identical.
        """
        if lo >= self.nodes[0]:
            return
        ext = self.history.sample_times(lo, self.nodes[0], self.dt)[:-1]
        if len(ext) == 0:
            return
        fext = self.survival.apply(self.history.sample(ext))
        _check_frows(fext, self.survival.name)
        joined = np.concatenate([ext, self.nodes[:1]])
        jf = np.concatenate([fext, self.fvals[:1]])
        masses = _cells(joined, jf)
        cum_ext = self.cum[0] - np.cumsum(masses[::-1], axis=0)[::-1]
        p = len(ext)
        nodes = np.concatenate([ext, self.nodes])
        self._m = len(nodes)
        self._cap = max(2 * self._m, self._cap)
        width = self._fvals_buf.shape[1]
        nodes_buf = np.empty(self._cap)
        fvals_buf = np.empty((self._cap, width))
        cum_buf = np.empty((self._cap, width))
        nodes_buf[: self._m] = nodes
        fvals_buf[:p] = fext
        fvals_buf[p : self._m] = self.fvals
        cum_buf[:p] = cum_ext
        cum_buf[p : self._m] = self.cum
        self._nodes_buf, self._fvals_buf, self._cum_buf = nodes_buf, fvals_buf, cum_buf
        self._refresh_views()

    def append(self, ts, fields):
        """Append committed nodes (strictly increasing times) and their fields."""
        ts = np.asarray(ts, dtype=float)
        fnew = self.survival.apply(np.asarray(fields, dtype=float))
        if fnew.ndim == 1:
            fnew = fnew[None, :]
        _check_frows(fnew, self.survival.name)
        k = len(ts)
        if self._m + k > self._cap:
            self._cap = max(2 * self._cap, self._m + k)
            for name in ("_nodes_buf", "_fvals_buf", "_cum_buf"):
                old = getattr(self, name)
                shape = (self._cap,) + old.shape[1:]
                new = np.empty(shape)
                new[: self._m] = old[: self._m]
                setattr(self, name, new)
        m = self._m
        joined_nodes = np.concatenate([self._nodes_buf[m - 1 : m], ts])
        joined_f = np.concatenate([self._fvals_buf[m - 1 : m], fnew])
        masses = _cells(joined_nodes, joined_f)
        self._nodes_buf[m : m + k] = ts
        self._fvals_buf[m : m + k] = fnew
        self._cum_buf[m : m + k] = self._cum_buf[m - 1] + np.cumsum(masses, axis=0)
        self._m += k
        self._refresh_views()


class WindowMass:
    """A committed mass table extended by in-progress window samples.

    Used inside fixed-point iterations: the committed part never changes,
    while the window overlay is replaced on every iterate.
    """

    def __init__(self, base, wtimes, wfvals):
        self.base = base
        self.wtimes = np.asarray(wtimes, dtype=float)
        self.wfvals = np.asarray(wfvals, dtype=float)
        _check_frows(self.wfvals, base.survival.name)
        self.t0 = self.wtimes[0]
        base_c0 = base.cum_at(float(self.t0))
        self.wcum = np.concatenate(
            [base_c0[None, :], base_c0 + np.cumsum(_cells(self.wtimes, self.wfvals), axis=0)]
        )
        self.n = base.n

    def _window_cum(self, ta, ca):
        j = (np.searchsorted(self.wtimes, ta, side="right") - 1).clip(
            0, len(self.wtimes) - 2
        )
        left = self.wtimes[j]
        width = self.wtimes[j + 1] - left
        u = (ta - left) / width
        fj = self.wfvals[j, ca]
        fhat = fj + (self.wfvals[j + 1, ca] - fj) * u
        return self.wcum[j, ca] + width * u * 0.5 * (fj + fhat)

    def cum_cols(self, th, cols):
        below = th <= self.t0
        if below.all():
            return self.base.cum_cols(th, cols)
        if not below.any():
            return self._window_cum(th, cols)
        out = np.empty(len(th))
        out[below] = self.base.cum_cols(th[below], cols[below])
        above = ~below
        out[above] = self._window_cum(th[above], cols[above])
        return out

    def f_cols(self, th, cols):
        below = th <= self.t0
        if below.all():
            return self.base.f_cols(th, cols)
        out = np.empty(len(th))
        if below.any():
            out[below] = self.base.f_cols(th[below], cols[below])
        above = ~below
        ta = th[above]
        ca = cols[above]
        j = (np.searchsorted(self.wtimes, ta, side="right") - 1).clip(
            0, len(self.wtimes) - 2
        )
        left = self.wtimes[j]
        u = (ta - left) / (self.wtimes[j + 1] - left)
        fj = self.wfvals[j, ca]
        out[above] = fj + (self.wfvals[j + 1, ca] - fj) * u
        return out

    def cum_at(self, thetas, cols=None):
        if np.isscalar(thetas):
            thetas = np.full(self.n, float(thetas))
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        if cols is None:
            cols = np.arange(self.n)
        return self.cum_cols(th, np.asarray(cols))

    def cum_node(self, j):
        """Exact cumulative row at window node ``j``."""
        return self.wcum[j]

    def f_at(self, thetas, cols=None):
        th = np.atleast_1d(np.asarray(thetas, dtype=float))
        if cols is None:
            cols = np.arange(self.n)
        return self.f_cols(th, np.asarray(cols))

    def ensure_low(self, lo):
        self.base.ensure_low(lo)


# -- threshold ---------------------------------------------------------------

def _lattice_floor(depth, dt):
    """Smallest multiple of ``dt`` at or below ``-depth`` (at least one cell)."""
    k = int(np.ceil(depth / dt - 1e-12))
    return -max(k, 1) * dt


def compute_threshold(history, tau0, survival, dt):
    """Per-point survival mass of the initial data over ``[-tau0(x), 0]``.

    This is the quantity conserved along the trajectory; it is computed with
    the same quadrature rule (and the same node lattice) the delay solve
    inverts, so a solve at time zero returns ``tau0`` to root tolerance.
    """
    tau0 = np.asarray(tau0, dtype=float)
    if np.any(tau0 < 0.0):
        bad = int(np.argmin(tau0))
        raise ValueError(f"initial lag must be nonnegative; entry {bad} is {tau0[bad]}")
    table = MassTable(history, survival, dt, lo=_lattice_floor(max(tau0.max(), dt), dt), hi=0.0)
    c0 = table.cum_at(0.0)
    return c0 - table.cum_at(-tau0)


# -- root solve ---------------------------------------------------------------

_BISECT_FRACTION = 1e-3  # bracket width target before switching to secant
_MAX_SECANT = 60
_MAX_TOTAL = 160


def _solve_root(table, t, delta, hi, tol, warm=None, top_cum=None, cols=None):
    """Invert the mass to the threshold per (time, grid point) entry.

    Fully vectorized over entries; ``t`` may be one time or one per entry.
    ``delta`` must be strictly positive and the mass over each bracket
    ``[0, hi]`` must reach it (callers guarantee both).  Stops when
    ``|mass(t - tau, t) - delta| <= tol * delta`` per entry.

    A warm start runs a damped Newton polish from the previous root (the
    slope of the mass in the lag is the interpolated integrand value);
    entries it does not settle fall back to the bracketed solve: bisection
    to a fraction of the bracket, then secant steps that revert to
    bisection whenever they leave the bracket.
    """
    delta = np.asarray(delta, dtype=float)
    m = len(delta)
    if cols is None:
        cols = np.arange(m)
    t_vec = np.full(m, float(t)) if np.isscalar(t) else np.asarray(t, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ct = np.asarray(top_cum) if top_cum is not None else table.cum_cols(t_vec, cols)
    ref = tol * delta

    tau = np.zeros(m)
    todo = np.ones(m, dtype=bool)

    if warm is not None:
        w = np.asarray(warm, dtype=float).clip(0.0, hi)
        g = ct - table.cum_cols(t_vec - w, cols) - delta
        live = np.abs(g) > ref
        for _ in range(8):
            if not live.any():
                break
            if live.sum() * 2 < m:
                idx = np.where(live)[0]
                slope = table.f_cols(t_vec[idx] - w[idx], cols[idx])
                w[idx] = (w[idx] - g[idx] / slope).clip(0.0, hi[idx])
                g[idx] = ct[idx] - table.cum_cols(t_vec[idx] - w[idx], cols[idx]) - delta[idx]
                live[idx] = np.abs(g[idx]) > ref[idx]
            else:
                slope = table.f_cols(t_vec - w, cols)
                w = np.where(live, (w - g / slope).clip(0.0, hi), w)
                g = np.where(live, ct - table.cum_cols(t_vec - w, cols) - delta, g)
                live = np.abs(g) > ref
        tau[~live] = w[~live]
        todo = live
        if not todo.any():
            return tau

    sub = np.where(todo)[0]
    d = delta[sub]
    rf = ref[sub]
    ts = t_vec[sub]
    cs = cols[sub]
    cts = ct[sub]

    def residual(tau_s):
        return cts - table.cum_cols(ts - tau_s, cs) - d

    lo = np.zeros(len(sub))
    up = hi[sub].astype(float).copy()
    glo = -d
    gup = residual(up)
    width_target = _BISECT_FRACTION * (1.0 + up)

    # phase 1: plain bisection to a modest width
    for _ in range(64):
        wide = (up - lo) > width_target
        if not wide.any():
            break
        mid = 0.5 * (lo + up)
        gm = residual(mid)
        neg = gm < 0.0
        lo = np.where(wide & neg, mid, lo)
        glo = np.where(wide & neg, gm, glo)
        up = np.where(wide & ~neg, mid, up)
        gup = np.where(wide & ~neg, gm, gup)

    # phase 2: secant refinement inside the bracket; any step that leaves the
    # bracket or stalls falls back to a bisection step for that entry
    done = np.zeros(len(sub), dtype=bool)
    best = 0.5 * (lo + up)
    for _ in range(_MAX_TOTAL):
        denom = gup - glo
        safe = np.abs(denom) > 1e-300
        cand = np.where(safe, up - gup * (up - lo) / np.where(safe, denom, 1.0), 0.0)
        inside = (cand > lo) & (cand < up)
        cand = np.where(inside, cand, 0.5 * (lo + up))
        gc = residual(cand)
        newly = (~done) & (np.abs(gc) <= rf)
        best = np.where(newly, cand, best)
        done |= newly
        if done.all():
            break
        neg = gc < 0.0
        move = ~done
        lo = np.where(move & neg, cand, lo)
        glo = np.where(move & neg, gc, glo)
        up = np.where(move & ~neg, cand, up)
        gup = np.where(move & ~neg, gc, gup)
        # collapsed bracket: accept the midpoint (the root is pinched)
        pinched = move & ((up - lo) <= 1e-15 * (1.0 + up))
        if pinched.any():
            best = np.where(pinched, 0.5 * (lo + up), best)
            done |= pinched
            if done.all():
                break
    else:
        raise RuntimeError("delay root solve failed to converge (monotone bracket lost)")
    tau[sub] = best
    return tau


def _expand_bracket(table, t, delta, hi0, dt, cap):
    """Grow brackets by doubling until the mass covers the threshold."""
    hi = np.maximum(np.asarray(hi0, dtype=float), dt)
    cols = np.arange(len(delta))
    for _ in range(64):
        table.ensure_low(t - float(hi.max()))
        ct = table.cum_at(float(t))
        short = (ct[cols] - table.cum_at(t - hi, cols=cols)) < delta
        if not short.any():
            return hi, ct
        if float(hi.max()) >= cap:
            x = int(np.argmax(short))
            raise DelayDomainError(
                f"threshold {delta[x]:-.6g} at grid index {x} exceeds the survival "
                f"mass available over a window of length {cap:g}"
            )
        hi = np.where(short, np.minimum(hi * 2.0, cap), hi)
    raise DelayDomainError("bracket expansion failed to terminate")


def solve_delay(history, threshold, survival, t=0.0, tau0=None, dt=None,
                tol=1e-10, window_cap=None):
    """Threshold-defined lag of a rebased history (per grid point).

    Parameters
    ----------
    history : rebased history (``current_time == 0``)
    threshold : per-point target mass; entries ``<= 0`` use the explicit
        branch ``threshold / f(history(0))`` (reachable only through this
        functional interface, never along trajectories).
    t : trajectory time, used only to size the guaranteed bracket
        ``[0, t + tau0(x)]`` when ``tau0`` is given.
    tau0 : initial lag profile, optional.  Without it the bracket grows by
        doubling from one substep up to ``window_cap``.
    dt : substep controlling the sample lattice in the analytic era;
        defaults to the history's median node spacing.

    Returns
    -------
    ndarray with ``|mass(-tau, 0) - threshold| <= tol * threshold`` per point.
    """
    delta = np.asarray(threshold, dtype=float)
    n = len(delta)
    if abs(history.current_time) > 1e-12:
        raise ValueError("solve_delay expects a rebased history (current_time == 0)")
    if dt is None:
        spacings = np.diff(history.times)
        if len(spacings) == 0:
            raise ValueError("dt is required for a history without computed nodes")
        dt = float(np.median(spacings))

    tau = np.zeros(n)
    nonpos = delta <= 0.0
    if nonpos.any():
        f0 = survival.apply(history.evaluate(0.0))
        tau[nonpos] = delta[nonpos] / f0[nonpos]
    pos = ~nonpos
    if not pos.any():
        return tau

    if window_cap is None:
        window_cap = max(1.0, 2.0 * (t + 1.0)) * 1024.0
    hi0 = np.full(n, t) + (np.asarray(tau0, dtype=float) if tau0 is not None else dt)
    table = MassTable(history, survival, dt,
                      lo=_lattice_floor(max(float(hi0.max()) - t, dt), dt), hi=0.0)
    # queries are in the rebased clock: mass over [-tau, 0]
    hi, ct = _expand_bracket(table, 0.0, np.where(pos, delta, 0.0), hi0, dt, window_cap)
    sub = np.where(pos)[0]
    solved = _solve_root(
        _Restricted(table, sub), 0.0, delta[sub], hi[sub], tol, top_cum=ct[sub]
    )
    tau[sub] = solved
    return tau


class _Restricted:
    """Column-restricted view of a mass table (for partial solves)."""

    def __init__(self, table, cols):
        self._t = table
        self._cols = np.asarray(cols)
        self.n = len(self._cols)

    def cum_cols(self, th, cols):
        return self._t.cum_cols(th, self._cols[cols])

    def f_cols(self, th, cols):
        return self._t.f_cols(th, self._cols[cols])

    def cum_at(self, thetas, cols=None):
        c = np.arange(self.n) if cols is None else np.asarray(cols)
        if np.isscalar(thetas):
            thetas = np.full(len(c), float(thetas))
        return self.cum_cols(np.asarray(thetas, dtype=float), c)

    def f_at(self, thetas, cols=None):
        c = np.arange(self.n) if cols is None else np.asarray(cols)
        return self.f_cols(np.atleast_1d(np.asarray(thetas, dtype=float)), c)


# -- the equivalent evolution form --------------------------------------------

def delay_ode_rhs(history, tau, survival, t):
    """Rate of change of the lag: ``1 - f(A(t,.))(x) / f(A(t - tau(x),.))(x)``.

    Values lie in ``(-inf, 1)`` since the survival map is strictly positive.
    The delayed denominator applies the survival map to the full field at
    each point's own shifted time.
    """
    tau = np.asarray(tau, dtype=float)
    num = survival.apply(history.evaluate(t))
    den = np.empty_like(num)
    for i in range(len(tau)):
        den[i] = survival.apply(history.evaluate(t - tau[i]))[i]
    if np.any(num <= 0.0) or np.any(den <= 0.0):
        raise ModelContractError("survival map returned non-positive values")
    return 1.0 - num / den


# -- a priori estimates --------------------------------------------------------

def _initial_sup(history, tau0_sup, dt):
    """Sup of |phi| over the initial window ``[-tau0_sup, 0]`` (sampled)."""
    lo = -max(tau0_sup, dt)
    ts = history.sample_times(lo, 0.0, dt)
    return float(np.max(np.abs(history.sample(ts))))


def delay_bounds(tau0, history, survival, M, dt):
    """Two-sided a priori bounds on the lag while the state stays below ``M``.

    Returns ``(lag_min, lag_max)`` computed from the survival map evaluated
    at constant fields built from the history's initial sup and ``M``.
    """
    tau0 = np.asarray(tau0, dtype=float)
    n = len(tau0)
    phi_max = _initial_sup(history, float(tau0.max()), dt)
    m1 = max(M, phi_max)
    f_phi = survival.apply(np.full(n, phi_max))
    f_neg_phi = survival.apply(np.full(n, -phi_max))
    f_m1 = survival.apply(np.full(n, m1))
    f_neg_m1 = survival.apply(np.full(n, -m1))
    lag_min = float(np.min(tau0 * f_phi) / np.max(f_neg_m1))
    lag_max = float(np.max(tau0 * f_neg_phi) / np.min(f_m1))
    return lag_min, lag_max


def delay_lipschitz_bound(survival, M, history_a, tau0_a, history_b, tau0_b, dt):
    """Constant ``L`` with ``|lag_a - lag_b| <= L * (sup|A - B| + |d_a - d_b|)``.

    Assembled from the two trajectories' lag bounds and the survival map's
    Lipschitz modulus; the literature only asserts existence, so this closed
    form is a reconstruction and is intended for diagnostics.
    """
    _, lag_max_a = delay_bounds(tau0_a, history_a, survival, M, dt)
    _, lag_max_b = delay_bounds(tau0_b, history_b, survival, M, dt)
    lag_max = max(lag_max_a, lag_max_b)
    phi_max = max(
        _initial_sup(history_a, float(np.max(tau0_a)), dt),
        _initial_sup(history_b, float(np.max(tau0_b)), dt),
    )
    m1 = max(M, phi_max)
    n = history_a.n if hasattr(history_a, "n") else len(tau0_a)
    f_m1 = survival.apply(np.full(n, m1))
    return max(lag_max * survival.lip, 1.0) / float(np.min(f_m1))


# -- comparison ----------------------------------------------------------------

def monotone_comparison_holds(history_lo, history_hi, threshold, survival,
                              dt, tol=1e-8):
    """Check that a pointwise-larger history yields a pointwise-larger lag.

    Requires ``history_lo <= history_hi`` on the sampled window (raises
    ``OrderingError`` otherwise); returns True iff the solved lags satisfy
    ``lag_lo <= lag_hi + tol`` everywhere.
    """
    tau_lo = solve_delay(history_lo, threshold, survival, dt=dt)
    tau_hi = solve_delay(history_hi, threshold, survival, dt=dt)
    depth = max(float(tau_lo.max()), float(tau_hi.max()), dt) + dt
    ts = history_lo.sample_times(-depth, 0.0, dt)
    lo_vals = history_lo.sample(ts)
    hi_vals = history_hi.sample(ts)
    if np.any(lo_vals > hi_vals + 1e-12):
        raise OrderingError("histories are not pointwise ordered on the sampled window")
    return bool(np.all(tau_lo <= tau_hi + tol))


# -- small utilities -----------------------------------------------------------

def survival_mass(history, survival, lo, hi, dt):
    """Mass of the survival integrand over per-point windows ``[lo_x, hi]``.

    ``lo`` may be a vector (one window per grid point); ``hi`` is scalar.
    Uses the shared quadrature rule, so values are directly comparable with
    thresholds and solve residuals.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    table = MassTable(history, survival, dt, lo=float(lo.min()), hi=float(hi))
    return table.cum_at(float(hi)) - table.cum_at(lo)
