"""Unbounded solution histories and their weighted norms.

A history stores the solution on ``(-infty, current_time]`` as two eras:
an analytic initial segment (a callable, evaluable at any ``t <= 0``) joined
to a computed segment sampled on a strictly increasing time grid, interpolated
piecewise-linearly in time.  Linear interpolation is deliberate: solutions of
the threshold-delay system are merely Lipschitz at the join ``t = 0`` and
higher-order interpolants overshoot across that kink.

The weighted norms reported here are suprema over *sampled* times on a
truncated window ``[-T_w, 0]``.  The neglected tail of the exact supremum is
bounded by ``exp(-alpha*T_w) * sup|phi|``, so the window default ``10/alpha``
(for ``alpha > 0``) keeps the truncation below ``5e-5`` relative.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import HistoryOverrunError

__all__ = [
    "HistoryFunction",
    "RebasedHistory",
    "TimeProfile",
    "make_time_profile",
    "make_space_profile",
    "history_from_profiles",
    "grid_positions",
    "sup_norm_samples",
    "lip_seminorm_samples",
    "weighted_sup_norm",
    "weighted_lip_seminorm",
]


def grid_positions(n):
    """Uniform periodic partition of [0, 1] into ``n`` points (right end open)."""
    return np.arange(n) / n


def _sample_eras(ts, times, values, m, phi, phi_terms, n):
    """Vectorized era-split sampling shared by the history classes."""
    out = np.empty((len(ts), n))
    neg = ts < 0.0
    if neg.any():
        if phi_terms is not None:
            acc = np.zeros((int(neg.sum()), n))
            for u_m, a_m in phi_terms:
                acc += np.asarray(u_m(ts[neg]), dtype=float)[:, None] * a_m[None, :]
            out[neg] = acc
        else:
            out[neg] = [np.asarray(phi(float(t)), dtype=float) for t in ts[neg]]
    pos = ~neg
    if pos.any():
        tp = ts[pos]
        if m == 1:
            out[pos] = values[0]
        else:
            j = (np.searchsorted(times, tp, side="right") - 1).clip(0, m - 2)
            w = ((tp - times[j]) / (times[j + 1] - times[j]))[:, None]
            out[pos] = (1.0 - w) * values[j] + w * values[j + 1]
    return out


class HistoryFunction:
    """The solution on ``(-infty, current_time]`` for one trajectory.

    Parameters
    ----------
    phi : callable
        Analytic initial data; ``phi(t)`` returns the field (shape ``(n,)``)
        for any ``t <= 0``.
    n : int
        Number of grid points.
    phi_terms : list of (callable, ndarray), optional
        Separable decomposition ``phi(t) = sum_m u_m(t) * a_m`` with each
        ``u_m`` vectorized over time arrays.  Enables exact algebraic fast
        paths in linear operators applied to the initial era (they are never
        required for correctness).

    Notes
    -----
    The computed segment is append-only: appending a node never changes the
    value returned at any earlier time.  Instances may be shared between
    threads once constructed; all mutation goes through the single owning
    solver.
    """

    def __init__(self, phi, n, phi_terms=None, phi_history=None, validate=True):
        self.n = int(n)
        self.phi = phi
        self.phi_terms = phi_terms
        # when the initial era is itself a (rebased) history, keeping the
        # reference lets linear operators reuse its sampled structure exactly
        self.phi_history = phi_history
        v0 = np.asarray(phi(0.0), dtype=float)
        if v0.shape != (self.n,):
            raise ValueError(f"phi(0) has shape {v0.shape}, expected ({self.n},)")
        if validate and not np.all(np.isfinite(v0)):
            raise ValueError("phi(0) contains non-finite values")
        self._cap = 64
        self._times = np.zeros(self._cap)
        self._values = np.zeros((self._cap, self.n))
        self._values[0] = v0
        self._m = 1

    # -- read access -------------------------------------------------------

    @property
    def times(self):
        """Computed node times (read-only view, first node at 0)."""
        return self._times[: self._m]

    @property
    def values(self):
        """Computed node fields, one row per node (read-only view)."""
        return self._values[: self._m]

    @property
    def current_time(self):
        return self._times[self._m - 1]

    @property
    def deepest_node(self):
        """Time of the earliest sampled node (0 unless this is a view)."""
        return 0.0

    def evaluate(self, t, x=None):
        """Value at time ``t <= current_time``; the full field or one entry.

        Exact at nodes; piecewise-linear between nodes; delegates to the
        analytic initial data for ``t < 0``.
        """
        if t > self.current_time:
            raise HistoryOverrunError(
                f"history evaluated at t={t!r} beyond current_time="
                f"{self.current_time!r} (solver bug)"
            )
        if t < 0.0:
            out = np.asarray(self.phi(t), dtype=float)
        else:
            times = self.times
            j = int(np.searchsorted(times, t, side="right")) - 1
            if j >= self._m - 1 or t == times[j]:
                out = self._values[min(j, self._m - 1)].copy()
            else:
                t0, t1 = times[j], times[j + 1]
                w = (t - t0) / (t1 - t0)
                out = (1.0 - w) * self._values[j] + w * self._values[j + 1]
        return out if x is None else float(out[x])

    def sample(self, ts):
        """Fields at each time in ``ts`` as a ``(len(ts), n)`` matrix."""
        ts = np.asarray(ts, dtype=float).ravel()
        if np.any(ts > self.current_time + 1e-12):
            raise HistoryOverrunError("sample times beyond current_time")
        return _sample_eras(ts, self.times, self._values, self._m, self.phi,
                            self.phi_terms, self.n)

    def evaluate_diag(self, ts):
        """Entry ``i`` of the field at time ``ts[i]``: ``A(ts[i], x_i)``.

        The vectorized primitive behind the per-point shifted field; each
        grid point reads the history at its own time.
        """
        ts = np.asarray(ts, dtype=float)
        out = np.empty(len(ts))
        cols = np.arange(len(ts))
        neg = ts < 0.0
        if neg.any():
            if self.phi_terms is not None:
                acc = np.zeros(int(neg.sum()))
                for u_m, a_m in self.phi_terms:
                    acc += np.asarray(u_m(ts[neg]), dtype=float) * a_m[neg]
                out[neg] = acc
            else:
                for i in np.where(neg)[0]:
                    out[i] = np.asarray(self.phi(ts[i]), dtype=float)[i]
        pos = ~neg
        if pos.any():
            times = self.times
            tp = ts[pos]
            if np.any(tp > self.current_time + 1e-12):
                raise HistoryOverrunError("diagonal evaluation beyond current_time")
            cp = cols[pos]
            if self._m == 1:
                out[pos] = self._values[0, cp]
            else:
                j = np.clip(np.searchsorted(times, tp, side="right") - 1, 0, self._m - 2)
                t0 = times[j]
                w = (tp - t0) / (times[j + 1] - t0)
                out[pos] = (1.0 - w) * self._values[j, cp] + w * self._values[j + 1, cp]
        return out

    def sample_times(self, lo, hi, dt):
        """Canonical sample grid on ``[lo, hi]``: own nodes plus a uniform
        extension of spacing ``dt`` below the deepest node, ends exact."""
        if hi < lo:
            raise ValueError("empty sample window")
        times = self.times
        deepest = times[0]
        pieces = [np.array([lo])]
        if lo < deepest:
            k_hi = math.ceil((deepest - lo) / dt - 1e-12)
            ext = deepest - dt * np.arange(k_hi, 0, -1)
            pieces.append(ext[(ext > lo) & (ext < hi)])
        inner = times[(times > lo) & (times <= hi)]
        pieces.append(inner)
        if len(inner) == 0 or inner[-1] < hi:
            pieces.append(np.array([hi]))
        grid = np.concatenate(pieces)
        keep = np.ones(len(grid), dtype=bool)
        keep[1:] = np.diff(grid) > 1e-15 * max(1.0, abs(lo), abs(hi))
        return grid[keep]

    # -- mutation ----------------------------------------------------------

    def append(self, t, field):
        """Append one node; ``t`` must exceed the current time strictly."""
        if t <= self.current_time:
            raise ValueError(f"append time {t} not after current_time {self.current_time}")
        field = np.asarray(field, dtype=float)
        if field.shape != (self.n,):
            raise ValueError(f"field shape {field.shape}, expected ({self.n},)")
        if self._m == self._cap:
            self._cap *= 2
            new_t = np.zeros(self._cap)
            new_v = np.zeros((self._cap, self.n))
            new_t[: self._m] = self._times[: self._m]
            new_v[: self._m] = self._values[: self._m]
            # old buffers stay alive through any rebased views holding them
            self._times, self._values = new_t, new_v
        self._times[self._m] = t
        self._values[self._m] = field
        self._m += 1

    def append_block(self, ts, fields):
        for t, row in zip(ts, fields):
            self.append(float(t), row)

    # -- rebasing ----------------------------------------------------------

    def rebase(self, s):
        """History of the state observed at time ``s``: shifts the clock so
        the returned object evaluates ``theta -> self(s + theta)`` and reports
        ``current_time == 0``."""
        if s < 0.0 or s > self.current_time + 1e-12:
            raise ValueError(f"rebase time {s} outside [0, {self.current_time}]")
        if s == 0.0 and self.current_time == 0.0:
            return self
        return RebasedHistory(self, s)


class RebasedHistory:
    """Read-only shifted view of a parent history (see ``HistoryFunction.rebase``).

    Snapshots the parent's node count at creation, so later appends to the
    parent never leak into the view.
    """

    def __init__(self, parent, offset):
        base = parent
        total = offset
        while isinstance(base, RebasedHistory):
            total += base._offset
            base = base._parent
        if total > base.current_time + 1e-12:
            raise ValueError("rebase offset beyond parent history")
        self._parent = base
        self._offset = total
        # snapshot the buffer references and length: parent appends either
        # reallocate (old buffer stays ours) or write past the snapshot length
        self._snap_times = base._times
        self._snap_values = base._values
        self._snap_m = base._m
        self.n = base.n
        # visible node times in the shifted clock (all <= 0)
        vis = self._snap_times[: self._snap_m] - total
        self._times_view = vis[vis <= 1e-15]
        self.phi_terms = None

    @property
    def current_time(self):
        return 0.0

    @property
    def times(self):
        return self._times_view

    @property
    def values(self):
        return self._snap_values[: len(self._times_view)]

    @property
    def deepest_node(self):
        return -self._offset

    def phi(self, theta):
        # analytic era of the shifted clock reaches the parent's initial data
        return self._parent_eval(theta)

    def _parent_eval(self, theta):
        t = self._offset + theta
        if t < 0.0:
            return np.asarray(self._parent.phi(t), dtype=float)
        times = self._snap_times[: self._snap_m]
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = max(j, 0)
        if j >= self._snap_m - 1 or t == times[j]:
            return self._snap_values[min(j, self._snap_m - 1)].copy()
        t0, t1 = times[j], times[j + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self._snap_values[j] + w * self._snap_values[j + 1]

    def evaluate(self, theta, x=None):
        if theta > 1e-12:
            raise HistoryOverrunError(
                f"rebased history evaluated at theta={theta!r} > 0"
            )
        out = self._parent_eval(min(theta, 0.0))
        return out if x is None else float(out[x])

    def sample(self, ts):
        ts = np.asarray(ts, dtype=float).ravel()
        if np.any(ts > 1e-12):
            raise HistoryOverrunError("sample times beyond a rebased history's top")
        p = self._parent
        return _sample_eras(self._offset + ts, self._snap_times[: self._snap_m],
                            self._snap_values, self._snap_m, p.phi, p.phi_terms,
                            self.n)

    def evaluate_diag(self, thetas):
        thetas = np.asarray(thetas, dtype=float)
        ts = self._offset + thetas
        out = np.empty(len(ts))
        cols = np.arange(len(ts))
        neg = ts < 0.0
        if neg.any():
            terms = self._parent.phi_terms
            if terms is not None:
                acc = np.zeros(int(neg.sum()))
                for u_m, a_m in terms:
                    acc += np.asarray(u_m(ts[neg]), dtype=float) * a_m[neg]
                out[neg] = acc
            else:
                for i in np.where(neg)[0]:
                    out[i] = np.asarray(self._parent.phi(ts[i]), dtype=float)[i]
        pos = ~neg
        if pos.any():
            times = self._snap_times[: self._snap_m]
            tp = ts[pos]
            cp = cols[pos]
            if self._snap_m == 1:
                out[pos] = self._snap_values[0, cp]
            else:
                j = np.clip(
                    np.searchsorted(times, tp, side="right") - 1, 0, self._snap_m - 2
                )
                t0 = times[j]
                w = (tp - t0) / (times[j + 1] - t0)
                out[pos] = (1.0 - w) * self._snap_values[j, cp] + w * self._snap_values[
                    j + 1, cp
                ]
        return out

    sample_times = HistoryFunction.sample_times

    def rebase(self, s):
        if s < -1e-12:
            raise ValueError("rebase shift must be nonnegative")
        if s == 0.0:
            return self
        # composition of shifts: rebasing a view walks back to the parent
        return RebasedHistory(self._parent, self._offset + s)


# -- preset initial data ----------------------------------------------------

class TimeProfile:
    """Scalar time profile from the preset library; vectorized over arrays."""

    def __init__(self, kind, fn, params):
        self.kind = kind
        self._fn = fn
        self.params = dict(params)

    def __call__(self, t):
        return self._fn(np.asarray(t, dtype=float))

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"TimeProfile({self.kind}, {inner})"


def make_time_profile(kind, **params):
    """Preset time profiles: constant, linear, exponential, sinusoid."""
    if kind == "constant":
        c = float(params.get("value", 0.0))
        return TimeProfile(kind, lambda t: np.full_like(t, c, dtype=float), params)
    if kind == "linear":
        c = float(params.get("value", 0.0))
        slope = float(params.get("slope", 1.0))
        return TimeProfile(kind, lambda t: c + slope * t, params)
    if kind == "exponential":
        c = float(params.get("value", 1.0))
        rate = float(params.get("rate", 1.0))
        return TimeProfile(kind, lambda t: c * np.exp(rate * t), params)
    if kind == "sinusoid":
        c = float(params.get("value", 0.0))
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        phase = float(params.get("phase", 0.0))
        return TimeProfile(
            kind, lambda t: c + amp * np.sin(2.0 * np.pi * freq * t + phase), params
        )
    raise ValueError(f"unknown time profile kind: {kind!r}")


def make_space_profile(kind, n, **params):
    """Preset spatial profiles evaluated on the uniform grid of ``n`` points."""
    x = grid_positions(n)
    profile = make_time_profile(kind, **params)
    return np.asarray(profile(x), dtype=float)


def history_from_profiles(time_profile, space_field):
    """History with separable initial data ``phi(t, x) = u(t) * a(x)``."""
    a = np.asarray(space_field, dtype=float)
    u = time_profile
    return HistoryFunction(
        phi=lambda t: u(t) * a,
        n=len(a),
        phi_terms=[(u, a)],
    )


# -- sampled norms -----------------------------------------------------------

def sup_norm_samples(values):
    """Max absolute entry of a stack of sampled fields."""
    values = np.asarray(values)
    return float(np.max(np.abs(values))) if values.size else 0.0


def lip_seminorm_samples(times, values):
    """Largest difference quotient over adjacent sample pairs.

    Equals the exact Lipschitz seminorm when the data is piecewise linear
    with kinks only at sample times.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 2:
        return 0.0
    dts = np.diff(times)
    diffs = np.max(np.abs(np.diff(values, axis=0)), axis=1)
    return float(np.max(diffs / dts))


def _norm_samples(history, alpha, window, dt):
    if abs(history.current_time) > 1e-12:
        raise ValueError("weighted norms require a rebased history (current_time == 0)")
    if window <= 0.0:
        raise ValueError("truncation window must be positive")
    if dt is None:
        node_dts = np.diff(history.times)
        dt = float(np.median(node_dts)) if len(node_dts) else window / 1024.0
    ts = history.sample_times(-window, 0.0, dt)
    vals = history.sample(ts)
    weighted = np.exp(-alpha * np.abs(ts))[:, None] * vals
    return ts, weighted


def weighted_sup_norm(history, alpha, window, dt=None):
    """Sup over sampled ``t in [-window, 0]`` of ``exp(-alpha|t|) |phi(t, x)|``.

    The neglected tail over ``(-infty, -window)`` is bounded by
    ``exp(-alpha * window) * sup |phi|``.
    """
    _, weighted = _norm_samples(history, alpha, window, dt)
    return sup_norm_samples(weighted)


def weighted_lip_seminorm(history, alpha, window, dt=None):
    """Largest adjacent-pair difference quotient of the weighted history."""
    ts, weighted = _norm_samples(history, alpha, window, dt)
    return lip_seminorm_samples(ts, weighted)
