"""Geodesic integration, lightlike leaf tracing, transport, holonomy.

Leaves are traced in Euclidean-arclength parametrization with an extra
log-speed variable q: writing the affine velocity as V = e^q w with
|w| = 1, the geodesic equation splits into

    w' = -(Gamma(w, w) - (w . Gamma(w, w)) w),   q' = -w . Gamma(w, w),

which never blows up even on incomplete leaves.  Since V is parallel
along the geodesic, e^{q(L) - q(0)} over one period of a closed leaf
is exactly the holonomy factor; leaf_holonomy recomputes it with an
independent parallel-transport solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import minimize_scalar

from .errors import (
    ClosureError,
    DomainError,
    GeodesicIncompleteError,
    TracingError,
)

_SPEED_CAP = 1e8
_LOG_SPEED_CAP = 60.0


@dataclass
class GeodesicState:
    x: float
    y: float
    u: float
    v: float

    @property
    def position(self):
        return np.array([self.x, self.y])

    @property
    def velocity(self):
        return np.array([self.u, self.v])


def _christoffel_at(metric, x, y):
    """Christoffel symbols at a trajectory point.

    Non-periodic coordinates are clamped to the domain box: an adaptive
    step may probe slightly past a boundary before the terminal
    boundary event truncates it, and those probe values are discarded.
    """
    xw, yw = metric.domain.wrap(x, y)
    x0, x1, y0, y1 = metric.domain.bounds
    if not metric.domain.periodic[0]:
        xw = min(max(float(xw), x0), x1)
    if not metric.domain.periodic[1]:
        yw = min(max(float(yw), y0), y1)
    return metric.christoffel(float(xw), float(yw))


def _domain_events(metric):
    """Terminal events for crossing a non-periodic boundary.

    The thresholds sit a hair outside the boundary (well inside the
    evaluation slack of MetricPatch) so that a trajectory lying exactly
    on the boundary does not trip scipy's sign-change detection.
    """
    events = []
    margin = 5e-10
    x0, x1, y0, y1 = metric.domain.bounds
    if not metric.domain.periodic[0]:
        for bound, sign in ((x0 - margin, 1.0), (x1 + margin, -1.0)):
            def ev(t, s, bound=bound, sign=sign):
                return sign * (s[0] - bound)
            ev.terminal = True
            ev.direction = -1
            events.append(ev)
    if not metric.domain.periodic[1]:
        for bound, sign in ((y0 - margin, 1.0), (y1 + margin, -1.0)):
            def ev(t, s, bound=bound, sign=sign):
                return sign * (s[1] - bound)
            ev.terminal = True
            ev.direction = -1
            events.append(ev)
    return events


def exp_map(metric, state, t, rtol=1e-10, atol=1e-12):
    """Follow the geodesic with initial state for affine time t."""
    if t == 0:
        return GeodesicState(state.x, state.y, state.u, state.v)

    def rhs(_, s):
        gam = _christoffel_at(metric, s[0], s[1])
        w = s[2:]
        acc = -np.einsum("kij,i,j->k", gam, w, w)
        return [s[2], s[3], acc[0], acc[1]]

    def blowup(_, s):
        return s[2] ** 2 + s[3] ** 2 - _SPEED_CAP**2
    blowup.terminal = True
    blowup.direction = 1

    events = [blowup] + _domain_events(metric)
    sol = solve_ivp(
        rhs, (0.0, float(t)), [state.x, state.y, state.u, state.v],
        method="RK45", rtol=rtol, atol=atol, events=events, dense_output=False,
    )
    if sol.status == 1:  # a terminal event fired
        times = [ev[0] for ev in sol.t_events if len(ev)]
        t_stop = float(min(times, key=abs))
        if len(sol.t_events[0]):
            raise GeodesicIncompleteError(
                f"velocity blow-up at affine time {t_stop:.6g}", escape_time=t_stop
            )
        raise DomainError(f"geodesic left the non-periodic domain at time {t_stop:.6g}")
    if sol.status != 0:
        raise GeodesicIncompleteError(
            f"integration stalled: {sol.message}", escape_time=float(sol.t[-1])
        )
    x, y, u, v = sol.y[:, -1]
    return GeodesicState(float(x), float(y), float(u), float(v))


@dataclass
class LeafTrace:
    """A traced lightlike leaf in arclength parametrization."""

    s: np.ndarray            # arclength nodes
    points: np.ndarray       # (n, 2) positions (universal cover coordinates)
    directions: np.ndarray   # (n, 2) unit tangents w
    log_speed: np.ndarray    # (n,) q values; affine velocity is e^q w
    family: int
    closed: bool = False
    period: float | None = None
    closure_error: float | None = None
    return_derivative: float | None = None
    _dense: object = field(default=None, repr=False)

    @property
    def states(self):
        sp = np.exp(self.log_speed)
        return [
            GeodesicState(p[0], p[1], sp[i] * self.directions[i, 0],
                          sp[i] * self.directions[i, 1])
            for i, p in enumerate(self.points)
        ]

    def at(self, s):
        """Position and unit direction at arclength s from the dense solution."""
        vals = self._dense(s)
        return vals[:2], vals[2:4], vals[4]

    @property
    def holonomy_from_log_speed(self):
        """e^{q(period) - q(0)} for a closed leaf."""
        if not self.closed:
            raise ClosureError("leaf is not closed")
        _, _, q = self.at(self.period)
        return float(np.exp(q - self.log_speed[0]))


def _wrapped_diff(domain, p, p0):
    """Shortest-displacement vector p - p0 on the (partially) periodic domain."""
    d = np.asarray(p, dtype=float) - np.asarray(p0, dtype=float)
    for axis in range(2):
        if domain.periodic[axis]:
            L = domain.lengths[axis]
            d[axis] = (d[axis] + L / 2.0) % L - L / 2.0
    return d


def trace_leaf(metric, p, family, budget, rtol=1e-10, atol=1e-12,
               closing_tol=1e-6, angle_tol=1e-6, capture_radius=1e-2,
               n_nodes=257, compute_return_derivative=True):
    """Trace the lightlike leaf of the given family through p.

    The trace integrates the null geodesic through p (null geodesics
    are exactly the leaves of the two lightlike foliations), so the
    recorded data satisfies the geodesic equation to integrator
    tolerance by construction.  Closure is detected by first return
    into a small ball around p with matching direction.
    """
    if family not in (0, 1):
        raise TracingError("family must be 0 or 1")
    x0, y0 = metric.domain.wrap(p[0], p[1])
    x0, y0 = float(x0), float(y0)
    angs = metric.lightlike_angles(x0, y0)
    theta0 = float(angs[family])
    w0 = np.array([np.cos(theta0), np.sin(theta0)])
    p0 = np.array([x0, y0])

    def rhs(_, st):
        w = st[2:4]
        gam = _christoffel_at(metric, st[0], st[1])
        Gw = np.einsum("kij,i,j->k", gam, w, w)
        tang = float(w @ Gw)
        return [w[0], w[1], -(Gw[0] - tang * w[0]), -(Gw[1] - tang * w[1]), -tang]

    def ball(_, st):
        d = _wrapped_diff(metric.domain, st[:2], p0)
        return float(d @ d) - capture_radius**2

    enter = lambda t, s: ball(t, s)  # noqa: E731
    enter.terminal = False
    enter.direction = -1
    exit_ = lambda t, s: ball(t, s)  # noqa: E731
    exit_.terminal = False
    exit_.direction = 1

    def runaway(_, st):
        return abs(st[4]) - _LOG_SPEED_CAP
    runaway.terminal = True
    runaway.direction = 1

    events = [enter, exit_, runaway] + _domain_events(metric)
    sol = solve_ivp(
        rhs, (0.0, float(budget)), [x0, y0, w0[0], w0[1], 0.0],
        method="RK45", rtol=rtol, atol=atol, dense_output=True,
        events=events, max_step=capture_radius / 2.0,
    )
    if sol.status == -1:
        raise TracingError(f"leaf integration failed: {sol.message}")
    s_end = float(sol.t[-1])

    def dist(s):
        d = _wrapped_diff(metric.domain, sol.sol(s)[:2], p0)
        return float(np.hypot(d[0], d[1]))

    closed = False
    period = None
    closure_error = None
    enters, exits = sol.t_events[0], sol.t_events[1]
    for s_in in enters:
        later_exits = exits[exits > s_in]
        s_out = float(later_exits[0]) if len(later_exits) else s_end
        res = minimize_scalar(lambda s: dist(s), bounds=(float(s_in), s_out),
                              method="bounded", options={"xatol": 1e-12})
        s_star = float(res.x)
        derr = dist(s_star)
        w_star = sol.sol(s_star)[2:4]
        a_err = _angle_gap(np.arctan2(w_star[1], w_star[0]),
                           np.arctan2(w0[1], w0[0]))
        if derr <= closing_tol and a_err <= angle_tol:
            closed = True
            period = s_star
            closure_error = derr
            break

    s_max = period if closed else s_end
    nodes = np.linspace(0.0, s_max, n_nodes)
    vals = sol.sol(nodes)
    trace = LeafTrace(
        s=nodes, points=vals[:2].T.copy(), directions=vals[2:4].T.copy(),
        log_speed=vals[4].copy(), family=family, closed=closed, period=period,
        closure_error=closure_error, _dense=sol.sol,
    )
    if closed and compute_return_derivative:
        trace.return_derivative = _return_derivative(
            metric, p0, w0, theta0, family, period, rtol, atol
        )
    return trace


def _angle_gap(a, b):
    """Distance between two directions modulo pi."""
    d = (a - b) % np.pi
    return float(min(d, np.pi - d))


def _return_derivative(metric, p0, w0, theta0, family, period, rtol, atol,
                       delta=1e-6):
    """Derivative of the first-return map on the transversal through p0."""
    n0 = np.array([-w0[1], w0[0]])

    def rhs(_, st):
        w = st[2:4]
        gam = _christoffel_at(metric, st[0], st[1])
        Gw = np.einsum("kij,i,j->k", gam, w, w)
        tang = float(w @ Gw)
        return [w[0], w[1], -(Gw[0] - tang * w[0]), -(Gw[1] - tang * w[1]), -tang]

    def cross_section(s, p_start):
        angs = metric.lightlike_angles(*metric.domain.wrap(*p_start))
        th = float(angs[np.argmin([_angle_gap(a, theta0) for a in angs])])
        w_start = np.array([np.cos(th), np.sin(th)])
        if w_start @ w0 < 0:
            w_start = -w_start

        def section(_, st):
            d = _wrapped_diff(metric.domain, st[:2], p0)
            return float(d @ w0)
        section.terminal = False
        section.direction = 1.0
        sol = solve_ivp(
            rhs, (0.0, 1.25 * period),
            [p_start[0], p_start[1], w_start[0], w_start[1], 0.0],
            method="RK45", rtol=rtol, atol=atol, dense_output=True,
            events=[section], max_step=period / 64.0,
        )
        hits = [t for t in sol.t_events[0] if t > 0.5 * period]
        if not hits:
            return None
        st = sol.sol(float(hits[0]))
        return float(_wrapped_diff(metric.domain, st[:2], p0) @ n0)

    xi = {}
    for sign in (+1.0, -1.0):
        start = p0 + sign * delta * n0
        try:
            metric.domain.require_inside(start[0], start[1])
        except DomainError:
            continue
        val = cross_section(sign * delta, start)
        if val is not None:
            xi[sign] = val
    if +1.0 in xi and -1.0 in xi:
        return (xi[+1.0] - xi[-1.0]) / (2.0 * delta)
    if +1.0 in xi:
        return xi[+1.0] / delta
    if -1.0 in xi:
        return xi[-1.0] / (-delta)
    return None


def parallel_transport(metric, path, w, params=None, velocities=None,
                       reverse=False, rtol=1e-12, atol=1e-14):
    """Transport the tangent vector w along a path.

    path may be a LeafTrace (its dense solution is used directly) or a
    polyline of shape (n, 2), optionally with matching velocities for a
    Hermite fit; otherwise a cubic spline in chord-length parameter.
    Returns the transported vector at the end of the path.  With
    reverse=True the same fitted curve is traversed end to start, so a
    forward/reverse pair is an exact inverse up to integrator error.
    """
    knots = None
    if isinstance(path, LeafTrace):
        dense = path._dense
        t_end = path.period if path.closed else float(path.s[-1])

        def curve(t):
            vals = dense(t)
            return vals[:2], vals[2:4]
    else:
        pts = np.asarray(path, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise TracingError("path must be an (n, 2) polyline with n >= 2")
        if params is None:
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            params = np.concatenate([[0.0], np.cumsum(seg)])
        params = np.asarray(params, dtype=float)
        if velocities is not None:
            spline = CubicHermiteSpline(params, pts, np.asarray(velocities, dtype=float))
        else:
            spline = CubicSpline(params, pts)
        dspline = spline.derivative()
        t_end = float(params[-1])
        knots = params

        def curve(t):
            return spline(t), dspline(t)

    def rhs(t, z):
        pos, vel = curve(t)
        gam = _christoffel_at(metric, pos[0], pos[1])
        return -np.einsum("kij,i,j->k", gam, vel, z)

    # The spline path is only C^2, so the RHS has kinks at the knots;
    # integrating knot to knot keeps the solver on smooth pieces.
    if knots is None:
        spans = [(0.0, t_end)]
    else:
        spans = list(zip(knots[:-1], knots[1:]))
    if reverse:
        spans = [(b, a) for a, b in reversed(spans)]
    z = np.asarray(w, dtype=float)
    for a, b in spans:
        sol = solve_ivp(rhs, (float(a), float(b)), z,
                        method="DOP853", rtol=rtol, atol=atol)
        if sol.status != 0:
            raise TracingError(f"parallel transport failed: {sol.message}")
        z = sol.y[:, -1]
    return z


def leaf_holonomy(metric, leaf):
    """Proportionality factor of a parallel tangent field over one period.

    |lambda| = 1 is the completeness criterion for the closed leaf.
    """
    if not isinstance(leaf, LeafTrace) or not leaf.closed:
        raise ClosureError("leaf_holonomy requires a closed LeafTrace")
    w0 = leaf.directions[0]
    z = parallel_transport(metric, leaf, w0)
    lam = float(z @ w0)  # w0 is a unit vector
    residual = float(np.linalg.norm(z - lam * w0))
    if residual > 1e-5 * max(1.0, abs(lam)):
        raise TracingError(
            f"transported tangent not parallel to the leaf (residual {residual:.2e})"
        )
    return lam


def null_drift(metric, trace):
    """Max |h(w, w)| over the recorded nodes of a leaf trace."""
    xs, ys = metric.domain.wrap(trace.points[:, 0], trace.points[:, 1])
    vals = metric.norm_sq(xs, ys, trace.directions[:, 0], trace.directions[:, 1])
    return float(np.max(np.abs(vals)))


def geodesic_residual(metric, trace, samples=16, rtol=1e-12, atol=1e-14):
    """Defect of the recorded nodes against a finer re-integration.

    Re-integrates a subset of inter-node intervals at tighter tolerance
    and reports the worst state mismatch.
    """
    idx = np.linspace(0, len(trace.s) - 2, samples).astype(int)

    def rhs(_, st):
        w = st[2:4]
        gam = _christoffel_at(metric, st[0], st[1])
        Gw = np.einsum("kij,i,j->k", gam, w, w)
        tang = float(w @ Gw)
        return [w[0], w[1], -(Gw[0] - tang * w[0]), -(Gw[1] - tang * w[1]), -tang]

    worst = 0.0
    for i in idx:
        s0, s1 = float(trace.s[i]), float(trace.s[i + 1])
        st0 = np.concatenate([trace.points[i], trace.directions[i], [trace.log_speed[i]]])
        sol = solve_ivp(rhs, (s0, s1), st0, method="RK45", rtol=rtol, atol=atol)
        got = sol.y[:, -1]
        want = np.concatenate([trace.points[i + 1], trace.directions[i + 1],
                               [trace.log_speed[i + 1]]])
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def trace_csv_string(trace):
    """Render a trace as CSV rows (t, x, y, u, v) with t the arclength."""
    lines = ["t,x,y,u,v"]
    speed = np.exp(trace.log_speed)
    for i in range(len(trace.s)):
        u = speed[i] * trace.directions[i, 0]
        v = speed[i] * trace.directions[i, 1]
        vals = (trace.s[i], trace.points[i, 0], trace.points[i, 1], u, v)
        lines.append(",".join(f"{val:.17g}" for val in vals))
    return "\n".join(lines) + "\n"


def trace_to_csv(trace, path):
    with open(path, "w") as fh:
        fh.write(trace_csv_string(trace))


def pregeodesic_residual(metric, line_field, shape=None):
    """Pointwise residual of the claim that a line field is geodesic.

    For a unit field w = (cos t, sin t) the integral curves are
    pregeodesic iff  w . grad(t) + w_perp . Gamma(w, w) = 0; the max of
    the left side over the grid is returned.
    """
    shape = shape or metric.resolution
    xg, yg = metric.domain.mesh(shape)
    theta = line_field.angle_partial(xg, yg)
    tx = line_field.angle_partial(xg, yg, 1, 0)
    ty = line_field.angle_partial(xg, yg, 0, 1)
    w1, w2 = np.cos(theta), np.sin(theta)
    gam = metric.christoffel(xg, yg)
    w = np.stack([w1, w2], axis=-1)
    Gw = np.einsum("...kij,...i,...j->...k", gam, w, w)
    res = w1 * tx + w2 * ty + (-w2 * Gw[..., 0] + w1 * Gw[..., 1])
    return float(np.max(np.abs(res)))
