"""Lightlike connection frames, the annulus curvature identity, and
curvature-constancy experiments.

The central identity: for an annulus A bounded by two closed lightlike
leaves with holonomy factors lambda_1 (left) and lambda_2 (right),

    integral_A K dv_h = ln(lambda_1 / lambda_2),

and a torus metric whose curvature is constant along one lightlike
foliation must be flat; flatness_experiment probes that claim
numerically over metric families without pretending to prove it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .components import GridComponent, as_component
from .errors import ClosureError, PeriodicityError, PreconditionError, TracingError
from .geodesics import LeafTrace, leaf_holonomy, trace_leaf
from .metrics import MetricPatch, lightlike_fields, total_curvature


@dataclass
class ConnectionFrame:
    """Frame (X, X0) with h(X, X0) = 1 along a grid, plus the 1-form w.

    X is the unit representative (auxiliary Euclidean norm) of one
    lightlike family, optionally rescaled by a positive function; X0 is
    the other lightlike direction scaled to pair to 1.  The connection
    form is w(v) = h(nabla_v X, X0).
    """

    metric: MetricPatch
    family: int
    shape: tuple
    omega_x: GridComponent
    omega_y: GridComponent
    theta: object = field(repr=False, default=None)   # angle lift of X's line field
    scale: object = field(repr=False, default=None)

    def frame_vectors(self, x, y):
        """(X, X0) at the given points, shape (..., 2) each."""
        th = self.theta.angle(x, y)
        X = np.stack([np.cos(th), np.sin(th)], axis=-1)
        if self.scale is not None:
            rho = np.asarray(self.scale.eval(x, y))
            X = X * rho[..., None]
        angs = self.metric.lightlike_angles(x, y)
        th_mod = th % np.pi
        gap = np.abs(angs - th_mod[..., None])
        gap = np.minimum(gap, np.pi - gap)
        other = np.take_along_axis(
            angs, np.argmax(gap, axis=-1)[..., None], axis=-1
        )[..., 0]
        Y = np.stack([np.cos(other), np.sin(other)], axis=-1)
        q = self.metric.inner(x, y, X[..., 0], X[..., 1], Y[..., 0], Y[..., 1])
        return X, Y / np.asarray(q)[..., None]

    def omega(self, x, y):
        """Components (w_x, w_y) of the connection form at (x, y)."""
        return self.omega_x.eval(x, y), self.omega_y.eval(x, y)

    def frame_residuals(self, shape=None):
        """Max violations of h(X,X)=0, h(X0,X0)=0, h(X,X0)=1 on a grid."""
        shape = shape or self.shape
        xg, yg = self.metric.domain.mesh(shape)
        X, X0 = self.frame_vectors(xg, yg)
        hXX = self.metric.norm_sq(xg, yg, X[..., 0], X[..., 1])
        h00 = self.metric.norm_sq(xg, yg, X0[..., 0], X0[..., 1])
        hX0 = self.metric.inner(xg, yg, X[..., 0], X[..., 1], X0[..., 0], X0[..., 1])
        return {
            "null_X": float(np.max(np.abs(hXX))),
            "null_X0": float(np.max(np.abs(h00))),
            "pairing": float(np.max(np.abs(hX0 - 1.0))),
        }

    def curl_defect(self, shape=None):
        """Max pointwise violation of d(omega) = K dv_h on the grid.

        The area form dv_h is oriented by the ordered frame (X0, X); in
        (x, y) coordinates that contributes the sign of det(X0, X), and
        the identity is orientation-stable under both admissible frame
        gauges (flipping X and X0 together, or rescaling).
        """
        shape = shape or self.shape
        xg, yg = self.metric.domain.mesh(shape)
        curl = self.omega_y.eval(xg, yg, 1, 0) - self.omega_x.eval(xg, yg, 0, 1)
        K = self.metric.curvature(xg, yg)
        E, F, G = self.metric.component_values(xg, yg)
        vol = np.sqrt(F * F - E * G)
        X, X0 = self.frame_vectors(xg, yg)
        orient = np.sign(X0[..., 0] * X[..., 1] - X0[..., 1] * X[..., 0])
        return float(np.max(np.abs(curl - orient * K * vol)))


def connection_form(patch, family=0, shape=None, scale=None):
    """Build the lightlike frame of one family and its connection form.

    The frame takes X along the selected lightlike family with unit
    auxiliary Euclidean length (times the optional positive rescaling),
    and X0 along the other family normalized so h(X, X0) = 1.  If X is
    rescaled by rho the form shifts by d(ln rho); its exterior
    derivative does not change.
    """
    shape = shape or patch.resolution
    fields = lightlike_fields(patch, shape)
    fld, other = fields[family], fields[1 - family]

    xg, yg = patch.domain.mesh(shape)
    th = fld.angle(xg, yg)
    thx = fld.angle_partial(xg, yg, 1, 0)
    thy = fld.angle_partial(xg, yg, 0, 1)
    X = np.stack([np.cos(th), np.sin(th)], axis=-1)
    Xp = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    ph = other.angle(xg, yg)
    Y = np.stack([np.cos(ph), np.sin(ph)], axis=-1)
    q = patch.inner(xg, yg, X[..., 0], X[..., 1], Y[..., 0], Y[..., 1])
    if np.min(np.abs(q)) < 1e-12:
        raise PreconditionError("frame normalization singular: h(X, Y) vanishes")
    X0 = Y / np.asarray(q)[..., None]

    a = patch.inner(xg, yg, Xp[..., 0], Xp[..., 1], X0[..., 0], X0[..., 1])
    gam = patch.christoffel(xg, yg)
    # GX[..., k, i] = Gamma^k_{ij} X^j
    GX = np.einsum("...kij,...j->...ki", gam, X)
    wx = thx * a + patch.inner(xg, yg, GX[..., 0, 0], GX[..., 1, 0],
                               X0[..., 0], X0[..., 1])
    wy = thy * a + patch.inner(xg, yg, GX[..., 0, 1], GX[..., 1, 1],
                               X0[..., 0], X0[..., 1])

    scale_comp = None
    if scale is not None:
        scale_comp = as_component(scale)
        rho = np.asarray(scale_comp.eval(xg, yg))
        if np.min(rho) <= 0:
            raise PreconditionError("rescaling function must be positive")
        wx = wx + np.asarray(scale_comp.eval(xg, yg, 1, 0)) / rho
        wy = wy + np.asarray(scale_comp.eval(xg, yg, 0, 1)) / rho

    bounds = patch.domain.bounds
    periodic = patch.domain.periodic
    return ConnectionFrame(
        metric=patch, family=family, shape=tuple(shape),
        omega_x=GridComponent(np.asarray(wx, dtype=float), bounds, periodic),
        omega_y=GridComponent(np.asarray(wy, dtype=float), bounds, periodic),
        theta=fld, scale=scale_comp,
    )


def curvature_integral(patch, x_range=None, y_range=None, n=96):
    """integral of K dv_h over a coordinate subrectangle.

    Periodic full-range axes use the uniform rectangle rule (spectrally
    accurate for smooth integrands); all other axes use Gauss-Legendre.
    """
    x0, x1, y0, y1 = patch.domain.bounds
    xr = (x0, x1) if x_range is None else tuple(map(float, x_range))
    yr = (y0, y1) if y_range is None else tuple(map(float, y_range))

    def axis_rule(axis, lo, hi):
        full = np.isclose(lo, patch.domain.bounds[2 * axis]) and np.isclose(
            hi, patch.domain.bounds[2 * axis + 1]
        )
        if patch.domain.periodic[axis] and full:
            pts = lo + (hi - lo) * np.arange(n) / n
            wts = np.full(n, (hi - lo) / n)
        else:
            z, w = leggauss(n)
            pts = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
            wts = 0.5 * (hi - lo) * w
        return pts, wts

    xs, wx = axis_rule(0, *xr)
    ys, wy = axis_rule(1, *yr)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    K = patch.curvature(xg, yg)
    E, F, G = patch.component_values(xg, yg)
    vol = np.sqrt(F * F - E * G)
    return float(np.einsum("i,j,ij->", wx, wy, K * vol))


@dataclass
class LightlikeAnnulus:
    """Strip between two closed lightlike leaves.

    strip_axis is the coordinate crossing the annulus (0 means the
    boundary leaves are x = const circles); the other axis is periodic.
    """

    metric: MetricPatch
    left: LeafTrace
    right: LeafTrace
    strip_axis: int
    strip_range: tuple


def make_annulus(metric, strip_range=None, strip_axis=None, budget=None,
                 closing_tol=1e-6, boundary_tol=1e-8):
    """Construct the annulus between two closed lightlike boundary circles."""
    periodic = metric.domain.periodic
    if strip_axis is None:
        if periodic == (False, True):
            strip_axis = 0
        elif periodic == (True, False):
            strip_axis = 1
        elif metric.domain.is_torus:
            strip_axis = 0
        else:
            raise PeriodicityError(
                "annulus needs a periodic axis for the boundary circles"
            )
    if not periodic[1 - strip_axis]:
        raise PeriodicityError("the boundary-circle axis must be periodic")

    b = metric.domain.bounds
    lo, hi = (b[0], b[1]) if strip_axis == 0 else (b[2], b[3])
    if strip_range is not None:
        lo, hi = float(strip_range[0]), float(strip_range[1])
    if not (lo < hi):
        raise PreconditionError("empty strip range")

    circle_axis = 1 - strip_axis
    period = metric.domain.lengths[circle_axis]
    if budget is None:
        budget = 3.0 * period
    tangent_angle = np.pi / 2 if strip_axis == 0 else 0.0

    def boundary_leaf(c):
        # the boundary circle {strip coordinate = c} must be lightlike
        ts = metric.domain.axis_points(circle_axis, 64)
        if strip_axis == 0:
            xs, ys = np.full_like(ts, c), ts
            tv = (np.zeros_like(ts), np.ones_like(ts))
        else:
            xs, ys = ts, np.full_like(ts, c)
            tv = (np.ones_like(ts), np.zeros_like(ts))
        norms = metric.norm_sq(xs, ys, *tv)
        scale = max(1.0, float(np.max(np.abs(metric.component_values(xs, ys)[0]))))
        if float(np.max(np.abs(norms))) > boundary_tol * scale:
            raise PreconditionError(
                f"boundary circle at coordinate {c:g} is not lightlike"
            )
        seed = (c, float(ts[0])) if strip_axis == 0 else (float(ts[0]), c)
        angs = metric.lightlike_angles(*metric.domain.wrap(*seed))
        gaps = [min(abs(a - tangent_angle), np.pi - abs(a - tangent_angle))
                for a in angs]
        fam = int(np.argmin(gaps))
        leaf = trace_leaf(metric, seed, fam, budget, closing_tol=closing_tol)
        if not leaf.closed:
            raise ClosureError(
                f"boundary leaf at coordinate {c:g} did not close within budget"
            )
        return leaf

    left = boundary_leaf(lo)
    right = boundary_leaf(hi)
    return LightlikeAnnulus(metric, left, right, strip_axis, (lo, hi))


def annulus_gauss_bonnet(annulus, quad_n=96):
    """Curvature integral over the annulus and ln(lambda_left/lambda_right).

    For complete boundary leaves both numbers vanish.
    """
    for leaf in (annulus.left, annulus.right):
        if not leaf.closed:
            raise ClosureError("annulus boundary leaf is not closed")
    m = annulus.metric
    if annulus.strip_axis == 0:
        integral = curvature_integral(m, x_range=annulus.strip_range, n=quad_n)
    else:
        integral = curvature_integral(m, y_range=annulus.strip_range, n=quad_n)
    lam1 = leaf_holonomy(m, annulus.left)
    lam2 = leaf_holonomy(m, annulus.right)
    log_ratio = float(np.log(abs(lam1) / abs(lam2)))
    return integral, log_ratio


def _batch_leaf_states(metric, seeds, angles, budget, n_nodes, rtol, atol):
    """Integrate many lightlike pregeodesics as one stacked system."""
    seeds = np.asarray(seeds, dtype=float)
    m = len(seeds)
    state0 = np.zeros((m, 5))
    state0[:, 0:2] = seeds
    state0[:, 2] = np.cos(angles)
    state0[:, 3] = np.sin(angles)

    x0, x1, y0, y1 = metric.domain.bounds
    per = metric.domain.periodic

    def rhs(_, flat):
        st = flat.reshape(m, 5)
        xs, ys = metric.domain.wrap(st[:, 0], st[:, 1])
        if not per[0]:
            xs = np.clip(xs, x0, x1)
        if not per[1]:
            ys = np.clip(ys, y0, y1)
        w = st[:, 2:4]
        gam = metric.christoffel(xs, ys)
        Gw = np.einsum("mkij,mi,mj->mk", gam, w, w)
        tang = np.einsum("mk,mk->m", w, Gw)
        out = np.empty_like(st)
        out[:, 0:2] = w
        out[:, 2:4] = -(Gw - tang[:, None] * w)
        out[:, 4] = -tang
        return out.ravel()

    t_eval = np.linspace(0.0, budget, n_nodes)
    sol = solve_ivp(rhs, (0.0, budget), state0.ravel(), method="RK45",
                    rtol=rtol, atol=atol, t_eval=t_eval)
    if sol.status != 0:
        raise TracingError(f"batch leaf tracing failed: {sol.message}")
    return sol.y.T.reshape(n_nodes, m, 5)


def constancy_deviation(patch, sigma, family, seeds=32, budget=None,
                        n_nodes=257, rtol=1e-8, atol=1e-10):
    """Max oscillation of the scalar sigma along sampled leaves of a family.

    Vanishes (to tracing tolerance) exactly when sigma is constant along
    every sampled leaf.  Seeds sit on a transversal segment crossing the
    family; each leaf is traced for the arclength budget (default four
    domain perimeters' worth) and sigma is sampled at the trace nodes.
    """
    fields = lightlike_fields(patch, (64, 64))
    fld = fields[family]
    dom = patch.domain
    Lx, Ly = dom.lengths
    if budget is None:
        budget = 4.0 * (Lx + Ly)

    xg, yg = dom.mesh((32, 32))
    th = fld.angle(xg, yg)
    mostly_horizontal = float(np.mean(np.abs(np.cos(th)))) >= float(
        np.mean(np.abs(np.sin(th)))
    )
    x0, x1, y0, y1 = dom.bounds
    offs = (np.arange(seeds) + 0.5) / seeds
    if mostly_horizontal:
        pts = np.stack([np.full(seeds, x0 + 0.5 * Lx), y0 + offs * Ly], axis=1)
    else:
        pts = np.stack([x0 + offs * Lx, np.full(seeds, y0 + 0.5 * Ly)], axis=1)
    angles = fld.angle(pts[:, 0], pts[:, 1])

    states = _batch_leaf_states(patch, pts, angles, budget, n_nodes, rtol, atol)
    xs, ys = dom.wrap(states[..., 0], states[..., 1])
    slack = 1e-7
    inside = np.ones(states.shape[:2], dtype=bool)
    if not dom.periodic[0]:
        inside &= (xs >= x0 - slack) & (xs <= x1 + slack)
    if not dom.periodic[1]:
        inside &= (ys >= y0 - slack) & (ys <= y1 + slack)
    # once a leaf leaves a non-periodic domain, ignore everything after
    inside = np.logical_and.accumulate(inside, axis=0)

    worst = 0.0
    for j in range(states.shape[1]):
        mask = inside[:, j]
        if mask.sum() < 2:
            raise TracingError("leaf left the domain immediately")
        vals = np.asarray(sigma(np.clip(xs[mask, j], x0, x1),
                                np.clip(ys[mask, j], y0, y1)), dtype=float)
        worst = max(worst, float(np.max(vals) - np.min(vals)))
    return worst


def flatness_experiment(metrics, ids=None, seeds=32, shape=None):
    """Probe 'curvature constant along a lightlike foliation implies flat'.

    For each torus metric, reports the constancy deviation of K along
    both lightlike families, max |K|, and the total-curvature residual.
    The table is a falsification device, not a proof: the claim
    survives when small deviations only occur together with small
    max |K|.
    """
    records = []
    for idx, m in enumerate(metrics):
        if not m.domain.is_torus:
            raise PeriodicityError("flatness experiment requires torus metrics")
        mid = ids[idx] if ids is not None else f"metric-{idx}"
        res = shape or m.resolution
        Kgrid = m.curvature_grid(res)
        sigma = m.curvature
        dev0 = constancy_deviation(m, sigma, 0, seeds=seeds)
        dev1 = constancy_deviation(m, sigma, 1, seeds=seeds)
        records.append({
            "metric_id": str(mid),
            "dev_family0": dev0,
            "dev_family1": dev1,
            "max_abs_K": float(np.max(np.abs(Kgrid.values))),
            "gb_residual": abs(total_curvature(m, res)),
        })
    return records
