"""Lorentzian metric patches on rectangles and tori.

A metric is E dx^2 + 2F dx dy + G dy^2 with EG - F^2 < 0 (signature
(1,1)).  Components may be closed-form expressions (exact derivatives)
or grid samples (spectral or sixth-order finite-difference
derivatives).  This module provides pointwise geometry (metric values,
Christoffel symbols, curvature, lightlike directions), pullbacks under
torus diffeomorphisms, Ck distances, total curvature, and CSV
round-tripping of grid metrics.

Curvature convention: K = R_1212 / |det g|, the unique constant
multiple of the Brioschi expression that gives K = -G''(x)/2 for the
family 2 dx dy + G(x) dy^2.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .components import ExprComponent, GridComponent, as_component
from .errors import DomainError, PeriodicityError, SignatureError
from .expressions import X_SYMBOL, Y_SYMBOL, as_expression

DEFAULT_RESOLUTION = 128


@dataclass(frozen=True)
class Domain:
    """A coordinate rectangle with per-axis periodicity flags."""

    bounds: tuple  # (x0, x1, y0, y1)
    periodic: tuple = (False, False)

    def __post_init__(self):
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise DomainError("domain bounds must satisfy x1 > x0 and y1 > y0")
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        object.__setattr__(self, "periodic", (bool(self.periodic[0]), bool(self.periodic[1])))

    @property
    def lengths(self):
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0, y1 - y0)

    @property
    def is_torus(self):
        return self.periodic[0] and self.periodic[1]

    def wrap(self, x, y):
        """Wrap periodic coordinates into the fundamental rectangle."""
        x0, x1, y0, y1 = self.bounds
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.periodic[0]:
            x = x0 + np.mod(x - x0, x1 - x0)
        if self.periodic[1]:
            y = y0 + np.mod(y - y0, y1 - y0)
        return x, y

    def require_inside(self, x, y, slack=1e-9):
        x, y = self.wrap(x, y)
        x0, x1, y0, y1 = self.bounds
        if np.any(x < x0 - slack) or np.any(x > x1 + slack):
            raise DomainError(f"x outside [{x0}, {x1}]")
        if np.any(y < y0 - slack) or np.any(y > y1 + slack):
            raise DomainError(f"y outside [{y0}, {y1}]")
        return x, y

    def axis_points(self, axis, n):
        """n uniform samples; periodic axes omit the duplicate endpoint."""
        lo = self.bounds[0] if axis == 0 else self.bounds[2]
        hi = self.bounds[1] if axis == 0 else self.bounds[3]
        if self.periodic[axis]:
            return lo + np.arange(n) * ((hi - lo) / n)
        return np.linspace(lo, hi, n)

    def mesh(self, shape):
        xs = self.axis_points(0, shape[0])
        ys = self.axis_points(1, shape[1])
        return np.meshgrid(xs, ys, indexing="ij")


UNIT_TORUS = Domain((0.0, 1.0, 0.0, 1.0), (True, True))
UNIT_SQUARE = Domain((0.0, 1.0, 0.0, 1.0), (False, False))

_COMPONENT_NAMES = ("E", "F", "G")


class MetricPatch:
    """A Lorentzian metric on a Domain, componentwise E, F, G."""

    def __init__(self, E, F, G, domain=UNIT_TORUS, resolution=DEFAULT_RESOLUTION):
        self.domain = domain if isinstance(domain, Domain) else Domain(*domain)
        self.E = self._coerce(E)
        self.F = self._coerce(F)
        self.G = self._coerce(G)
        if isinstance(resolution, int):
            resolution = (resolution, resolution)
        self.resolution = (int(resolution[0]), int(resolution[1]))

    def _coerce(self, comp):
        if isinstance(comp, GridComponent):
            if comp.bounds != self.domain.bounds or comp.periodic != self.domain.periodic:
                raise DomainError("grid component does not match the metric domain")
            return comp
        return as_component(comp)

    @classmethod
    def from_grids(cls, E, F, G, domain=UNIT_TORUS, resolution=None):
        """Build a grid-backed metric from three sample arrays."""
        comps = [
            GridComponent(arr, domain.bounds, domain.periodic) for arr in (E, F, G)
        ]
        res = resolution or comps[0].values.shape
        return cls(*comps, domain=domain, resolution=res)

    @property
    def components(self):
        return (self.E, self.F, self.G)

    @property
    def is_expression(self):
        return all(isinstance(c, ExprComponent) for c in self.components)

    def sampled(self, shape=None):
        """A grid-backed copy of this metric (identity if already grids)."""
        shape = shape or self.resolution
        grids = [
            c.values.copy()
            if isinstance(c, GridComponent) and c.values.shape == tuple(shape)
            else self._sample_component(c, shape)
            for c in self.components
        ]
        return MetricPatch.from_grids(*grids, domain=self.domain, resolution=shape)

    def _sample_component(self, comp, shape):
        xg, yg = self.domain.mesh(shape)
        return np.broadcast_to(np.asarray(comp.eval(xg, yg), dtype=float), xg.shape).copy()

    # ---- pointwise geometry -------------------------------------------------

    def component_values(self, x, y, dx_order=0, dy_order=0):
        """(E, F, G) partial derivatives of the given orders at (x, y)."""
        x, y = self.domain.require_inside(x, y)
        return tuple(
            np.asarray(c.eval(x, y, dx_order, dy_order), dtype=float)
            for c in self.components
        )

    def matrix(self, x, y, validate=True):
        """Metric matrices [[E, F], [F, G]], shape (..., 2, 2)."""
        E, F, G = self.component_values(x, y)
        g = np.stack(
            [np.stack([E, F], axis=-1), np.stack([F, G], axis=-1)], axis=-2
        )
        if validate:
            det = E * G - F * F
            if np.any(det >= 0):
                worst = float(np.max(det))
                raise SignatureError(
                    f"metric not Lorentzian: EG - F^2 reaches {worst:.3e} >= 0"
                )
        return g

    def det(self, x, y):
        E, F, G = self.component_values(x, y)
        return E * G - F * F

    def check_lorentzian(self, shape=None):
        """Sampled signature check over the whole domain."""
        shape = shape or self.resolution
        xg, yg = self.domain.mesh(shape)
        det = self.det(xg, yg)
        if np.any(det >= 0):
            raise SignatureError(
                f"metric not Lorentzian on the grid: max(EG - F^2) = {float(np.max(det)):.3e}"
            )
        return float(np.max(det))

    def _derivative_stack(self, x, y, order):
        """g, dg, ddg arrays at flattened points.

        dg[..., m, i, j] = d_m g_ij and ddg[..., m, l, i, j] = d_m d_l g_ij.
        """
        parts = {}
        for mx in range(order + 1):
            for my in range(order + 1 - mx):
                parts[(mx, my)] = self.component_values(x, y, mx, my)

        def mat(key):
            E, F, G = parts[key]
            return np.stack(
                [np.stack([E, F], axis=-1), np.stack([F, G], axis=-1)], axis=-2
            )

        g = mat((0, 0))
        dg = None
        ddg = None
        if order >= 1:
            dg = np.stack([mat((1, 0)), mat((0, 1))], axis=-3)
        if order >= 2:
            dxx, dxy, dyy = mat((2, 0)), mat((1, 1)), mat((0, 2))
            row0 = np.stack([dxx, dxy], axis=-3)
            row1 = np.stack([dxy, dyy], axis=-3)
            ddg = np.stack([row0, row1], axis=-4)
        return g, dg, ddg

    def christoffel(self, x, y):
        """Levi-Civita symbols, shape (..., 2, 2, 2) indexed [k, i, j]."""
        g, dg, _ = self._derivative_stack(x, y, 1)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        if np.any(det >= 0):
            raise SignatureError("degenerate or non-Lorentzian metric in christoffel")
        ginv = _inv2(g, det)
        # T_{lij} = d_i g_jl + d_j g_il - d_l g_ij
        d = dg  # d[..., m, i, j]
        T = np.empty(g.shape[:-2] + (2, 2, 2))
        for l in range(2):
            for i in range(2):
                for j in range(2):
                    T[..., l, i, j] = d[..., i, j, l] + d[..., j, i, l] - d[..., l, i, j]
        gamma = 0.5 * np.einsum("...kl,...lij->...kij", ginv, T)
        return gamma

    def curvature(self, x, y):
        """Gaussian curvature K = R_1212 / |det g| at (x, y)."""
        g, dg, ddg = self._derivative_stack(x, y, 2)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        if np.any(det >= 0):
            raise SignatureError("degenerate or non-Lorentzian metric in curvature")
        ginv = _inv2(g, det)
        d = dg
        T = np.empty(g.shape[:-2] + (2, 2, 2))
        dT = np.empty(g.shape[:-2] + (2, 2, 2, 2))
        for l in range(2):
            for i in range(2):
                for j in range(2):
                    T[..., l, i, j] = d[..., i, j, l] + d[..., j, i, l] - d[..., l, i, j]
                    for m in range(2):
                        dT[..., m, l, i, j] = (
                            ddg[..., m, i, j, l] + ddg[..., m, j, i, l] - ddg[..., m, l, i, j]
                        )
        gamma = 0.5 * np.einsum("...kl,...lij->...kij", ginv, T)
        dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
        dgamma = 0.5 * (
            np.einsum("...mkl,...lij->...mkij", dginv, T)
            + np.einsum("...kl,...mlij->...mkij", ginv, dT)
        )
        # R^rho_{212} with 0-based sigma=1, mu=0, nu=1
        R = (
            dgamma[..., 0, :, 1, 1]
            - dgamma[..., 1, :, 0, 1]
            + np.einsum("...rl,...l->...r", gamma[..., :, 0, :], gamma[..., :, 1, 1])
            - np.einsum("...rl,...l->...r", gamma[..., :, 1, :], gamma[..., :, 0, 1])
        )
        r1212 = np.einsum("...r,...r->...", g[..., 0, :], R)
        K = r1212 / np.abs(det)
        return K if K.shape else float(K)

    def curvature_grid(self, shape=None):
        """Curvature sampled on the domain grid, as a GridComponent."""
        shape = shape or self.resolution
        xg, yg = self.domain.mesh(shape)
        K = np.broadcast_to(np.asarray(self.curvature(xg, yg)), xg.shape).copy()
        return GridComponent(K, self.domain.bounds, self.domain.periodic)

    def lightlike_directions(self, x, y):
        """The two null directions as unit vectors, ordered by angle in [0, pi).

        Returns an array of shape (..., 2, 2); [..., a, :] is the a-th
        direction (cos t, sin t) with angle t in [0, pi).
        """
        E, F, G = self.component_values(x, y)
        disc = F * F - E * G
        if np.any(disc <= 0):
            raise SignatureError("no real null directions: EG - F^2 >= 0 somewhere")
        D = np.sqrt(disc)
        # two parametrizations of each root; pick the better-conditioned one
        plus = _pick_vector(np.stack([-F + D, E], axis=-1), np.stack([G, -F - D], axis=-1))
        minus = _pick_vector(np.stack([-F - D, E], axis=-1), np.stack([G, -F + D], axis=-1))
        a_plus = _angle_mod_pi(plus)
        a_minus = _angle_mod_pi(minus)
        lo = np.minimum(a_plus, a_minus)
        hi = np.maximum(a_plus, a_minus)
        angles = np.stack([lo, hi], axis=-1)
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)

    def lightlike_angles(self, x, y):
        """Angles in [0, pi) of the two null directions, ordered ascending."""
        dirs = self.lightlike_directions(x, y)
        return _angle_mod_pi(dirs)

    def norm_sq(self, x, y, vx, vy):
        """h(v, v) for tangent vectors v = (vx, vy) at (x, y)."""
        E, F, G = self.component_values(x, y)
        return E * vx * vx + 2.0 * F * vx * vy + G * vy * vy

    def inner(self, x, y, ux, uy, vx, vy):
        E, F, G = self.component_values(x, y)
        return E * ux * vx + F * (ux * vy + uy * vx) + G * uy * vy

    def scaled(self, c):
        """The metric c*h (c a positive constant)."""
        if c <= 0:
            raise SignatureError("conformal constant must be positive")
        comps = []
        for comp in self.components:
            if isinstance(comp, ExprComponent):
                comps.append(ExprComponent(sp.Float(c) * comp.expr))
            else:
                comps.append(GridComponent(c * comp.values, comp.bounds, comp.periodic))
        return MetricPatch(*comps, domain=self.domain, resolution=self.resolution)


def _inv2(g, det):
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1]
    inv[..., 1, 1] = g[..., 0, 0]
    inv[..., 0, 1] = -g[..., 0, 1]
    inv[..., 1, 0] = -g[..., 1, 0]
    return inv / det[..., None, None]


def _pick_vector(a, b):
    """Choose per point the larger of two parallel representatives."""
    na = np.max(np.abs(a), axis=-1)
    nb = np.max(np.abs(b), axis=-1)
    return np.where((na >= nb)[..., None], a, b)


def _angle_mod_pi(v):
    ang = np.arctan2(v[..., 1], v[..., 0])
    return np.mod(ang, np.pi)


# ---- torus diffeomorphisms --------------------------------------------------


class TorusDiffeo:
    """Integer-matrix torus map plus an optional periodic isotopy part.

    The map is p -> M p + d(p) with M in GL(2, Z) and d a pair of
    doubly periodic displacement expressions.
    """

    def __init__(self, matrix, displacement=None):
        self.matrix = np.array(matrix, dtype=np.int64)
        if self.matrix.shape != (2, 2):
            raise DomainError("integer part must be a 2x2 matrix")
        if abs(int(round(np.linalg.det(self.matrix)))) != 1:
            raise DomainError("integer part must have determinant +-1")
        if displacement is None:
            self.displacement = None
        else:
            dx, dy = displacement
            self.displacement = (as_expression(dx), as_expression(dy))

    @classmethod
    def identity(cls):
        return cls(np.eye(2, dtype=np.int64))

    @property
    def is_linear(self):
        return self.displacement is None or all(d == 0 for d in self.displacement)

    def _disp_funcs(self):
        if self.displacement is None:
            return None
        return tuple(ExprComponent(d) for d in self.displacement)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a, b, c, d = (float(self.matrix[0, 0]), float(self.matrix[0, 1]),
                      float(self.matrix[1, 0]), float(self.matrix[1, 1]))
        X = a * x + b * y
        Y = c * x + d * y
        funcs = self._disp_funcs()
        if funcs is not None:
            X = X + funcs[0].eval(x, y)
            Y = Y + funcs[1].eval(x, y)
        return X, Y

    def jacobian(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        J = np.broadcast_to(self.matrix.astype(float), shape + (2, 2)).copy()
        funcs = self._disp_funcs()
        if funcs is not None:
            J[..., 0, 0] += funcs[0].eval(x, y, 1, 0)
            J[..., 0, 1] += funcs[0].eval(x, y, 0, 1)
            J[..., 1, 0] += funcs[1].eval(x, y, 1, 0)
            J[..., 1, 1] += funcs[1].eval(x, y, 0, 1)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(np.abs(det) < 1e-12):
            raise DomainError("diffeomorphism Jacobian is singular somewhere")
        return J

    def compose(self, other):
        """self after other: (self.compose(other))(p) = self(other(p))."""
        M = self.matrix @ other.matrix
        if self.displacement is None and other.displacement is None:
            return TorusDiffeo(M)
        sx = sp.Integer(other.matrix[0, 0]) * X_SYMBOL + sp.Integer(other.matrix[0, 1]) * Y_SYMBOL
        sy = sp.Integer(other.matrix[1, 0]) * X_SYMBOL + sp.Integer(other.matrix[1, 1]) * Y_SYMBOL
        if other.displacement is not None:
            sx = sx + other.displacement[0]
            sy = sy + other.displacement[1]
        subs = {X_SYMBOL: sx, Y_SYMBOL: sy}
        dx = sp.Integer(0)
        dy = sp.Integer(0)
        if self.displacement is not None:
            dx = self.displacement[0].subs(subs, simultaneous=True)
            dy = self.displacement[1].subs(subs, simultaneous=True)
        if other.displacement is not None:
            a, b = self.matrix[0]
            c, d = self.matrix[1]
            dx = dx + sp.Integer(a) * other.displacement[0] + sp.Integer(b) * other.displacement[1]
            dy = dy + sp.Integer(c) * other.displacement[0] + sp.Integer(d) * other.displacement[1]
        return TorusDiffeo(M, (sp.expand(dx), sp.expand(dy)))

    def iterate(self, n):
        """The n-fold composition of self (n >= 1)."""
        out = self
        for _ in range(n - 1):
            out = self.compose(out)
        return out


def pullback(metric, phi, resolution=None, prefer_symbolic=True):
    """The pulled-back metric phi* h with components J^T (h o phi) J."""
    if not metric.domain.is_torus and not phi.is_linear:
        raise PeriodicityError("nonlinear pullback requires a torus domain")
    if not metric.domain.is_torus and not np.array_equal(phi.matrix, np.eye(2, dtype=np.int64)):
        raise PeriodicityError("integer-part pullback requires a periodic domain")
    resolution = resolution or metric.resolution
    if prefer_symbolic and metric.is_expression:
        return _pullback_symbolic(metric, phi, resolution)
    return _pullback_grid(metric, phi, resolution)


def _pullback_symbolic(metric, phi, resolution):
    a, b = (sp.Integer(int(v)) for v in phi.matrix[0])
    c, d = (sp.Integer(int(v)) for v in phi.matrix[1])
    sx = a * X_SYMBOL + b * Y_SYMBOL
    sy = c * X_SYMBOL + d * Y_SYMBOL
    if phi.displacement is not None:
        sx = sx + phi.displacement[0]
        sy = sy + phi.displacement[1]
    subs = {X_SYMBOL: sx, Y_SYMBOL: sy}
    E = metric.E.expr.subs(subs, simultaneous=True)
    F = metric.F.expr.subs(subs, simultaneous=True)
    G = metric.G.expr.subs(subs, simultaneous=True)
    j11, j12 = sp.diff(sx, X_SYMBOL), sp.diff(sx, Y_SYMBOL)
    j21, j22 = sp.diff(sy, X_SYMBOL), sp.diff(sy, Y_SYMBOL)
    En = sp.expand(E * j11**2 + 2 * F * j11 * j21 + G * j21**2)
    Fn = sp.expand(E * j11 * j12 + F * (j11 * j22 + j12 * j21) + G * j21 * j22)
    Gn = sp.expand(E * j12**2 + 2 * F * j12 * j22 + G * j22**2)
    return MetricPatch(En, Fn, Gn, domain=metric.domain, resolution=resolution)


def _pullback_grid(metric, phi, resolution):
    xg, yg = metric.domain.mesh(resolution)
    X, Y = phi(xg, yg)
    X, Y = metric.domain.wrap(X, Y)
    g = metric.matrix(X, Y)
    J = phi.jacobian(xg, yg)
    gp = np.einsum("...ki,...kl,...lj->...ij", J, g, J)
    return MetricPatch.from_grids(
        gp[..., 0, 0], gp[..., 0, 1], gp[..., 1, 1], domain=metric.domain,
        resolution=resolution,
    )


# ---- metric functionals ------------------------------------------------------


def ck_distance(h1, h2, k, shape=None):
    """Max over a common grid of |partial^a (c1 - c2)| for |a| <= k."""
    if not isinstance(k, (int, np.integer)) or k < 0 or k > 2:
        raise DomainError("k must be 0, 1 or 2")
    if h1.domain.bounds != h2.domain.bounds or h1.domain.periodic != h2.domain.periodic:
        raise DomainError("metrics live on different domains")
    shape = shape or tuple(max(a, b) for a, b in zip(h1.resolution, h2.resolution))
    xg, yg = h1.domain.mesh(shape)
    worst = 0.0
    for mx in range(k + 1):
        for my in range(k + 1 - mx):
            a = h1.component_values(xg, yg, mx, my)
            b = h2.component_values(xg, yg, mx, my)
            for ca, cb in zip(a, b):
                worst = max(worst, float(np.max(np.abs(ca - cb))))
    return worst


def total_curvature(metric, shape=None):
    """Integral of K dv_h over a torus patch, dv_h = sqrt(F^2 - EG) dx dy."""
    if not metric.domain.is_torus:
        raise PeriodicityError("total curvature requires both axes periodic")
    shape = shape or metric.resolution
    xg, yg = metric.domain.mesh(shape)
    K = metric.curvature(xg, yg)
    E, F, G = metric.component_values(xg, yg)
    dv = np.sqrt(F * F - E * G)
    lx, ly = metric.domain.lengths
    return float(np.mean(K * dv) * lx * ly)


def eval_metric(patch, p):
    """Spec-level convenience: the 2x2 metric matrix at a single point."""
    return np.asarray(patch.matrix(p[0], p[1]), dtype=float)


def random_torus_metric(rng, harmonics=2, amplitude=0.2, domain=UNIT_TORUS,
                        resolution=DEFAULT_RESOLUTION):
    """A random analytic doubly periodic Lorentzian metric.

    E and G are small random trigonometric polynomials, F = 1 + small,
    so EG - F^2 <= amplitude^2 - (1 - amplitude)^2 < 0 whenever
    amplitude < 1/2.
    """
    if not 0 < amplitude < 0.5:
        raise SignatureError("amplitude must lie in (0, 1/2) to keep the signature")
    lx, ly = domain.lengths
    wx = 2 * sp.pi / sp.nsimplify(lx)
    wy = 2 * sp.pi / sp.nsimplify(ly)

    def trig_poly():
        terms = []
        weights = []
        for kx in range(-harmonics, harmonics + 1):
            for ky in range(-harmonics, harmonics + 1):
                if kx == 0 and ky == 0:
                    continue
                ac = rng.normal()
                bc = rng.normal()
                phase = kx * wx * X_SYMBOL + ky * wy * Y_SYMBOL
                terms.append(ac * sp.cos(phase) + bc * sp.sin(phase))
                weights.append(abs(ac) + abs(bc))
        total = sum(weights)
        scale = sp.Float(amplitude / total)
        return sp.expand(scale * sp.Add(*terms))

    E = trig_poly()
    G = trig_poly()
    F = sp.Integer(1) + trig_poly()
    m = MetricPatch(E, F, G, domain=domain, resolution=resolution)
    m.check_lorentzian()
    return m


# ---- line fields -------------------------------------------------------------


class LineField:
    """A projective direction field stored as an unwrapped angle grid.

    The angle is a continuous lift (jumps of +-pi allowed between the
    two representatives of a line); ``winding`` records the pi-multiple
    picked up around each periodic axis.
    """

    def __init__(self, component, domain, family, smooth=True, winding=(0, 0)):
        self.component = component
        self.domain = domain
        self.family = family
        self.smooth = smooth
        self.winding = winding

    def angle(self, x, y):
        x, y = self.domain.wrap(x, y)
        return self.component.eval(x, y)

    def angle_mod_pi(self, x, y):
        return np.mod(self.angle(x, y), np.pi)

    def direction(self, x, y):
        t = self.angle(x, y)
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    def angle_partial(self, x, y, dx_order=0, dy_order=0):
        x, y = self.domain.wrap(x, y)
        return self.component.eval(x, y, dx_order, dy_order)

    @property
    def grid_angles(self):
        return self.component.values


def _nearest_lift(theta, ref):
    """The representative of theta mod pi closest to ref."""
    return theta + np.pi * np.round((ref - theta) / np.pi)


def lightlike_fields(metric, shape=None):
    """Both continuous lightlike LineFields of a metric.

    Families are tracked by continuity of the angle (marching over the
    grid), not by the pointwise angle ordering, so each returned field
    follows a single root of the null quadratic across the patch.
    """
    shape = shape or metric.resolution
    nx, ny = shape
    dom = metric.domain
    xs = np.linspace(dom.bounds[0], dom.bounds[1], nx + 1)
    ys = np.linspace(dom.bounds[2], dom.bounds[3], ny + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    wx, wy = dom.wrap(xg, yg)
    raw = metric.lightlike_angles(wx, wy)  # (nx+1, ny+1, 2), ascending per point
    lift = np.empty((nx + 1, ny + 1, 2))
    lift[0, 0] = raw[0, 0]
    smooth = True

    def assign(i, j, pi_, pj_):
        nonlocal smooth
        prev = lift[pi_, pj_]
        cands = raw[i, j]
        for fam in range(2):
            c0 = _nearest_lift(cands[0], prev[fam])
            c1 = _nearest_lift(cands[1], prev[fam])
            pick = c0 if abs(c0 - prev[fam]) <= abs(c1 - prev[fam]) else c1
            if abs(pick - prev[fam]) > 0.75:
                smooth = False
            lift[i, j, fam] = pick

    for i in range(1, nx + 1):
        assign(i, 0, i - 1, 0)
    for j in range(1, ny + 1):
        for i in range(nx + 1):
            assign(i, j, i, j - 1)

    fields = []
    for fam in range(2):
        vals = lift[:, :, fam]
        winding = [0, 0]
        fam_smooth = smooth
        if dom.periodic[0]:
            gap = vals[-1, :] - vals[0, :]
            k = np.round(np.mean(gap) / np.pi)
            if np.max(np.abs(gap - k * np.pi)) > 1e-6:
                fam_smooth = False
            winding[0] = int(k)
        if dom.periodic[1]:
            gap = vals[:, -1] - vals[:, 0]
            k = np.round(np.mean(gap) / np.pi)
            if np.max(np.abs(gap - k * np.pi)) > 1e-6:
                fam_smooth = False
            winding[1] = int(k)
        if dom.is_torus and winding == [0, 0] and fam_smooth:
            comp = GridComponent(vals[:nx, :ny].copy(), dom.bounds, dom.periodic)
        else:
            comp = GridComponent(vals.copy(), dom.bounds, (False, False))
        fields.append(LineField(comp, dom, fam, fam_smooth, tuple(winding)))
    # stable family labels: field 0 is the one with the smaller mean angle mod pi
    m0 = float(np.mean(np.mod(fields[0].grid_angles, np.pi)))
    m1 = float(np.mean(np.mod(fields[1].grid_angles, np.pi)))
    if m1 < m0:
        fields = [fields[1], fields[0]]
        fields[0].family, fields[1].family = 0, 1
    return tuple(fields)


# ---- CSV round-tripping ------------------------------------------------------


def metric_to_csv(metric, path_or_buf, shape=None):
    """Write a grid sampling of the metric as CSV blocks E, F, G."""
    shape = shape or metric.resolution
    sampled = metric.sampled(shape)
    x0, x1, y0, y1 = metric.domain.bounds
    px, py = metric.domain.periodic
    lines = [
        "# lorentzian-metric-grid",
        f"# domain,{x0:.17g},{x1:.17g},{y0:.17g},{y1:.17g}",
        f"# periodic,{int(px)},{int(py)}",
        f"# resolution,{shape[0]},{shape[1]}",
    ]
    for name, comp in zip(_COMPONENT_NAMES, sampled.components):
        lines.append(f"# block,{name}")
        for row in comp.values:
            lines.append(",".join(f"{v:.17g}" for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def metric_from_csv(path_or_buf):
    """Read a metric written by metric_to_csv."""
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf) as fh:
            text = fh.read()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "# lorentzian-metric-grid":
        raise DomainError("not a metric grid CSV (missing magic header)")
    header = {}
    blocks = {}
    current = None
    for ln in lines[1:]:
        if ln.startswith("#"):
            fields = [f.strip() for f in ln.lstrip("#").split(",")]
            if fields[0] == "block":
                current = fields[1]
                blocks[current] = []
            else:
                header[fields[0]] = fields[1:]
            continue
        if current is None:
            raise DomainError("data row before any block header in metric CSV")
        blocks[current].append([float(v) for v in ln.split(",")])
    try:
        x0, x1, y0, y1 = (float(v) for v in header["domain"])
        px, py = (bool(int(v)) for v in header["periodic"])
        nx, ny = (int(v) for v in header["resolution"])
    except KeyError as missing:
        raise DomainError(f"metric CSV header missing {missing}") from None
    domain = Domain((x0, x1, y0, y1), (px, py))
    arrays = []
    for name in _COMPONENT_NAMES:
        if name not in blocks:
            raise DomainError(f"metric CSV missing block {name}")
        arr = np.array(blocks[name], dtype=float)
        if arr.shape != (nx, ny):
            raise DomainError(
                f"block {name} has shape {arr.shape}, expected {(nx, ny)}"
            )
        arrays.append(arr)
    return MetricPatch.from_grids(*arrays, domain=domain, resolution=(nx, ny))


def metric_csv_string(metric, shape=None):
    buf = io.StringIO()
    metric_to_csv(metric, buf, shape)
    return buf.getvalue()
