"""Scalar fields on a rectangle, with derivatives.

Two interchangeable carriers for a metric component:

* :class:`ExprComponent` wraps a sympy expression and differentiates
  symbolically, evaluating through cached lambdified callables.
* :class:`GridComponent` stores samples on a uniform grid and
  differentiates numerically, spectrally along periodic axes and with
  sixth-order finite differences otherwise.  Point evaluation uses
  six-point barycentric Lagrange interpolation.

Both expose ``eval(x, y, dx_order, dy_order)`` so downstream geometry
code does not care which one it is handed.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from .errors import DomainError
from .expressions import X_SYMBOL, Y_SYMBOL, as_expression

_BARY_WEIGHTS = np.array([1.0, -5.0, 10.0, -10.0, 5.0, -1.0])


def fornberg_weights(z: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``z``.

    Classic recursion over arbitrary nodes.  Returns an array of shape
    ``(order + 1, len(nodes))`` whose row m holds the weights of the
    m-th derivative.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((order + 1, n))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - z
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _fd_matrix(n: int, h: float, order: int) -> np.ndarray:
    """Banded-stencil differentiation as a dense (n, n) matrix.

    Seven-point stencils give sixth-order accuracy for first and second
    derivatives; stencils shift one-sided near the boundary.
    """
    if n < 7:
        raise DomainError("need at least 7 samples per non-periodic axis")
    mat = np.zeros((n, n))
    for i in range(n):
        s = min(max(i - 3, 0), n - 7)
        nodes = np.arange(s, s + 7) * h
        w = fornberg_weights(i * h, nodes, order)[order]
        mat[i, s : s + 7] = w
    return mat


def _spectral_derivative(values: np.ndarray, axis: int, period: float, order: int) -> np.ndarray:
    n = values.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)
    if order % 2 == 0:
        mult = (1j * k) ** order
    else:
        # zero out the unpaired Nyquist mode for odd derivatives
        k = k.copy()
        if n % 2 == 0:
            k[n // 2] = 0.0
        mult = (1j * k) ** order
    shape = [1, 1]
    shape[axis] = n
    spec = np.fft.fft(values, axis=axis) * mult.reshape(shape)
    return np.real(np.fft.ifft(spec, axis=axis))


class GridComponent:
    """A scalar field sampled on a uniform grid over a rectangle.

    Parameters
    ----------
    values : ndarray, shape (nx, ny)
        Samples ``values[i, j] = f(x_i, y_j)``.
    bounds : tuple
        ``(x0, x1, y0, y1)``.  For a periodic axis the samples cover
        ``[x0, x1)`` and the period is ``x1 - x0``; otherwise both
        endpoints are sampled.
    periodic : tuple of bool
        Periodicity flags ``(periodic_x, periodic_y)``.
    """

    def __init__(self, values, bounds, periodic=(False, False)):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2:
            raise DomainError("grid values must be a 2d array")
        self.bounds = tuple(float(b) for b in bounds)
        self.periodic = (bool(periodic[0]), bool(periodic[1]))
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise DomainError("bounds must satisfy x1 > x0 and y1 > y0")
        nx, ny = self.values.shape
        self.h = (
            (x1 - x0) / (nx if self.periodic[0] else nx - 1),
            (y1 - y0) / (ny if self.periodic[1] else ny - 1),
        )
        self._deriv_cache: dict[tuple[int, int], np.ndarray] = {(0, 0): self.values}
        self._fd_cache: dict[tuple[int, int], np.ndarray] = {}

    @classmethod
    def sample(cls, func, bounds, shape, periodic=(False, False)) -> "GridComponent":
        """Sample a callable ``func(x, y)`` onto a new grid."""
        x0, x1, y0, y1 = bounds
        nx, ny = shape
        xs = x0 + np.arange(nx) * ((x1 - x0) / (nx if periodic[0] else nx - 1))
        ys = y0 + np.arange(ny) * ((y1 - y0) / (ny if periodic[1] else ny - 1))
        xg, yg = np.meshgrid(xs, ys, indexing="ij")
        vals = np.broadcast_to(np.asarray(func(xg, yg), dtype=float), xg.shape)
        return cls(vals.copy(), bounds, periodic)

    def axis_points(self, axis: int) -> np.ndarray:
        lo = self.bounds[0] if axis == 0 else self.bounds[2]
        return lo + np.arange(self.values.shape[axis]) * self.h[axis]

    def derivative_grid(self, dx_order: int, dy_order: int) -> np.ndarray:
        """Grid samples of the mixed partial of the stored field."""
        key = (dx_order, dy_order)
        if key in self._deriv_cache:
            return self._deriv_cache[key]
        x0, x1, y0, y1 = self.bounds
        grid = self.values
        if dx_order:
            if self.periodic[0]:
                grid = _spectral_derivative(grid, 0, x1 - x0, dx_order)
            else:
                grid = self._fd(0, dx_order) @ grid
        if dy_order:
            if self.periodic[1]:
                grid = _spectral_derivative(grid, 1, y1 - y0, dy_order)
            else:
                grid = grid @ self._fd(1, dy_order).T
        self._deriv_cache[key] = grid
        return grid

    def _fd(self, axis: int, order: int) -> np.ndarray:
        key = (axis, order)
        if key not in self._fd_cache:
            self._fd_cache[key] = _fd_matrix(self.values.shape[axis], self.h[axis], order)
        return self._fd_cache[key]

    def _stencil(self, q: np.ndarray, axis: int):
        """Six-point stencil starts and barycentric weights along one axis."""
        n = self.values.shape[axis]
        h = self.h[axis]
        lo = self.bounds[0] if axis == 0 else self.bounds[2]
        hi = self.bounds[1] if axis == 0 else self.bounds[3]
        q = np.asarray(q, dtype=float)
        if self.periodic[axis]:
            q = lo + np.mod(q - lo, hi - lo)
        else:
            eps = 1e-12 * (hi - lo)
            if np.any(q < lo - eps) or np.any(q > hi + eps):
                raise DomainError(
                    f"evaluation point outside axis-{axis} range [{lo}, {hi}]"
                )
            q = np.clip(q, lo, hi)
        t = (q - lo) / h
        if self.periodic[axis]:
            start = np.floor(t).astype(np.int64) - 2
        else:
            start = np.clip(np.floor(t).astype(np.int64) - 2, 0, max(n - 6, 0))
        u = t - start  # query in local stencil units, nodes at 0..5
        d = u[:, None] - np.arange(6)[None, :]
        exact = np.abs(d) < 1e-13
        with np.errstate(divide="ignore", invalid="ignore"):
            w = _BARY_WEIGHTS[None, :] / d
        hit = exact.any(axis=1)
        if np.any(hit):
            w[hit] = np.where(exact[hit], 1.0, 0.0)
        w = w / w.sum(axis=1)[:, None]
        idx = start[:, None] + np.arange(6)[None, :]
        idx = np.mod(idx, n) if self.periodic[axis] else np.clip(idx, 0, n - 1)
        return idx, w

    def eval(self, x, y, dx_order: int = 0, dy_order: int = 0):
        """Evaluate the (dx_order, dy_order) partial at points (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xb, yb = np.broadcast_arrays(x, y)
        shape = xb.shape
        xf, yf = xb.ravel(), yb.ravel()
        grid = self.derivative_grid(dx_order, dy_order)
        ix, wx = self._stencil(xf, 0)
        iy, wy = self._stencil(yf, 1)
        local = grid[ix[:, :, None], iy[:, None, :]]
        out = np.einsum("pi,pj,pij->p", wx, wy, local)
        if shape == ():
            return float(out[0])
        return out.reshape(shape)


class ExprComponent:
    """A scalar field given by a closed-form expression in x and y."""

    def __init__(self, expr):
        self.expr = as_expression(expr)
        extra = self.expr.free_symbols - {X_SYMBOL, Y_SYMBOL}
        if extra:
            raise DomainError(f"expression has unknown symbols {sorted(map(str, extra))}")
        self._func_cache: dict[tuple[int, int], object] = {}

    def derivative_expr(self, dx_order: int, dy_order: int) -> sp.Expr:
        return sp.diff(self.expr, X_SYMBOL, dx_order, Y_SYMBOL, dy_order)

    def _func(self, dx_order: int, dy_order: int):
        key = (dx_order, dy_order)
        if key not in self._func_cache:
            d = self.derivative_expr(dx_order, dy_order)
            # collapse numeric subtrees at high precision before code
            # generation: sums like p + q*sqrt(5) with huge p, q can
            # cancel to a tiny coefficient, and double arithmetic inside
            # the generated function would lose most of it
            d = d.evalf(30)
            self._func_cache[key] = sp.lambdify((X_SYMBOL, Y_SYMBOL), d, modules="numpy")
        return self._func_cache[key]

    def eval(self, x, y, dx_order: int = 0, dy_order: int = 0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        val = self._func(dx_order, dy_order)(x, y)
        out = np.broadcast_to(np.asarray(val, dtype=float), np.broadcast_shapes(x.shape, y.shape))
        if out.shape == ():
            return float(out)
        return out.copy()

    def sample(self, bounds, shape, periodic=(False, False)) -> GridComponent:
        """Sample this expression onto a grid carrier."""
        return GridComponent.sample(lambda xg, yg: self.eval(xg, yg), bounds, shape, periodic)


def as_component(value):
    """Coerce strings/sympy/numbers to ExprComponent, pass components through."""
    if isinstance(value, (ExprComponent, GridComponent)):
        return value
    return ExprComponent(as_expression(value))
