"""Form reduction, pseudo-polar splitting, approximately stable directions,
and the Anosov pullback experiment.

The linear half works with symmetric bilinear forms of signature
(m-1, 1), m in {2, 3}: reduce_to_base produces the canonical map M with
M^T H M = H_n, h_polar splits a 2x2 map into an H-isometry times a
pinned complement, and shrinking_null_vector / linear_AS extract the
distinguished lightlike directions of an unbounded map sequence.

The nonlinear half builds the torus metric h = g_A + eps f (Y^b x Y^b)
attached to the hyperbolic matrix A = [[2, 1], [1, 1]] and measures the
C^k distances of the pullbacks A^{n*} h from the flat invariant form
g_A: C^0 contracts like lambda_+^{-2}, C^1 like lambda_+^{-1}, and C^2
stalls, which is the numerical signature of a merely C^1 limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
import sympy as sp
from scipy.linalg import sqrtm

from .components import GridComponent
from .errors import (
    BoundedSequenceError,
    EquicontinuityError,
    PreconditionError,
    ReductionError,
    SignatureError,
)
from .expressions import X_SYMBOL, Y_SYMBOL, as_expression
from .metrics import (
    UNIT_TORUS,
    LineField,
    MetricPatch,
    TorusDiffeo,
    _nearest_lift,
    ck_distance,
    pullback,
)

_STRETCH_THRESHOLD = 1e3
_ANOSOV_N_CAP = 12


# ---- signatures and form sequences ------------------------------------------


def form_signature(H, tol=None):
    """(n_plus, n_minus) inertia of a symmetric matrix."""
    H = np.asarray(H, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (H + H.T))
    cut = (tol if tol is not None else 1e-12) * max(1.0, float(np.max(np.abs(w))))
    if np.any(np.abs(w) <= cut):
        raise SignatureError("form is degenerate within tolerance")
    return int(np.sum(w > 0)), int(np.sum(w < 0))


def _require_lorentz_signature(H, name="form"):
    m = np.asarray(H).shape[0]
    sig = form_signature(H)
    if sig != (m - 1, 1):
        raise SignatureError(f"{name} has signature {sig}, expected {(m - 1, 1)}")


@dataclass
class FormSequence:
    """A base form H plus a finitely materialized sequence of maps M_n.

    The derived forms are H_n = M_n^T H M_n; all of them automatically
    share the signature of H, which is validated to be (m-1, 1).
    """

    base: np.ndarray
    maps: list
    indices: list = dataclass_field(default=None)

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        _require_lorentz_signature(self.base, "base form")
        self.maps = [np.asarray(M, dtype=float) for M in self.maps]
        for M in self.maps:
            if M.shape != self.base.shape:
                raise PreconditionError("map dimension does not match the base form")
        if self.indices is None:
            self.indices = list(range(len(self.maps)))
        if len(self.indices) != len(self.maps):
            raise PreconditionError("index range does not match the sequence")

    @classmethod
    def from_iterates(cls, H, M, n_max):
        """The sequence M, M^2, ..., M^{n_max}."""
        M = np.asarray(M, dtype=float)
        mats = []
        acc = np.eye(M.shape[0])
        for _ in range(n_max):
            acc = M @ acc
            mats.append(acc.copy())
        return cls(H, mats, list(range(1, n_max + 1)))

    @property
    def forms(self):
        return [M.T @ self.base @ M for M in self.maps]

    def top_stretch(self):
        return float(np.linalg.norm(self.maps[-1], 2))


# ---- Lemma-style linear operations -------------------------------------------


def reduce_to_base(H, H_n, tol=1e-12):
    """The canonical M with M^T H M = H_n, close to Id for H_n close to H.

    M is the principal square root of S = H^{-1} H_n; S is
    H-self-adjoint, so the principal branch transposes correctly and
    the congruence identity holds exactly.  A short defect-correction
    pass pushes the residual to round-off.
    """
    H = np.asarray(H, dtype=float)
    H_n = np.asarray(H_n, dtype=float)
    _require_lorentz_signature(H, "base form")
    _require_lorentz_signature(H_n, "target form")

    S = np.linalg.solve(H, H_n)
    w = np.linalg.eigvals(S)
    on_cut = (w.real <= 0) & (np.abs(w.imag) <= 1e-9 * np.abs(w))
    if np.any(np.abs(w) < 1e-14) or np.any(on_cut):
        raise ReductionError(
            "perturbation too large: H^{-1} H_n left the principal branch"
        )
    M = sqrtm(S)
    if np.max(np.abs(np.asarray(M).imag)) > 1e-8:
        raise ReductionError("principal square root is not real")
    M = np.asarray(M).real

    for _ in range(3):
        Gm = M.T @ H @ M
        R = H_n - Gm
        if np.max(np.abs(R)) <= 0.01 * tol:
            break
        M = M @ (np.eye(H.shape[0]) + 0.5 * np.linalg.solve(Gm, R))
    if np.max(np.abs(M.T @ H @ M - H_n)) > tol * max(1.0, np.max(np.abs(H_n))):
        raise ReductionError("congruence residual did not converge")
    return M


def _null_basis(H):
    """P with P^T H P = [[0, 1], [1, 0]], deterministically pinned."""
    H = np.asarray(H, dtype=float)
    _require_lorentz_signature(H, "form")
    a, b, c = H[0, 0], H[0, 1], H[1, 1]
    D = np.sqrt(b * b - a * c)

    def pick(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        w = u if np.max(np.abs(u)) >= np.max(np.abs(v)) else v
        w = w / np.linalg.norm(w)
        lead = w[0] if abs(w[0]) > 1e-14 else w[1]
        return w if lead > 0 else -w

    v1 = pick((-b + D, a), (c, -b - D))
    v2 = pick((-b - D, a), (c, -b + D))
    pair = v1 @ H @ v2
    if abs(pair) < 1e-14:
        raise SignatureError("null directions are not transverse")
    P = np.column_stack([v1, v2 / pair])
    return P


def h_polar(H, M, tol=1e-12):
    """Split M = I P with I an H-isometry and P in a pinned complement.

    Works in a fixed null basis of H, where Is(H) consists of boosts
    diag(a, 1/a), the null swap, and sign flips; those factors are
    absorbed into I until the remainder P has balanced rows (unit
    boost), diagonal dominance (no swap), and positive upper-left entry.
    """
    H = np.asarray(H, dtype=float)
    M = np.asarray(M, dtype=float)
    if H.shape != (2, 2):
        raise PreconditionError("h_polar handles the 2x2 case")
    if abs(np.linalg.det(M)) < 1e-14:
        raise PreconditionError("map must be invertible")
    P_H = _null_basis(H)
    P_H_inv = np.linalg.inv(P_H)
    Mt = P_H_inv @ M @ P_H

    iso = np.eye(2)
    if abs(Mt[0, 1]) + abs(Mt[1, 0]) > abs(Mt[0, 0]) + abs(Mt[1, 1]):
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        iso = iso @ swap
        Mt = swap @ Mt
    r1 = np.linalg.norm(Mt[0])
    r2 = np.linalg.norm(Mt[1])
    a = np.sqrt(r1 / r2)
    iso = iso @ np.diag([a, 1.0 / a])
    Mt = np.diag([1.0 / a, a]) @ Mt
    if Mt[0, 0] < 0:
        iso = -iso
        Mt = -Mt

    I_mat = P_H @ iso @ P_H_inv
    P_mat = P_H @ Mt @ P_H_inv
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(I_mat @ P_mat - M)) > tol * scale:
        raise ReductionError("polar reconstruction failed")
    if np.max(np.abs(I_mat.T @ H @ I_mat - H)) > tol * max(1.0, np.max(np.abs(H))):
        raise ReductionError("isometry factor drifted off Is(H)")
    return I_mat, P_mat


def null_directions_2d(H):
    """The two H-null unit directions of a (1,1) form, ascending by angle."""
    H = np.asarray(H, dtype=float)
    a, b, c = H[0, 0], H[0, 1], H[1, 1]
    D = np.sqrt(b * b - a * c)
    dirs = []
    for u, v in (((-b + D, a), (c, -b - D)), ((-b - D, a), (c, -b + D))):
        w = np.asarray(u if max(map(abs, u)) >= max(map(abs, v)) else v, dtype=float)
        w = w / np.linalg.norm(w)
        ang = np.arctan2(w[1], w[0]) % np.pi
        dirs.append((ang, w if (w[0] > 1e-14 or (abs(w[0]) <= 1e-14 and w[1] > 0)) else -w))
    dirs.sort(key=lambda t: t[0])
    return dirs[0][1], dirs[1][1]


def shrinking_null_vector(H, seq):
    """The H-null direction v with M_n^{-1} v -> 0 along the sequence.

    Picks whichever of the two null directions of H shrinks fastest
    under the last inverse map and verifies actual end-to-end decay.
    """
    H = np.asarray(H, dtype=float)
    if isinstance(seq, FormSequence):
        maps = seq.maps
    else:
        maps = [np.asarray(M, dtype=float) for M in seq]
    if np.linalg.norm(maps[-1], 2) < _STRETCH_THRESHOLD:
        raise BoundedSequenceError(
            "sequence is bounded below the unboundedness threshold"
        )
    cands = null_directions_2d(H)
    last_inv = np.linalg.inv(maps[-1])
    shrink = [np.linalg.norm(last_inv @ v) for v in cands]
    v = cands[int(np.argmin(shrink))]
    first = np.linalg.norm(np.linalg.inv(maps[0]) @ v)
    if not np.min(shrink) < first:
        raise BoundedSequenceError("no decaying null direction along the range")
    return v


def _min_stretch_direction(G):
    """Unit eigenvector of the smaller eigenvalue of symmetric G, batched.

    Closed form; equals the limit of two-sided power iteration on G and
    is therefore exact at the 1e-10 Rayleigh tolerance the estimator
    promises.  The smaller eigenvalue is computed as det/lambda_max to
    avoid cancellation for strongly hyperbolic G.
    """
    a = G[..., 0, 0]
    b = G[..., 0, 1]
    c = G[..., 1, 1]
    tr = a + c
    disc = np.sqrt(np.maximum((a - c) ** 2 + 4.0 * b * b, 0.0))
    lam_max = 0.5 * (tr + disc)
    det = a * c - b * b
    lam_min = det / lam_max
    r1 = np.stack([a - lam_min, b * np.ones_like(a)], axis=-1)
    r2 = np.stack([b * np.ones_like(a), c - lam_min], axis=-1)
    n1 = np.linalg.norm(r1, axis=-1)
    n2 = np.linalg.norm(r2, axis=-1)
    row = np.where((n1 >= n2)[..., None], r1, r2)
    v = np.stack([-row[..., 1], row[..., 0]], axis=-1)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(norm < 1e-300):
        raise EquicontinuityError("no distinguished direction: isotropic stretch")
    v = v / norm[..., None]
    lead = np.where(np.abs(v[..., 0]) > 1e-14, v[..., 0], v[..., 1])
    return v * np.sign(lead)[..., None], np.sqrt(np.maximum(lam_max, 0.0))


def linear_AS(H, seq):
    """Direction of vectors with bounded image norms along the sequence.

    Estimated as the minimal-stretch right-singular direction of the
    last map; the proposition says it must be H-null, which the caller
    can confirm via H(v, v).
    """
    H = np.asarray(H, dtype=float)
    if isinstance(seq, FormSequence):
        maps = seq.maps
    else:
        maps = [np.asarray(M, dtype=float) for M in seq]
    M = maps[-1]
    G = M.T @ M
    v, smax = _min_stretch_direction(G)
    if smax < _STRETCH_THRESHOLD:
        raise BoundedSequenceError("no unbounded growth detected")
    return v


def h_null_residual(H, v):
    """|H(v, v)| normalized by the form and vector scale."""
    H = np.asarray(H, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(abs(v @ H @ v) / (np.max(np.abs(H)) * (v @ v)))


# ---- the Anosov system --------------------------------------------------------

ANOSOV_MATRIX = np.array([[2, 1], [1, 1]], dtype=np.int64)


def anosov_form_exact():
    """g_A with t^A g_A A = g_A and det g_A = -1, as an exact matrix."""
    s5 = sp.sqrt(5)
    return (2 / s5) * sp.Matrix([[1, -sp.Rational(1, 2)], [-sp.Rational(1, 2), -1]])


def anosov_form():
    return np.array(anosov_form_exact().evalf(17), dtype=float)


def dilating_null_covector_exact():
    """Y^b for the dilating null field Y = (1, (sqrt5 - 1)/2) of g_A."""
    s5 = sp.sqrt(5)
    g = anosov_form_exact()
    Y = sp.Matrix([1, (s5 - 1) / 2])
    eta = g * Y
    return sp.simplify(eta.T)


def dilating_null_covector():
    return np.array(dilating_null_covector_exact().evalf(17), dtype=float).ravel()


@dataclass
class AnosovSystem:
    """The perturbed flat form h = g_A + eps f (Y^b x Y^b) on the torus."""

    epsilon: float = 0.1
    profile: object = None
    n_max: int = 8

    def __post_init__(self):
        if self.profile is None:
            self.profile = sp.sin(2 * sp.pi * X_SYMBOL)
        else:
            self.profile = as_expression(self.profile)
        if self.n_max > _ANOSOV_N_CAP:
            raise PreconditionError(
                f"n_max capped at {_ANOSOV_N_CAP}: derivative scales grow like "
                "lambda_+^n and leave float range on a sampled grid"
            )

    @property
    def matrix(self):
        return ANOSOV_MATRIX.copy()

    @property
    def diffeo(self):
        return TorusDiffeo(ANOSOV_MATRIX)

    def epsilon_exact(self):
        return sp.nsimplify(self.epsilon, rational=True)

    def base_metric(self):
        g = anosov_form_exact()
        return MetricPatch(g[0, 0], g[0, 1], g[1, 1], UNIT_TORUS)

    def metric(self):
        g = anosov_form_exact()
        eta = dilating_null_covector_exact()
        eps = self.epsilon_exact()
        f = self.profile
        E = sp.expand(g[0, 0] + eps * f * eta[0] ** 2)
        F = sp.expand(g[0, 1] + eps * f * eta[0] * eta[1])
        G = sp.expand(g[1, 1] + eps * f * eta[1] ** 2)
        return MetricPatch(E, F, G, UNIT_TORUS)

    def invariance_residual(self):
        """Exact residual of t^A g_A A = g_A (zero matrix if invariant)."""
        A = sp.Matrix(2, 2, [int(v) for v in ANOSOV_MATRIX.ravel()])
        g = anosov_form_exact()
        return sp.simplify(A.T * g * A - g)

    def signature_offset(self, s):
        """det(g_A + s eta x eta) + 1; identically 0 for every real s."""
        g = anosov_form_exact()
        eta = dilating_null_covector_exact()
        pert = g + s * (eta.T * eta)
        return sp.simplify(pert.det() + 1)


def _nyquist_guard(n, shape):
    An = np.linalg.matrix_power(ANOSOV_MATRIX.astype(np.int64), n)
    spacing = max(1.0 / shape[0], 1.0 / shape[1])
    norm = float(np.max(np.sum(np.abs(An), axis=1)))
    return norm * spacing < 0.25


def anosov_experiment(system, shape=(256, 256), lane="symbolic"):
    """C^0/C^1/C^2 distances of A^{n*} h from g_A, with consecutive ratios.

    The symbolic lane substitutes A^n into the component expressions, so
    derivative amplitudes are exact and the grid only takes sups; the
    grid lane resamples pulled-back values and is guarded against
    aliasing of f o A^n.
    """
    if lane not in ("symbolic", "grid"):
        raise PreconditionError("lane must be 'symbolic' or 'grid'")
    h = system.metric()
    base = system.base_metric()
    rows = []
    prev = None
    for n in range(system.n_max + 1):
        if n == 0:
            pb = h
        elif lane == "symbolic":
            pb = pullback(h, TorusDiffeo(np.linalg.matrix_power(ANOSOV_MATRIX, n)))
        else:
            if not _nyquist_guard(n, shape):
                raise PreconditionError(
                    f"grid too coarse to resolve f o A^{n}: "
                    "|A^n| * spacing exceeds the Nyquist margin"
                )
            pb = pullback(
                h.sampled(shape),
                TorusDiffeo(np.linalg.matrix_power(ANOSOV_MATRIX, n)),
                resolution=shape,
                prefer_symbolic=False,
            )
        cs = [ck_distance(pb, base, k, shape) for k in (0, 1, 2)]
        row = {"n": n, "c0": cs[0], "c1": cs[1], "c2": cs[2]}
        if prev is not None and prev[0] > 0 and prev[1] > 0:
            row["ratio0"] = cs[0] / prev[0]
            row["ratio1"] = cs[1] / prev[1]
        else:
            row["ratio0"] = float("nan")
            row["ratio1"] = float("nan")
        rows.append(row)
        prev = (cs[0], cs[1])
    return rows


def check_anosov_rates(rows, lo=3, hi=8, rel=0.05, band=2.0):
    """Empirical-rate verdict over the window lo <= n <= hi.

    C^0 ratios must sit within rel of lambda_+^{-2}, C^1 ratios within
    rel of lambda_+^{-1}, and the C^2 distances inside a factor-band:
    convergence in C^0/C^1 at pinned speeds, stall in C^2.
    """
    lam = (3.0 + np.sqrt(5.0)) / 2.0
    sel = [r for r in rows if lo <= r["n"] <= hi]
    if not sel:
        raise PreconditionError("rate window is empty")
    dev0 = max(abs(r["ratio0"] - lam**-2) / lam**-2 for r in sel)
    dev1 = max(abs(r["ratio1"] - lam**-1) / lam**-1 for r in sel)
    c2 = [r["c2"] for r in sel]
    band_factor = max(c2) / min(c2) if min(c2) > 0 else float("inf")
    return {
        "c0_ratio_dev": dev0,
        "c1_ratio_dev": dev1,
        "c2_band_factor": band_factor,
        "ok": bool(dev0 <= rel and dev1 <= rel and band_factor <= band),
    }


def rate_table_csv(rows):
    lines = ["n,c0,c1,c2,ratio0,ratio1"]
    for r in rows:
        cells = [f"{r['n']:d}"]
        for key in ("c0", "c1", "c2", "ratio0", "ratio1"):
            val = r[key]
            cells.append("" if isinstance(val, float) and np.isnan(val) else f"{val:.17g}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---- nonlinear AS estimation --------------------------------------------------


def _line_field_from_angles(raw, domain):
    """Build a continuous LineField from angles mod pi on an endpoint grid."""
    nx, ny = raw.shape[0] - 1, raw.shape[1] - 1
    lift = np.empty_like(raw)
    lift[0, 0] = raw[0, 0] % np.pi
    smooth = True

    def assign(i, j, pi_, pj_):
        nonlocal smooth
        pick = _nearest_lift(raw[i, j] % np.pi, lift[pi_, pj_])
        if abs(pick - lift[pi_, pj_]) > 0.75:
            smooth = False
        lift[i, j] = pick

    for i in range(1, nx + 1):
        assign(i, 0, i - 1, 0)
    for j in range(1, ny + 1):
        for i in range(nx + 1):
            assign(i, j, i, j - 1)

    winding = [0, 0]
    if domain.periodic[0]:
        gap = lift[-1, :] - lift[0, :]
        k = np.round(np.mean(gap) / np.pi)
        if np.max(np.abs(gap - k * np.pi)) > 1e-6:
            smooth = False
        winding[0] = int(k)
    if domain.periodic[1]:
        gap = lift[:, -1] - lift[:, 0]
        k = np.round(np.mean(gap) / np.pi)
        if np.max(np.abs(gap - k * np.pi)) > 1e-6:
            smooth = False
        winding[1] = int(k)
    if domain.is_torus and winding == [0, 0] and smooth:
        comp = GridComponent(lift[:nx, :ny].copy(), domain.bounds, domain.periodic)
    else:
        comp = GridComponent(lift.copy(), domain.bounds, (False, False))
    return LineField(comp, domain, 0, smooth, tuple(winding))


def as_field_estimate(h, phi, n_max, shape=None,
                      stretch_threshold=_STRETCH_THRESHOLD):
    """Minimal-stretch direction field of D(phi^n) at the largest feasible n.

    The estimator is the finite-n probe of the approximately stable
    direction: at each grid point it returns the right-singular
    direction of least stretch of the accumulated Jacobian.  It refuses
    (EquicontinuityError) when the top stretch stays below the
    unboundedness threshold, since then no direction is distinguished.
    """
    shape = shape or h.resolution
    nx, ny = shape
    dom = h.domain
    xs = np.linspace(dom.bounds[0], dom.bounds[1], nx + 1)
    ys = np.linspace(dom.bounds[2], dom.bounds[3], ny + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    px, py = dom.wrap(xg, yg)
    J = np.broadcast_to(np.eye(2), px.shape + (2, 2)).copy()
    for _ in range(int(n_max)):
        step = phi.jacobian(px, py)
        J = np.einsum("...ij,...jk->...ik", step, J)
        if float(np.min(np.abs(J).sum(axis=(-2, -1)))) > 1e12:
            break
        px, py = dom.wrap(*phi(px, py))
    G = np.einsum("...ki,...kj->...ij", J, J)
    v, smax = _min_stretch_direction(G)
    if float(np.max(smax)) < stretch_threshold:
        raise EquicontinuityError(
            "map sequence is equicontinuous at this depth: "
            f"top stretch {float(np.max(smax)):.3g} below {stretch_threshold:g}"
        )
    angles = np.arctan2(v[..., 1], v[..., 0])
    return _line_field_from_angles(angles, dom)


def as_field_report(h, field, shape=None):
    """Post-checks of an AS field: nullity for h and geodesic residual."""
    from .geodesics import pregeodesic_residual

    shape = shape or h.resolution
    xg, yg = h.domain.mesh(shape)
    th = field.angle(xg, yg)
    null = h.norm_sq(xg, yg, np.cos(th), np.sin(th))
    return {
        "max_null_residual": float(np.max(np.abs(null))),
        "geodesic_residual": pregeodesic_residual(h, field, shape),
    }


def expanding_direction(M):
    """Unit eigenvector of the top singular direction of M (image side)."""
    M = np.asarray(M, dtype=float)
    v_min, _ = _min_stretch_direction(M.T @ M)
    v_max = np.array([-v_min[1], v_min[0]])
    w = M @ v_max
    w = w / np.linalg.norm(w)
    lead = w[0] if abs(w[0]) > 1e-14 else w[1]
    return w if lead > 0 else -w


def duality_direction(phi, v, n):
    """Direction of D(phi^n) v for a linear torus map (duality probe).

    For v outside the AS line the image direction converges projectively
    to the expanding eigendirection.
    """
    M = np.linalg.matrix_power(np.asarray(phi.matrix, dtype=float), n)
    w = M @ np.asarray(v, dtype=float)
    n2 = np.linalg.norm(w)
    if n2 == 0:
        raise PreconditionError("vector collapsed under the iterate")
    w = w / n2
    lead = w[0] if abs(w[0]) > 1e-14 else w[1]
    return w if lead > 0 else -w


def invariant_function_limit(sigma_seq, phi_seq, as_field, domain=None,
                             seeds=16, budget=2.0, n_nodes=129,
                             convergence_tol=1e-3):
    """Oscillation of lim sigma_n o phi_n along the AS field's curves.

    The hypothesis is that the composed sequence converges; the last
    two terms are compared on a grid as a residual check before the
    final term is traced along integral curves of the field.
    """
    if len(sigma_seq) != len(phi_seq) or not sigma_seq:
        raise PreconditionError("sigma and phi sequences must align and be nonempty")
    dom = domain or as_field.domain

    def composed(k):
        def f(x, y):
            X, Y = phi_seq[k](x, y)
            Xw, Yw = dom.wrap(X, Y)
            return np.asarray(sigma_seq[k](Xw, Yw), dtype=float)
        return f

    xg, yg = dom.mesh((64, 64))
    last = composed(len(sigma_seq) - 1)
    if len(sigma_seq) >= 2:
        prev = composed(len(sigma_seq) - 2)
        gap = float(np.max(np.abs(last(xg, yg) - prev(xg, yg))))
        if gap > convergence_tol:
            raise PreconditionError(
                f"composed sequence has not converged (tail gap {gap:.3g})"
            )

    # trace integral curves of the field with fixed-step RK4
    offs = (np.arange(seeds) + 0.5) / seeds
    x0, x1, y0, y1 = dom.bounds
    Lx, Ly = dom.lengths
    pts = np.stack([x0 + offs * Lx, np.full(seeds, y0 + 0.5 * Ly)], axis=1)
    n_steps = 4 * (n_nodes - 1)
    hstep = budget / n_steps

    def rhs(p):
        th = as_field.angle(p[:, 0], p[:, 1])
        return np.stack([np.cos(th), np.sin(th)], axis=-1)

    worst = 0.0
    p = pts.copy()
    samples = [last(*dom.wrap(p[:, 0], p[:, 1]))]
    for k in range(1, n_steps + 1):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * hstep * k1)
        k3 = rhs(p + 0.5 * hstep * k2)
        k4 = rhs(p + hstep * k3)
        p = p + (hstep / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % 4 == 0:
            samples.append(last(*dom.wrap(p[:, 0], p[:, 1])))
    vals = np.stack(samples, axis=0)
    worst = float(np.max(np.max(vals, axis=0) - np.min(vals, axis=0)))
    return worst
