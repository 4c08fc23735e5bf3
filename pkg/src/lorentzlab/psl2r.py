"""Isometry classification of left-invariant Lorentzian metrics in 3D.

A left-invariant metric on the unit-tangent group of the hyperbolic
plane is a symmetric matrix H on the Lie algebra, written in a fixed
basis where the Killing form is K = [[0,1,0],[1,0,0],[0,0,1]].  The
eigenstructure of the structure operator N = H K decides how large the
isometry group is:

* three distinct eigenvalues: the full group times a two-element
  factor ("FullTimesZ2");
* two distinct eigenvalues with the repeated one defective, or a
  single defective eigenvalue of geometric multiplicity one: left
  translations only ("LeftOnly");
* H proportional to K: the bi-invariant constant-curvature case
  ("Biinvariant");
* a diagonalizable repeated eigenvalue with H not proportional to K
  falls outside the classification and is reported "Unclassified"
  rather than guessed.

The verdict map is discontinuous: `sequence_experiment` exhibits a
family H_n -> H_infty whose verdict jumps from FullTimesZ2 to LeftOnly
in the limit, even though the distance decays like 2/n.  In the
defective case the repeated eigenvalue singles out a plane that is
lightlike for H and K simultaneously; `common_lightlike_plane`
recovers it.

Float verdicts use relative eigengap and rank tolerances that are
echoed into every report; rational inputs can be classified exactly
through the characteristic polynomial.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg
import sympy as sp

from .errors import PreconditionError, SignatureError

__all__ = [
    "IsometryVerdict",
    "LeftInvariantMetric",
    "StructureOperator",
    "ClassificationReport",
    "LightlikePlane",
    "killing_matrix",
    "killing_matrix_exact",
    "sequence_metric",
    "parse_metric_text",
    "structure_operator",
    "classify",
    "common_lightlike_plane",
    "sequence_experiment",
    "verdict_table_json",
]

EIGENGAP_RTOL = 1e-8
RANK_RTOL = 1e-8
PLANE_TOL = 1e-10


def killing_matrix():
    """Matrix of the Killing form in the fixed basis.

    Involutive (K @ K = Id), determinant -1, signature (2, 1).
    """
    return np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


def killing_matrix_exact():
    return sp.Matrix([[0, 1, 0], [1, 0, 0], [0, 0, 1]])


class IsometryVerdict(str, enum.Enum):
    """Possible isometry-group types of a left-invariant metric."""

    FULL_TIMES_Z2 = "FullTimesZ2"
    LEFT_ONLY = "LeftOnly"
    BIINVARIANT = "Biinvariant"
    UNCLASSIFIED = "Unclassified"


def _as_exact(value):
    """Sympy rational for ints, Fractions and exact binary floats."""
    if isinstance(value, (int, np.integer)):
        return sp.Integer(int(value))
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, (float, np.floating)):
        f = Fraction(float(value))
        return sp.Rational(f.numerator, f.denominator)
    raise PreconditionError(f"entry {value!r} has no exact rational form")


@dataclass
class LeftInvariantMetric:
    """Symmetric 3x3 matrix of a left-invariant metric.

    Parameters
    ----------
    matrix : (3, 3) array_like
        Symmetric to 1e-12 relative; symmetrized on storage.
    exact : sympy.Matrix, optional
        Rational entries enabling the exact classification lane.
    """

    matrix: np.ndarray
    exact: sp.Matrix | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise PreconditionError("metric matrix must be 3x3")
        if not np.all(np.isfinite(m)):
            raise PreconditionError("metric matrix must be finite")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise PreconditionError("metric matrix must be symmetric")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        if self.exact is not None and self.exact.shape != (3, 3):
            raise PreconditionError("exact matrix must be 3x3")

    @classmethod
    def from_rows(cls, rows):
        """Metric from nested entries, keeping an exact rational copy."""
        exact = sp.Matrix([[_as_exact(v) for v in row] for row in rows])
        if exact != exact.T:
            raise PreconditionError("metric matrix must be symmetric")
        return cls(np.array(rows, dtype=float), exact)


def parse_metric_text(text):
    """Metric from nine row-major numbers separated by blanks or commas.

    Entries may be integers, decimals or fractions like ``3/7``; the
    exact lane stays available for all of these.
    """
    tokens = text.replace(",", " ").split()
    if len(tokens) != 9:
        raise PreconditionError(
            f"expected 9 row-major entries, got {len(tokens)}")
    try:
        values = [Fraction(tok) for tok in tokens]
    except (ValueError, ZeroDivisionError) as exc:
        raise PreconditionError(f"unreadable matrix entry: {exc}") from None
    rows = [values[0:3], values[3:6], values[6:9]]
    return LeftInvariantMetric.from_rows(rows)


def sequence_metric(alpha, gamma, delta, n=None):
    """Member H_n of the convergent family, or its limit for n=None.

    H_n = [[0, a, 1/n], [a, 0, g], [1/n, g, d]]; the limit replaces
    1/n by 0.  Exact entries are attached when the parameters admit
    them.
    """
    if not (alpha > 0 and gamma > 0 and delta > 0):
        raise PreconditionError("family parameters must be positive")
    inv = 0.0 if n is None else 1.0 / float(n)
    m = np.array([[0.0, alpha, inv], [alpha, 0.0, gamma], [inv, gamma, delta]],
                 dtype=float)
    try:
        a, g, d = _as_exact(alpha), _as_exact(gamma), _as_exact(delta)
        i = sp.Integer(0) if n is None else sp.Rational(1, int(n))
        exact = sp.Matrix([[0, a, i], [a, 0, g], [i, g, d]])
    except PreconditionError:
        exact = None
    return LeftInvariantMetric(m, exact)


def _metric_matrix(metric):
    if isinstance(metric, LeftInvariantMetric):
        return metric.matrix
    return LeftInvariantMetric(np.asarray(metric, dtype=float)).matrix


def _sylvester_signature(H, tol=1e-12):
    """Inertia of a symmetric matrix from pivoted LDL factorization.

    Counts signs of the block-diagonal factor; a pivot block with an
    eigenvalue below ``tol`` times the matrix scale means the form is
    too close to degenerate to sign.
    """
    scale = max(1.0, float(np.abs(H).max()))
    _, d, _ = scipy.linalg.ldl(H)
    pos = neg = 0
    i, k = 0, H.shape[0]
    while i < k:
        if i + 1 < k and abs(d[i, i + 1]) > tol * scale:
            block = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
            pivots = list(block)
            i += 2
        else:
            pivots = [d[i, i]]
            i += 1
        for p in pivots:
            if abs(p) <= tol * scale:
                raise SignatureError("degenerate symmetric form")
            pos += p > 0
            neg += p < 0
    return pos, neg


def _exact_signature(M):
    """Inertia of a rational symmetric matrix via root sign counts."""
    t = sp.Symbol("t")
    p = M.charpoly(t).as_expr()
    if sp.simplify(p.subs(t, 0)) == 0:
        raise SignatureError("degenerate symmetric form")

    def variations(poly):
        signs = [sp.sign(c) for c in sp.Poly(poly, t).all_coeffs() if c != 0]
        return sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0)

    pos = variations(p)
    neg = variations(p.subs(t, -t))
    return pos, neg


@dataclass
class StructureOperator:
    """Eigen and Jordan data of N = H K.

    ``clusters`` lists (eigenvalue, algebraic multiplicity, geometric
    multiplicity) with eigenvalues merged at the relative gap
    tolerance; ``selfadjoint_residual`` is the defect of K-self-
    adjointness K N^T K = N, which vanishes identically for symmetric
    H.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    clusters: tuple
    selfadjoint_residual: float
    eigengap_tol: float
    rank_tol: float

    @property
    def distinct_count(self):
        return len(self.clusters)

    @property
    def is_diagonalizable(self):
        return all(alg == geo for _, alg, geo in self.clusters)


def _cluster_eigenvalues(w, tol):
    """Greedy merge of eigenvalues closer than ``tol`` in the plane."""
    order = np.lexsort((w.imag, w.real))
    groups = []
    for idx in order:
        val = w[idx]
        for g in groups:
            if abs(val - g[0] / g[1]) <= tol:
                g[0] += val
                g[1] += 1
                break
        else:
            groups.append([val, 1])
    return [(g[0] / g[1], g[1]) for g in groups]


def structure_operator(metric, eigengap_tol=EIGENGAP_RTOL, rank_tol=RANK_RTOL):
    """Structure operator N = H K with clustered eigenvalue data.

    Raises
    ------
    SignatureError
        If H is numerically degenerate (the operator would not
        determine a classification).
    """
    H = _metric_matrix(metric)
    K = killing_matrix()
    scale = max(1.0, float(np.abs(H).max()))
    if abs(np.linalg.det(H)) <= 1e-12 * scale ** 3:
        raise SignatureError("metric matrix is degenerate")
    return _operator_data(H, eigengap_tol, rank_tol)


def _operator_data(H, eigengap_tol, rank_tol):
    K = killing_matrix()
    N = H @ K
    w = np.linalg.eigvals(N)
    lam_scale = max(1.0, float(np.abs(w).max()))
    tol = eigengap_tol * lam_scale
    op_norm = max(1.0, float(np.linalg.norm(N, 2)))
    clusters = []
    for val, alg in _cluster_eigenvalues(w, tol):
        sv = np.linalg.svd(N - val * np.eye(3), compute_uv=False)
        geo = int(np.sum(sv <= rank_tol * op_norm))
        clusters.append((complex(val), alg, max(1, geo)))
    residual = float(np.abs(K @ N.T @ K - N).max())
    return StructureOperator(
        matrix=N,
        eigenvalues=w,
        clusters=tuple(clusters),
        selfadjoint_residual=residual,
        eigengap_tol=eigengap_tol,
        rank_tol=rank_tol,
    )


@dataclass
class ClassificationReport:
    """Verdict with the eigen data and tolerances that produced it."""

    verdict: IsometryVerdict
    eigenvalues: tuple
    clusters: tuple
    eigengap: float
    lane: str
    eigengap_tol: float
    rank_tol: float

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "eigenvalues": [_json_number(v) for v in self.eigenvalues],
            "multiplicities": [[_json_number(v), a, g]
                               for v, a, g in self.clusters],
            "eigengap": self.eigengap,
            "lane": self.lane,
            "eigengap_tol": self.eigengap_tol,
            "rank_tol": self.rank_tol,
        }


def _json_number(v):
    v = complex(v)
    if abs(v.imag) <= 1e-12 * max(1.0, abs(v)):
        return float(v.real)
    return {"re": float(v.real), "im": float(v.imag)}


def _min_gap(values):
    vals = [complex(v) for v in values]
    if len(vals) < 2:
        return math.inf
    return min(abs(a - b) for i, a in enumerate(vals) for b in vals[i + 1:])


def _verdict_from_operator(op):
    """Eigenstructure part of the classification, no signature gate."""
    N = op.matrix
    c = np.trace(N) / 3.0
    if np.abs(N - c * np.eye(3)).max() <= op.eigengap_tol * max(
            1.0, float(np.abs(N).max())):
        return IsometryVerdict.BIINVARIANT
    if op.distinct_count == 3:
        return IsometryVerdict.FULL_TIMES_Z2
    repeated = max(op.clusters, key=lambda cl: cl[1])
    if repeated[2] == 1:
        return IsometryVerdict.LEFT_ONLY
    return IsometryVerdict.UNCLASSIFIED


def classify(metric, eigengap_tol=EIGENGAP_RTOL, rank_tol=RANK_RTOL,
             lane="float"):
    """Isometry-group verdict for a Lorentzian left-invariant metric.

    Parameters
    ----------
    metric : LeftInvariantMetric or (3, 3) array_like
    lane : {"float", "exact"}
        The exact lane requires rational entries and decides eigenvalue
        coincidence and defectiveness symbolically.

    Raises
    ------
    SignatureError
        If the signature of H is not (2, 1).

    Notes
    -----
    The verdict is scale invariant: positive multiples of H rescale N
    and the relative eigengap together.
    """
    if lane == "exact":
        return _classify_exact(metric, eigengap_tol, rank_tol)
    if lane != "float":
        raise PreconditionError(f"unknown classification lane {lane!r}")
    H = _metric_matrix(metric)
    if _sylvester_signature(H) != (2, 1):
        raise SignatureError("metric is not Lorentzian of signature (2,1)")
    op = _operator_data(H, eigengap_tol, rank_tol)
    return ClassificationReport(
        verdict=_verdict_from_operator(op),
        eigenvalues=tuple(sorted(op.eigenvalues,
                                 key=lambda v: (v.real, v.imag))),
        clusters=op.clusters,
        eigengap=_min_gap([cl[0] for cl in op.clusters]),
        lane="float",
        eigengap_tol=eigengap_tol,
        rank_tol=rank_tol,
    )


def _classify_exact(metric, eigengap_tol, rank_tol):
    if not isinstance(metric, LeftInvariantMetric) or metric.exact is None:
        raise PreconditionError("exact lane requires rational entries")
    Hx = metric.exact
    if _exact_signature(Hx) != (2, 1):
        raise SignatureError("metric is not Lorentzian of signature (2,1)")
    Nx = Hx * killing_matrix_exact()
    t = sp.Symbol("t")
    p = sp.Poly(Nx.charpoly(t).as_expr(), t)
    squarefree = p.div(sp.gcd(p, p.diff(t)))[0]
    distinct = squarefree.degree()
    cval = Nx[0, 0]
    if Nx == cval * sp.eye(3):
        verdict = IsometryVerdict.BIINVARIANT
    elif distinct == 3:
        verdict = IsometryVerdict.FULL_TIMES_Z2
    else:
        # a repeated root of a rational cubic is rational: it is the
        # root of the (linear or squared-linear) gcd with the derivative
        repeated = next(iter(sp.roots(sp.gcd(p, p.diff(t)).as_expr(), t)))
        geo = 3 - (Nx - repeated * sp.eye(3)).rank()
        verdict = (IsometryVerdict.LEFT_ONLY if geo == 1
                   else IsometryVerdict.UNCLASSIFIED)
    eig = []
    clusters = []
    for root, mult in sp.roots(p.as_expr(), t).items():
        val = complex(root.evalf(20))
        geo = 3 - (Nx - root * sp.eye(3)).rank()
        clusters.append((val, int(mult), int(geo)))
        eig.extend([val] * int(mult))
    return ClassificationReport(
        verdict=verdict,
        eigenvalues=tuple(sorted(eig, key=lambda v: (v.real, v.imag))),
        clusters=tuple(clusters),
        eigengap=_min_gap([cl[0] for cl in clusters]),
        lane="exact",
        eigengap_tol=eigengap_tol,
        rank_tol=rank_tol,
    )


@dataclass
class LightlikePlane:
    """Plane on which both the metric and the Killing form degenerate.

    ``normal`` is the defining covector (the plane is its kernel),
    ``basis`` holds two spanning columns, and the residuals are the
    smallest singular values of the restricted Gram matrices.
    """

    normal: np.ndarray
    basis: np.ndarray
    eigenvalue: float
    metric_residual: float
    killing_residual: float


def common_lightlike_plane(metric, tol=PLANE_TOL):
    """The plane shared by a LeftOnly metric and the Killing form.

    The defective eigenvalue of the transposed structure operator has a
    one-dimensional kernel; the plane is the K-orthogonal complement of
    that direction.  Returns None if the candidate plane fails the
    degeneracy verification, which does not happen for genuinely
    defective inputs.

    Raises
    ------
    PreconditionError
        If the metric does not classify as LeftOnly.
    """
    report = classify(metric)
    if report.verdict is not IsometryVerdict.LEFT_ONLY:
        raise PreconditionError(
            f"common lightlike plane needs a LeftOnly metric, "
            f"got {report.verdict.value}")
    H = _metric_matrix(metric)
    K = killing_matrix()
    lam, _, _ = max(report.clusters, key=lambda cl: cl[1])
    lam = float(np.real(lam))
    M = K @ H - lam * np.eye(3)
    _, sv, vt = np.linalg.svd(M)
    defect = vt[-1]
    normal = K @ defect
    normal = normal / np.linalg.norm(normal)
    # spanning pair: the two right singular directions of the normal's
    # annihilator
    _, _, vt2 = np.linalg.svd(normal.reshape(1, 3))
    basis = vt2[1:].T
    res = []
    for form in (H, K):
        gram = basis.T @ form @ basis
        res.append(float(np.min(np.abs(np.linalg.eigvalsh(gram)))))
    scale = max(1.0, float(np.abs(H).max()))
    if res[0] > tol * scale or res[1] > tol:
        return None
    return LightlikePlane(
        normal=normal,
        basis=basis,
        eigenvalue=lam,
        metric_residual=res[0],
        killing_residual=res[1],
    )


def sequence_experiment(alpha, gamma, delta, n_range):
    """Verdict table of the family H_n and its limit H_infty.

    Each row reports the eigenvalues of N = H_n K, the eigenstructure
    verdict, the distance sum(|H_n - H_infty|) over all nine entries
    (exactly 2/n for this family) and the smallest eigenvalue gap.
    Rows whose matrix is signature-degenerate are still reported, with
    ``lorentzian`` set to False; `classify` proper refuses those.  The
    verdict jumps at the limit: the family is FullTimesZ2 for every n
    while H_infty is LeftOnly, so no neighborhood of the limit shares
    its verdict.
    """
    if not (alpha > 0 and gamma > 0 and delta > 0):
        raise PreconditionError("family parameters must be positive")
    limit = sequence_metric(alpha, gamma, delta, None)
    rows = []
    for n in n_range:
        n = int(n)
        if n < 1:
            raise PreconditionError("family index must be positive")
        member = sequence_metric(alpha, gamma, delta, n)
        op = _operator_data(member.matrix, EIGENGAP_RTOL, RANK_RTOL)
        try:
            lorentzian = _sylvester_signature(member.matrix) == (2, 1)
        except SignatureError:
            lorentzian = False
        rows.append({
            "n": n,
            "eigenvalues": sorted(
                _json_number(v) for v in op.eigenvalues
                if not isinstance(_json_number(v), dict)),
            "verdict": _verdict_from_operator(op).value,
            "distance": float(np.abs(member.matrix - limit.matrix).sum()),
            "eigengap": _min_gap([cl[0] for cl in op.clusters]),
            "lorentzian": lorentzian,
        })
    op_inf = _operator_data(limit.matrix, EIGENGAP_RTOL, RANK_RTOL)
    table = {
        "alpha": float(alpha),
        "gamma": float(gamma),
        "delta": float(delta),
        "rows": rows,
        "limit": {
            "eigenvalues": sorted(
                _json_number(v) for v in op_inf.eigenvalues
                if not isinstance(_json_number(v), dict)),
            "verdict": _verdict_from_operator(op_inf).value,
            "distance": 0.0,
            "eigengap": _min_gap([cl[0] for cl in op_inf.clusters]),
            "lorentzian": _sylvester_signature(limit.matrix) == (2, 1),
        },
    }
    return table


def verdict_table_json(table):
    """Stable JSON rendering of a sequence_experiment table."""
    return json.dumps(table, indent=2, sort_keys=True)
