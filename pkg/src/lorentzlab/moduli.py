"""Flat volume-1 Lorentzian tori as signature (1,1) quadratic forms.

A flat torus is represented by its constant metric form Q with
det Q = -1 after normalization; the mapping-class action is by integer
congruence Q -> M^T Q M.  The two lightlike slopes of Q locate the form
on the boundary circle, the associated hyperbolic geodesic with those
ideal endpoints descends to the modular surface, and orbit statistics
of random words in S and T probe whether the congruence orbit closes up
(rational slopes), returns exactly (quadratic irrationalities fixed by
a hyperbolic matrix), or equidistributes (generic slopes).

Slope convention: a direction (u, v) has slope v/u, so the slopes solve
c t^2 + 2 b t + a = 0; geodesic endpoints use the reciprocal chart u/v,
on which T acts as a unit shift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .errors import PreconditionError, SignatureError, TracingError

GEN_S = np.array([[0, -1], [1, 0]], dtype=np.int64)
GEN_T = np.array([[1, 1], [0, 1]], dtype=np.int64)

_GEN = {
    "S": ((0, -1), (1, 0)),
    "s": ((0, 1), (-1, 0)),
    "T": ((1, 1), (0, 1)),
    "t": ((1, -1), (0, 1)),
}
_INVERSE = {"S": "s", "s": "S", "T": "t", "t": "T"}

RATIONAL_DENOMINATOR_CAP = 10**6


@dataclass
class QuadraticForm2:
    """A signature (1,1) quadratic form on the plane."""

    matrix: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.matrix, dtype=float)
        if Q.shape != (2, 2):
            raise PreconditionError("form must be a 2x2 matrix")
        if abs(Q[0, 1] - Q[1, 0]) > 1e-12 * max(1.0, np.max(np.abs(Q))):
            raise PreconditionError("form must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if np.linalg.det(Q) >= 0:
            raise SignatureError("form must have negative determinant")
        self.matrix = Q

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))

    @property
    def is_normalized(self):
        return abs(self.det + 1.0) <= 1e-12

    def normalized(self):
        """The same null lines with det scaled to -1."""
        return QuadraticForm2(self.matrix / math.sqrt(-self.det))

    def __call__(self, u, v):
        w = np.stack([np.asarray(u, dtype=float), np.asarray(v, dtype=float)], axis=-1)
        return np.einsum("...i,ij,...j->...", w, self.matrix, w)


def anosov_fixed_form():
    """The normalized form congruence-fixed by [[2,1],[1,1]]."""
    from .approx import anosov_form

    return QuadraticForm2(anosov_form())


def act(M, Q):
    """Congruence image M^T Q M under a unimodular integer matrix."""
    M = np.asarray(M)
    if M.shape != (2, 2):
        raise PreconditionError("expected a 2x2 matrix")
    if np.max(np.abs(M - np.round(M))) > 1e-9:
        raise PreconditionError("action matrix must have integer entries")
    M = np.round(M).astype(np.int64)
    if abs(int(round(float(np.linalg.det(M.astype(float)))))) != 1:
        raise PreconditionError("action matrix must be unimodular")
    return QuadraticForm2(M.astype(float).T @ Q.matrix @ M.astype(float))


# ---- words in the generators --------------------------------------------------


def is_reduced_word(word):
    return all(_INVERSE[a] != b for a, b in zip(word, word[1:]))


def word_matrix(word):
    """Integer matrix of a word over S, T with lowercase inverses."""
    a, b, c, d = 1, 0, 0, 1
    for ch in word:
        if ch not in _GEN:
            raise PreconditionError(f"unknown generator {ch!r}; use S, T, s, t")
        (p, q), (r, s_) = _GEN[ch]
        a, b, c, d = a * p + b * r, a * q + b * s_, c * p + d * r, c * q + d * s_
    return np.array([[a, b], [c, d]], dtype=np.int64)


def word_matrix_exact(word):
    return sp.Matrix(2, 2, [int(v) for v in word_matrix(word).ravel()])


ANOSOV_STABILIZER_WORD = "TSts"


def congruence_residual_exact(word, Q):
    """M^T Q M - Q for a sympy form, simplified (exact arithmetic lane)."""
    M = word_matrix_exact(word)
    return sp.simplify(M.T * sp.Matrix(Q) * M - sp.Matrix(Q))


# ---- slopes and rationality certificates --------------------------------------


def continued_fraction(x, cap=RATIONAL_DENOMINATOR_CAP, tol=1e-14, max_terms=64):
    """CF prefix of x with convergents, stopping at a rational hit or the cap.

    Returns dict with terms, best convergent (p, q), and whether the
    value is certified rational (|x - p/q| below tol before q passes
    the cap).  Beyond the cap the slope is flagged irrational.  The
    tolerance sits between float representation error of a true
    rational (~1e-16) and the ~1/q^2 >= 1e-12 accuracy of convergents
    of a generic irrational within the cap, so the two are separable.
    """
    if not np.isfinite(x):
        return {"terms": [], "p": 1, "q": 0, "rational": True, "capped": False}
    terms = []
    p0, q0, p1, q1 = 1, 0, 0, 1
    r = float(x)
    for _ in range(max_terms):
        a = math.floor(r)
        terms.append(int(a))
        p0, p1 = a * p0 + p1, p0
        q0, q1 = a * q0 + q1, q0
        if q0 > cap:
            return {"terms": terms[:-1], "p": p1, "q": q1,
                    "rational": False, "capped": True}
        if abs(x - p0 / q0) <= tol * max(1.0, abs(x)):
            return {"terms": terms, "p": p0, "q": q0,
                    "rational": True, "capped": False}
        frac = r - a
        if frac <= 0:
            break
        r = 1.0 / frac
    return {"terms": terms, "p": p0, "q": q0, "rational": True, "capped": False}


@dataclass
class SlopePair:
    """The two lightlike slopes of a form, with rationality certificates."""

    values: tuple
    certificates: tuple

    @property
    def rational(self):
        return tuple(c["rational"] for c in self.certificates)


def _sorted_projective(vals):
    finite = sorted(v for v in vals if np.isfinite(v))
    return tuple(finite + [np.inf] * (len(vals) - len(finite)))


def slopes(Q):
    """Null slopes of Q, finite ones ascending and infinity last."""
    a, b, c = Q.matrix[0, 0], Q.matrix[0, 1], Q.matrix[1, 1]
    scale = max(abs(a), abs(b), abs(c))
    disc = b * b - a * c
    if disc <= 0:
        raise SignatureError("form has no real null directions")
    root = math.sqrt(disc)
    if abs(c) <= 1e-14 * scale:
        vals = (np.inf, -a / (2 * b))
    else:
        # stable quadratic roots of c t^2 + 2 b t + a
        s = -(b + math.copysign(root, b)) if b != 0 else root
        vals = (s / c, a / s) if s != 0 else (root / c, -root / c)
    ordered = _sorted_projective(vals)
    return SlopePair(ordered, tuple(continued_fraction(v) for v in ordered))


def form_from_slopes(t1, t2):
    """Normalized form whose null lines have the given slopes."""
    if t1 == t2:
        raise PreconditionError("slopes must be distinct")
    if not np.isfinite(t1) and not np.isfinite(t2):
        raise PreconditionError("at most one slope may be infinite")
    if not np.isfinite(t1) or not np.isfinite(t2):
        tf = t1 if np.isfinite(t1) else t2
        Q = np.array([[tf, -0.5], [-0.5, 0.0]])
    else:
        Q = np.array([[t1 * t2, -(t1 + t2) / 2], [-(t1 + t2) / 2, 1.0]])
    return QuadraticForm2(Q).normalized()


# ---- the modular-geodesic correspondence ---------------------------------------


def mobius(M, e):
    """Standard fractional-linear action on the endpoint chart."""
    p, q = (1.0, 0.0) if not np.isfinite(e) else (float(e), 1.0)
    M = np.asarray(M, dtype=float)
    num = M[0, 0] * p + M[0, 1] * q
    den = M[1, 0] * p + M[1, 1] * q
    return num / den if den != 0 else np.inf


@dataclass
class ModularGeodesic:
    """Hyperbolic geodesic with the form's ideal endpoints."""

    endpoints: tuple

    def midpoint(self):
        """Topmost point of the arc; height 1 is pinned for vertical lines."""
        e1, e2 = self.endpoints
        if not np.isfinite(e2):
            return complex(e1, 1.0)
        return complex(0.5 * (e1 + e2), 0.5 * abs(e1 - e2))


def to_modular_geodesic(Q):
    """Geodesic whose ideal endpoints are the null directions, chart u/v."""
    a, b, c = Q.matrix[0, 0], Q.matrix[0, 1], Q.matrix[1, 1]
    scale = max(abs(a), abs(b), abs(c))
    disc = b * b - a * c
    if disc <= 0:
        raise SignatureError("form has no real null directions")
    root = math.sqrt(disc)
    if abs(a) <= 1e-14 * scale:
        vals = (np.inf, -c / (2 * b))
    else:
        s = -(b + math.copysign(root, b)) if b != 0 else root
        vals = (s / a, c / s) if s != 0 else (root / a, -root / a)
    return ModularGeodesic(_sorted_projective(vals))


def modular_reduce(z, tol=1e-12, max_steps=400):
    """Standard-domain representative of z, ties toward the left boundary."""
    x, y = float(z.real), float(z.imag)
    if not (np.isfinite(x) and np.isfinite(y)) or y <= 0:
        raise PreconditionError("point must lie in the upper half-plane")
    for _ in range(max_steps):
        n = math.floor(x + 0.5)
        x -= n
        r2 = x * x + y * y
        if r2 < 1.0 - tol:
            x, y = -x / r2, y / r2
            continue
        break
    else:
        raise TracingError("fundamental-domain reduction did not terminate")
    if abs(x - 0.5) <= tol:
        x = -0.5
    r2 = x * x + y * y
    if abs(r2 - 1.0) <= tol and x > 0:
        x = -x
    return complex(x, y)


def domain_chart(z):
    """Coordinates (u, t) in [-1/2, 1/2] x [0, 1] on the standard domain."""
    u = float(z.real)
    t = math.sqrt(max(0.0, 1.0 - u * u)) / float(z.imag)
    return u, min(t, 1.0)


# ---- orbit probes ---------------------------------------------------------------


def orbit_probe(Q, word_radius):
    """Cumulative congruence displacement minima over reduced words.

    Enumerates every freely reduced word of length up to the radius,
    skips matrices acting trivially (plus and minus identity), and
    records per length the smallest Frobenius norm of M^T Q M - Q seen
    so far together with a word attaining it.
    """
    if word_radius < 1:
        raise PreconditionError("word radius must be at least 1")
    Qm = Q.matrix
    best = math.inf
    best_word = ""
    rows = []
    frontier = [("", (1, 0, 0, 1))]
    for length in range(1, word_radius + 1):
        nxt = []
        for word, (a, b, c, d) in frontier:
            for ch in "STst":
                if word and _INVERSE[word[-1]] == ch:
                    continue
                (p, q), (r, s_) = _GEN[ch]
                m = (a * p + b * r, a * q + b * s_, c * p + d * r, c * q + d * s_)
                nxt.append((word + ch, m))
                ma, mb, mc, md = m
                if mb == 0 and mc == 0 and ma == md and abs(ma) == 1:
                    continue
                M = np.array([[ma, mb], [mc, md]], dtype=float)
                disp = float(np.linalg.norm(M.T @ Qm @ M - Qm))
                if disp < best:
                    best = disp
                    best_word = word + ch
        frontier = nxt
        rows.append({"L": length, "min_displacement": best, "word": best_word})
    return rows


def orbit_probe_csv(rows):
    lines = ["L,min_displacement"]
    for r in rows:
        lines.append(f"{r['L']:d},{r['min_displacement']:.17g}")
    return "\n".join(lines) + "\n"


# ---- ergodicity statistics ------------------------------------------------------


def _projective_endpoints(Q):
    geo = to_modular_geodesic(Q)
    out = []
    for e in geo.endpoints:
        out.append((1.0, 0.0) if not np.isfinite(e) else (float(e), 1.0))
    return out


def _random_word_matrix(rng, max_length, splice):
    """Freely reduced random word, optionally spliced with a power of T."""
    length = int(rng.integers(1, max_length + 1))
    letters = "STst"
    a, b, c, d = 1, 0, 0, 1
    prev = None
    for _ in range(length):
        while True:
            ch = letters[int(rng.integers(0, 4))]
            if prev is None or _INVERSE[prev] != ch:
                break
        prev = ch
        (p, q), (r, s_) = _GEN[ch]
        a, b, c, d = a * p + b * r, a * q + b * s_, c * p + d * r, c * q + d * s_
    if splice and rng.random() < 0.5:
        k = int(rng.integers(-max_length, max_length + 1))
        # right-multiply by T^k
        b, d = a * k + b, c * k + d
    return a, b, c, d


def _apply_inverse_pair(mat, e1, e2):
    """Inverse fractional-linear transport of an endpoint pair, det +-1."""
    a, b, c, d = mat
    det = a * d - b * c

    def one(e):
        if not np.isfinite(e):
            return det * d / (det * -c) if c != 0 else np.inf
        den = det * (-c * e + a)
        if den == 0:
            return np.inf
        return det * (d * e - b) / den

    return one(e1), one(e2)


def _surd_digits(P, Q, D, depth):
    """Exact CF digits and convergents of (P + sqrt(D))/Q.

    Integer arithmetic throughout; requires Q | (D - P^2), which the
    callers arrange.  Yields (a_i, p_prev, q_prev, p_i, q_i).
    """
    s = math.isqrt(D)
    p0, q0, p1, q1 = 1, 0, 0, 1
    for _ in range(depth):
        if Q == 0:
            return
        if Q > 0:
            a = (P + s) // Q
        else:
            a = -((P + s) // (-Q) + 1)
        p0, p1 = a * p0 + p1, p0
        q0, q1 = a * q0 + q1, q0
        yield a, p1, q1, p0, q0
        P = a * Q - P
        Q = (D - P * P) // Q


def _small_quadratic(coeffs, d_max=4096, tol=1e-9):
    """Small integer multiple of a coefficient triple, if one exists.

    Forms whose entries were rounded from an integer quadratic (times a
    common irrational factor) are recognized so their orbits can be
    walked exactly; a generic triple passes the residual test for no
    small denominator.
    """
    lead = max(abs(c) for c in coeffs)
    if lead == 0:
        return None
    for d in range(1, d_max + 1):
        scale = d / lead
        ints = []
        for c in coeffs:
            v = c * scale
            r = round(v)
            if abs(v - r) > tol * max(1.0, abs(v)):
                break
            ints.append(r)
        else:
            g = math.gcd(*ints)
            if g:
                ints = [v // g for v in ints]
            return tuple(ints)
    return None


def _deep_arc_pool(Q, depth=600, cap=256):
    """Transported arcs whose pole is a CF convergent of an endpoint.

    Binary floats are rationals, so the endpoint slopes of a
    float-entry form are exact quadratic surds; their continued
    fractions can be walked with integer arithmetic to any depth.
    Each convergent denominator pair is a unimodular matrix that
    throws the arc into a cusp excursion, and large partial quotients
    mark the rare deep ones.  The images are evaluated once at high
    precision because the convergents cancel the endpoint to far
    below double resolution.
    """
    from fractions import Fraction

    import mpmath as mp

    av, bv, cv = Q.matrix[0, 0], Q.matrix[0, 1], Q.matrix[1, 1]
    if not all(np.isfinite(v) for v in (av, bv, cv)):
        return []
    coeffs = _small_quadratic((float(av), 2.0 * float(bv), float(cv)))
    if coeffs is None:
        fa, fb, fc = Fraction(float(av)), Fraction(2.0 * float(bv)), Fraction(float(cv))
        den = math.lcm(fa.denominator, fb.denominator, fc.denominator)
        coeffs = tuple(int(f * den) for f in (fa, fb, fc))
    A, B, C = coeffs
    if A == 0:
        return []
    D = B * B - 4 * A * C
    if D <= 0 or math.isqrt(D) ** 2 == D:
        return []
    deep, mid = [], []
    with mp.workdps(80 + int(0.7 * depth)):
        rt = mp.sqrt(D)
        roots = ((-B + rt) / (2 * A), (-B - rt) / (2 * A))
        for P0, Q0 in ((-B, 2 * A), (B, -2 * A)):
            prev = None
            for a, pp, qp, p, q in _surd_digits(P0, Q0, D, depth):
                if prev is not None and (a >= 3 or qp % 7 == 0):
                    ppp, qpp, pc, qc = prev
                    for k in {1, a // 2, a}:
                        if k < 1:
                            continue
                        psc, qsc = k * pc + ppp, k * qc + qpp
                        rows = ((qc, -pc), (qsc, -psc))
                        if qc * -psc + pc * qsc < 0:
                            rows = (rows[1], rows[0])
                        (ra, rb), (rc, rd) = rows
                        img = []
                        for e in roots:
                            num, d2 = ra * e + rb, rc * e + rd
                            img.append(float(num / d2) if d2 != 0 else np.inf)
                        if not np.isfinite(img).all():
                            continue
                        gap = abs(img[0] - img[1])
                        if gap > 12.0:
                            deep.append((img[0], img[1]))
                        elif gap > 0.4:
                            mid.append((img[0], img[1]))
                prev = (pp, qp, p, q)
    if len(deep) > cap // 2:
        deep = deep[:: max(1, len(deep) // (cap // 2))]
    if len(mid) > cap:
        mid = mid[:: max(1, len(mid) // cap)]
    return deep + mid


def ergodicity_statistics(Q, budget=100_000, grid=(8, 8), seed=0,
                          max_word_length=24):
    """Cell-occupancy histogram of the congruence orbit on the modular surface.

    Each sample transports the form's geodesic endpoints by the inverse
    action of a random group element, reduces the arc midpoint to the
    standard domain and bins its chart coordinates.  The elements mix
    two seeded families: plain reduced words in S and T, and convergent
    matrices whose pole approaches an endpoint, which supply the rare
    deep cusp excursions.  Coverage near 1 is heuristic evidence of a
    dense orbit; collapse onto few cells detects closed or periodic
    ones.
    """
    if budget < 10**4:
        raise PreconditionError("sample budget below 10^4 is too noisy to report")
    rng = np.random.default_rng(seed)
    geo = to_modular_geodesic(Q)
    E1, E2 = geo.endpoints
    pool = _deep_arc_pool(Q)
    nu, nt = grid
    counts = np.zeros((nu, nt), dtype=np.int64)
    skipped = 0
    for _ in range(int(budget)):
        if rng.random() < 0.55 or not pool:
            mat = _random_word_matrix(rng, max_word_length, True)
            e1, e2 = _apply_inverse_pair(mat, E1, E2)
        else:
            e1, e2 = pool[int(rng.integers(0, len(pool)))]
            if rng.random() < 0.35:
                mat = _random_word_matrix(rng, 6, False)
                e1, e2 = _apply_inverse_pair(mat, e1, e2)
        if not (np.isfinite(e1) or np.isfinite(e2)):
            skipped += 1
            continue
        if not (np.isfinite(e1) and np.isfinite(e2)):
            x = e1 if np.isfinite(e1) else e2
            y = 1.0
        else:
            x, y = 0.5 * (e1 + e2), 0.5 * abs(e1 - e2)
        if not np.isfinite(x) or y < 1e-13 * max(1.0, abs(x)):
            skipped += 1
            continue
        try:
            zr = modular_reduce(complex(x, y))
        except (PreconditionError, TracingError):
            skipped += 1
            continue
        u, t = domain_chart(zr)
        iu = min(nu - 1, max(0, int((u + 0.5) * nu)))
        it = min(nt - 1, max(0, int(t * nt)))
        counts[iu, it] += 1
    total_cells = nu * nt
    occupied = int(np.count_nonzero(counts))
    binned = int(counts.sum())
    expected = binned / total_cells if binned else 0.0
    chi2 = float(np.sum((counts - expected) ** 2) / expected) if expected else 0.0
    return {
        "seed": int(seed),
        "budget": int(budget),
        "grid": [int(nu), int(nt)],
        "max_word_length": int(max_word_length),
        "binned": binned,
        "skipped": skipped,
        "occupied_cells": occupied,
        "coverage": occupied / total_cells,
        "chi_square": chi2,
        "counts": counts.tolist(),
    }


def statistics_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
