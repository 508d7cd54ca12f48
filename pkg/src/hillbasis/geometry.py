"""Two-dimensional block geometry: overlap functional, biorthogonal pairs, Orlicz bounds.

Vectors are coefficient arrays in an orthonormal basis; the inner product is
``<x, y> = sum x_i conj(y_i)``.  Object arrays of ``gmpy2.mpc`` are accepted
wherever the overlap of nearly parallel vectors has to be resolved beyond
double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np

__all__ = [
    "GeometryError",
    "BlockPair",
    "inner",
    "kappa",
    "overlap_defect",
    "biorthogonal_2d",
    "reconstruct",
    "q_norms",
    "q_bracketing",
    "OrliczResult",
    "orlicz_check",
    "basis_bound_check",
    "trend_slope",
]

NORM_TOL = 1e-10
PARALLEL_TOL = 1e-14


class GeometryError(ValueError):
    pass


def _is_exact(v):
    return np.asarray(v).dtype == object


def inner(x, y):
    """``<x, y>``, linear in the first argument."""
    x, y = np.asarray(x), np.asarray(y)
    if _is_exact(x) or _is_exact(y):
        return sum((a * _conj(b) for a, b in zip(x, y)), gmpy2.mpc(0))
    return complex(np.vdot(y, x))


def _conj(z):
    return z.conjugate() if hasattr(z, "conjugate") else np.conj(z)


def _norm2(x):
    x = np.asarray(x)
    if _is_exact(x):
        return sum((gmpy2.norm(gmpy2.mpc(a)) for a in x), gmpy2.mpfr(0))
    return float(np.vdot(x, x).real)


def _precision(*vectors):
    """Largest gmpy2 precision (bits) among the entries, 53 for double arrays."""
    bits = 53
    for v in vectors:
        v = np.asarray(v)
        if _is_exact(v):
            for x in v:
                if hasattr(x, "precision"):
                    p = x.precision
                    bits = max(bits, max(p) if isinstance(p, tuple) else p)
    return bits


def overlap_defect(u1, u2, normalized=False):
    """``||u1||^2 ||u2||^2 - |<u1, u2>|^2`` evaluated without cancellation.

    Uses the Lagrange identity ``sum_{i<j} |u1_i u2_j - u1_j u2_i|^2``, which
    keeps full relative accuracy when the vectors are nearly parallel.  With
    ``normalized`` the result is divided by ``||u1||^2 ||u2||^2``.
    """
    a, b = np.asarray(u1), np.asarray(u2)
    if _is_exact(a) or _is_exact(b):
        with gmpy2.context(precision=_precision(a, b), real_prec=_precision(a, b), imag_prec=_precision(a, b)):
            a = np.array([gmpy2.mpc(x) for x in a], dtype=object)
            b = np.array([gmpy2.mpc(x) for x in b], dtype=object)
            total = gmpy2.mpfr(0)
            for i in range(len(a) - 1):
                w = a[i] * b[i + 1:] - b[i] * a[i + 1:]
                total += sum((gmpy2.norm(x) for x in w), gmpy2.mpfr(0))
            if normalized:
                total = total / (_norm2(a) * _norm2(b))
            return total
    W = np.outer(a, b) - np.outer(b, a)
    total = 0.5 * float(np.sum(np.abs(W) ** 2))
    return total / (_norm2(a) * _norm2(b)) if normalized else total


def _check_unit(u, name):
    n2 = _norm2(u)
    if abs(float(n2) - 1.0) > 2 * NORM_TOL:
        raise GeometryError(f"{name} is not normalized: ||{name}|| = {math.sqrt(float(n2)):.12g}")
    return n2


def kappa(u1, u2, parallel_tol=None):
    """``(1 - |<u1, u2>|^2)^(-1/2)`` for unit vectors.

    Returns ``inf`` when ``|<u1, u2>| >= 1 - parallel_tol``.  The default
    tolerance is ``1e-14`` for double vectors; for multiprecision vectors it
    scales with the working precision, since the defect is then computed
    from the Lagrange identity to full relative accuracy.
    """
    _check_unit(u1, "u1")
    _check_unit(u2, "u2")
    exact = _is_exact(u1) or _is_exact(u2)
    if parallel_tol is None:
        parallel_tol = PARALLEL_TOL if not exact else 2.0 ** (30 - _precision(u1, u2))
    d = overlap_defect(u1, u2, normalized=True)
    # 1 - |<u1, u2>| = d / (1 + |<u1, u2>|)
    g = math.sqrt(max(0.0, 1.0 - float(d)))
    if float(d) / (1 + g) <= parallel_tol:
        return math.inf
    return float(1 / gmpy2.sqrt(d)) if exact else 1.0 / math.sqrt(d)


@dataclass
class BlockPair:
    """Two unit vectors spanning a two-dimensional block."""

    u1: np.ndarray
    u2: np.ndarray
    inner: complex
    kappa: float

    @classmethod
    def from_vectors(cls, u1, u2, normalize=False):
        if normalize:
            u1 = np.asarray(u1) / math.sqrt(float(_norm2(u1)))
            u2 = np.asarray(u2) / math.sqrt(float(_norm2(u2)))
        return cls(np.asarray(u1), np.asarray(u2), complex(inner(u1, u2)), kappa(u1, u2))


def biorthogonal_2d(u1, u2):
    """Functionals ``psi1, psi2`` on ``span{u1, u2}`` with ``<u_j, psi_i> = delta_ij``.

    Each ``psi_i`` is represented by a vector of the span, acting through
    ``psi_i(h) = <h, psi_i>``.  For unit vectors ``||psi_i|| = kappa(u1, u2)``.
    """
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    G = np.array([[np.vdot(u1, u1), np.vdot(u2, u1)], [np.vdot(u1, u2), np.vdot(u2, u2)]])
    # G[j, k] = <u_j, u_k>; psi_i = sum_k (G^-1)_{ik} u_k
    det = (G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]).real
    if det <= PARALLEL_TOL * G[0, 0].real * G[1, 1].real:
        raise GeometryError("degenerate pair: the vectors are (numerically) parallel")
    Gi = np.linalg.inv(G)
    return Gi[0, 0] * u1 + Gi[0, 1] * u2, Gi[1, 0] * u1 + Gi[1, 1] * u2


def reconstruct(h, u1, u2, psi1, psi2):
    """``psi1(h) u1 + psi2(h) u2``."""
    h = np.asarray(h, dtype=complex)
    return np.vdot(psi1, h) * np.asarray(u1) + np.vdot(psi2, h) * np.asarray(u2)


def q_norms(u1, u2):
    """``||q_j|| = ||u_j|| ||psi_j||`` for the rank-one maps ``q_j h = psi_j(h) u_j``."""
    p1, p2 = biorthogonal_2d(u1, u2)
    return (float(np.linalg.norm(u1) * np.linalg.norm(p1)), float(np.linalg.norm(u2) * np.linalg.norm(p2)))


def q_bracketing(u1, u2, samples, M=None):
    """Worst slack of ``(1/(4M^2)) S <= ||Q y||^2 <= 2 M^2 S`` over samples.

    ``S = ||q1 y||^2 + ||q2 y||^2`` and ``Q`` is the orthogonal projection
    onto the span.  Returns ``(lower_ratio, upper_ratio)``; both are at most
    one when the bracketing holds.
    """
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    p1, p2 = biorthogonal_2d(u1, u2)
    if M is None:
        M = max(q_norms(u1, u2))
    Qb, _ = np.linalg.qr(np.column_stack([u1, u2]))
    lo = hi = 0.0
    for y in samples:
        y = np.asarray(y, dtype=complex)
        Qy = Qb @ (Qb.conj().T @ y)
        s = abs(np.vdot(p1, y)) ** 2 * np.vdot(u1, u1).real + abs(np.vdot(p2, y)) ** 2 * np.vdot(u2, u2).real
        qy = np.vdot(Qy, Qy).real
        if s == 0:
            continue
        lo = max(lo, (s / (4 * M * M)) / qy if qy > 0 else math.inf)
        hi = max(hi, qy / (2 * M * M * s))
    return lo, hi


@dataclass
class OrliczResult:
    C1: float
    worst_sample: int
    lower: float
    upper: float


def orlicz_check(projections, samples, annihilation_tol=1e-8):
    """Smallest ``C1`` with ``||y||^2 / C1^2 <= sum ||Q_m y||^2 <= C1^2 ||y||^2`` on the samples.

    Raises
    ------
    GeometryError
        If two projections fail ``||Q_i Q_j|| <= annihilation_tol`` (``i != j``).
    """
    Qs = [np.asarray(Q, dtype=complex) for Q in projections]
    for i in range(len(Qs)):
        for j in range(len(Qs)):
            if i != j:
                d = np.linalg.norm(Qs[i] @ Qs[j], 2)
                if d > annihilation_tol:
                    raise GeometryError(f"projections {i} and {j} overlap: ||Q_i Q_j|| = {d:.3e}")
    C1, worst, lo_all, hi_all = 1.0, -1, math.inf, 0.0
    for k, y in enumerate(samples):
        y = np.asarray(y, dtype=complex)
        yy = np.vdot(y, y).real
        if yy == 0:
            continue
        s = sum(np.vdot(Q @ y, Q @ y).real for Q in Qs) / yy
        lo_all, hi_all = min(lo_all, s), max(hi_all, s)
        c = math.inf if s == 0 else max(math.sqrt(s), 1 / math.sqrt(s))
        if c > C1 or worst < 0:
            C1, worst = max(C1, c), k
    return OrliczResult(C1, worst, lo_all, hi_all)


def basis_bound_check(pairs, threshold=1e3):
    """``(sup_j ||u_j|| ||psi_j||, verdict)`` over a list of :class:`BlockPair`.

    The verdict is ``"bounded"`` when the supremum stays below ``threshold``.
    """
    sup = 1.0 if not pairs else 0.0
    for p in pairs:
        sup = max(sup, p.kappa if math.isfinite(p.kappa) else math.inf)
    return sup, ("bounded" if sup < threshold else "unbounded")


def trend_slope(ns, values):
    """Least-squares slope of ``values`` against ``log n``."""
    ns = np.asarray([abs(n) for n in ns], dtype=float)
    v = np.asarray(values, dtype=float)
    keep = np.isfinite(v) & (ns > 0)
    if keep.sum() < 2:
        return 0.0
    x = np.log(ns[keep])
    if np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, v[keep], 1)[0])
