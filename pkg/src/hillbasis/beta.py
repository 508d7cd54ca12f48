"""Off-diagonal entries of the two-mode reduction and the ratio functional.

For the Hill operator and an index ``n`` the entries are the chain series

    beta_plus  = V(2n)  + sum_k sum_{j_1..j_k} V(n - j_1) V(j_1 - j_2) ... V(j_k + n)
                                               / prod_i (n**2 - j_i**2 + z)
    beta_minus = V(-2n) + (same with n -> -n in the outer factors)

with ``j_i`` running over integers of the parity of ``n``, ``j_i != +-n``.
They are evaluated by dynamic programming over the chain endpoint, one
banded matrix-vector product per order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._arith import Arithmetic
from .discretize import BlockReduction, build_matrix

__all__ = [
    "BetaEval",
    "BetaDomainError",
    "BetaConvergenceError",
    "beta_pm",
    "beta_schur",
    "brute_force_beta",
    "t_ratio",
    "gap_bound_check",
    "leading_term_check",
    "default_band",
]


class BetaDomainError(ValueError):
    pass


class BetaConvergenceError(RuntimeError):
    pass


@dataclass
class BetaEval:
    n: int
    z: complex
    beta_minus: complex
    beta_plus: complex
    t: float
    order_used: int
    band_used: int
    term_norms: dict = field(default_factory=dict)  # "plus"/"minus" -> list of |S_k|
    converged: bool = False
    band_change: float = 0.0


def t_ratio(beta_minus, beta_plus, zero_tol=0.0):
    """``|beta_minus / beta_plus|`` with the conventions for vanishing entries."""
    bm, bp = abs(beta_minus), abs(beta_plus)
    if bp > zero_tol:
        return bm / bp
    if bm > zero_tol:
        return math.inf
    return 1.0


def default_band(pot, n):
    return max(4 * abs(n), 4 * abs(n) + 4 * pot.support_bound)


def _lattice(n, J):
    j = np.arange(-J, J + 1)
    j = j[(j - n) % 2 == 0]
    return j[(j != n) & (j != -n)]


class _Backend:
    """Arrays of complex128, or of ``gmpy2.mpc`` when a precision is given."""

    def __init__(self, dps=None):
        self.dps = dps
        self.ar = Arithmetic(dps)

    def scalar(self, x):
        return self.ar.num(x)

    def array(self, values):
        return self.ar.arr(np.asarray(values, dtype=complex))

    def abs(self, x):
        # multiprecision magnitudes stay in gmpy2 so tiny values do not underflow
        return abs(complex(x)) if self.dps is None else abs(x)


def _banded_coupling(pot, j):
    """Sparse coupling ``j -> [(offset, coeff)]`` as a list of diagonals."""
    offsets = sorted(set(pot.V))
    return [(d, pot.coeff(d)) for d in offsets if d != 0]


def _dp_series(backend, r, c, dinv, diagonals, n_lat, order, series_tol):
    """Accumulate ``sum_k r . (Dinv C)^(k-1) Dinv c`` order by order."""
    w = dinv * c
    terms, total = [], backend.scalar(0)
    used = 0
    for k in range(1, order + 1):
        Sk = (r * w).sum()
        total = total + Sk
        mag = backend.abs(Sk)
        terms.append(mag)
        used = k
        if series_tol > 0 and k >= 3:
            ref = backend.abs(total)
            if ref > 0 and max(terms[-3:]) <= series_tol * ref:
                break
        if k == order:
            break
        nxt = w * 0
        for d, vd in diagonals:
            # (C w)_j = sum_i V(j - i) w_i, i = j - d
            s = d // 2
            if s > 0:
                nxt[s:] = nxt[s:] + vd * w[:-s]
            elif s < 0:
                nxt[:s] = nxt[:s] + vd * w[-s:]
        w = dinv * nxt
    return total, terms, used


def _beta_pair(pot, n, z, order, J, series_tol, backend):
    j = _lattice(n, J)
    n_lat = len(j)
    # the lattice skips +-n; restore a uniform step-2 grid by zeroing those slots
    full = np.arange(-J + ((J - n) % 2), J + 1, 2)
    mask = (full != n) & (full != -n)
    diag = np.array([float(n * n - int(x) * int(x)) for x in full])
    dinv_c = np.zeros(len(full), dtype=complex)
    dinv_c[mask] = 1.0 / (diag[mask] + complex(z)) if backend.dps is None else 0
    if backend.dps is None:
        dinv = dinv_c
    else:
        dinv = backend.ar.zeros(len(full))
        zz = backend.scalar(z)
        for i, (d, m) in enumerate(zip(diag, mask)):
            if m:
                dinv[i] = 1 / (int(d) + zz)
    diagonals = _banded_coupling(pot, full)
    out = {}
    for sign, key in ((1, "plus"), (-1, "minus")):
        m = sign * n
        r = backend.array(pot.table("V", m - full)) * (mask if backend.dps is None else 1)
        c = backend.array(pot.table("V", full + m))
        if backend.dps is not None:
            r[~mask] = backend.scalar(0)
            c[~mask] = backend.scalar(0)
        else:
            r = np.where(mask, r, 0)
            c = np.where(mask, c, 0)
        lead = backend.scalar(pot.coeff(2 * m))
        total, terms, used = _dp_series(backend, r, c, dinv, diagonals, n_lat, order, series_tol)
        out[key] = (lead + total, terms, used)
    return out


def beta_pm(pot, n, z=0.0, order=None, band=None, series_tol=1e-10, zero_tol=0.0,
            dps=None, validate_band=True, enforce_domain=True):
    """Entries ``beta_minus``, ``beta_plus`` of the reduction at ``n`` for spectral offset ``z``.

    Parameters
    ----------
    pot : FourierPotential
        Hill potential (regular or singular).
    n : int
        Block index, ``n >= 1``.
    z : complex
        Offset from ``n**2``; must satisfy ``|z| < n/4``.
    order : int, optional
        Maximal chain length (default 256).  The series stops early once two
        consecutive terms fall below ``series_tol`` times the running value;
        ``series_tol=0`` sums exactly ``order`` terms.
    band : int, optional
        Summation indices satisfy ``|j| <= band`` (default :func:`default_band`).
    dps : int, optional
        Evaluate in multiprecision arithmetic with this many digits.
    validate_band : bool
        Recompute with the band doubled and record the change; the result is
        flagged converged only if the change is below ``series_tol * |beta|``.
    """
    if pot.is_dirac:
        raise ValueError("beta_pm evaluates the Hill chain series; use beta_schur for Dirac operators")
    n = int(n)
    if n < 1:
        raise BetaDomainError("beta_pm needs n >= 1")
    if enforce_domain and not abs(complex(z)) < n / 4:
        raise BetaDomainError(f"|z| = {abs(complex(z)):.4g} is outside the disc |z| < n/4 = {n / 4:g}")
    order = 256 if order is None else int(order)
    J = default_band(pot, n) if band is None else int(band)
    backend = _Backend(dps)
    with backend.ar:
        res = _beta_pair(pot, n, z, order, J, series_tol, backend)
        (bp, tp, up), (bm, tm, um) = res["plus"], res["minus"]
        change = 0.0
        converged = True
        if series_tol > 0:
            for terms, used in ((tp, up), (tm, um)):
                if used >= order and terms and terms[-1] > series_tol * max(max(terms), 1e-300):
                    converged = False
        if validate_band:
            res2 = _beta_pair(pot, n, z, order, 2 * J, series_tol, backend)
            change = max(backend.abs(res2["plus"][0] - bp), backend.abs(res2["minus"][0] - bm))
            scale = max(backend.abs(bp), backend.abs(bm))
            if series_tol > 0 and change > series_tol * max(scale, 1e-300):
                converged = False
        t = float(t_ratio(backend.abs(bm), backend.abs(bp), zero_tol))
    if dps is None:
        bm, bp = complex(bm), complex(bp)
    norms = {"plus": [float(x) for x in tp], "minus": [float(x) for x in tm]}
    return BetaEval(n, complex(z), bm, bp, t, max(up, um), J, norms, converged, float(change))


def beta_schur(pot, bc, n, z, cutoff):
    """``(beta_minus, beta_plus)`` from the Schur complement of a truncation."""
    op = build_matrix(pot, bc, cutoff)
    B = BlockReduction(op, n).jet(z).B
    return complex(B[0, 1]), complex(B[1, 0])


def brute_force_beta(pot, n, z, order, band):
    """Explicit k-fold summation of the chain series (exponential cost)."""
    import itertools

    j = [int(x) for x in _lattice(n, band)]
    out = []
    for m in (n, -n):
        total = pot.coeff(2 * m)
        for k in range(1, order + 1):
            for chain in itertools.product(j, repeat=k):
                term = pot.coeff(m - chain[0])
                if term == 0:
                    continue
                for a, b in zip(chain, chain[1:]):
                    term *= pot.coeff(a - b)
                    if term == 0:
                        break
                if term == 0:
                    continue
                term *= pot.coeff(chain[-1] + m)
                for x in chain:
                    term /= n * n - x * x + z
                total += term
        out.append(total)
    return out[1], out[0]


def gap_bound_check(block, beta_eval):
    """``max(0, |gamma| - 2 (|beta_minus| + |beta_plus|))`` at the pair centre."""
    bound = 2 * (abs(complex(beta_eval.beta_minus)) + abs(complex(beta_eval.beta_plus)))
    return max(0.0, abs(block.gamma) - bound)


def leading_term_check(pot, n, z=0.0, **kw):
    """``max_pm |beta_pm - V(+-2n)| * n / log n``."""
    ev = beta_pm(pot, n, z, **kw)
    dev = max(abs(complex(ev.beta_plus) - pot.coeff(2 * n)), abs(complex(ev.beta_minus) - pot.coeff(-2 * n)))
    return dev * n / math.log(n) if n > 1 else dev
