"""Scalar and array arithmetic in complex128 or in gmpy2 at a fixed precision."""
from __future__ import annotations

import math
import threading

import gmpy2
import numpy as np
import scipy.linalg as sla

_MPC, _MPFR = type(gmpy2.mpc(0)), type(gmpy2.mpfr(0))


class Arithmetic:
    """Working precision for the block refinement.

    ``dps=None`` selects complex128 with LAPACK solves; an integer selects
    ``gmpy2.mpc`` numbers with about that many decimal digits, stored in
    object arrays.  Multiprecision operations must run inside ``with arith:``
    so that gmpy2 rounds to the requested precision.
    """

    def __init__(self, dps=None):
        self.dps = None if dps is None else int(dps)
        self._local = threading.local()
        if self.dps is None:
            self.eps = float(np.finfo(float).eps)
            self.sqrt_eps = math.sqrt(self.eps)
            self._ctx = None
        else:
            self.bits = int(math.ceil(self.dps * math.log2(10))) + 8
            self._ctx = gmpy2.context(precision=self.bits, real_prec=self.bits, imag_prec=self.bits)
            with self:
                self.eps = gmpy2.mpfr(10) ** (-self.dps)
                self.sqrt_eps = gmpy2.sqrt(self.eps)

    def __enter__(self):
        if self._ctx is not None:
            stack = self._local.__dict__.setdefault("stack", [])
            stack.append(gmpy2.get_context())
            gmpy2.set_context(gmpy2.context(self._ctx))
        return self

    def __exit__(self, *exc):
        if self._ctx is not None:
            gmpy2.set_context(self._local.stack.pop())
        return False

    @property
    def exact(self):
        return self._ctx is not None

    def __repr__(self):
        return "Arithmetic(double)" if self.dps is None else f"Arithmetic(dps={self.dps})"

    def num(self, x):
        if self._ctx is None:
            return complex(x)
        if isinstance(x, (_MPC, _MPFR)):
            return gmpy2.mpc(x)
        x = complex(x)
        return gmpy2.mpc(x.real, x.imag)

    def arr(self, a):
        a = np.asarray(a)
        if self._ctx is None:
            return a.astype(complex)
        out = np.empty(a.shape, dtype=object)
        flat_in, flat_out = a.reshape(-1), out.reshape(-1)
        cache = {}
        for i, v in enumerate(flat_in):
            key = v if a.dtype != object else None
            if key is not None and key in cache:
                flat_out[i] = cache[key]
                continue
            val = self.num(v)
            if key is not None:
                cache[key] = val
            flat_out[i] = val
        return out

    def zeros(self, shape):
        if self._ctx is None:
            return np.zeros(shape, dtype=complex)
        out = np.empty(shape, dtype=object)
        out.fill(gmpy2.mpc(0))
        return out

    def sqrt(self, x):
        return np.sqrt(complex(x)) if self._ctx is None else gmpy2.sqrt(x)

    def mean(self, values):
        values = [self.num(v) for v in values]
        return sum(values[1:], values[0]) / len(values)

    def norm(self, v):
        if self._ctx is None:
            return float(np.linalg.norm(v))
        return gmpy2.sqrt(sum(gmpy2.norm(x) for x in v))

    def factor(self, M, bands=None, pivot=True):
        """Factorization with a ``solve(rhs)`` method.

        In multiprecision ``M`` is given in band storage (see :func:`to_band`)
        with bandwidths ``bands = (bl, bu)``.
        """
        if self._ctx is None:
            return _DenseLU(M)
        return _BandLU(M, *bands, zero=gmpy2.mpc(0), pivot=pivot)


def log10_abs(x):
    """``log10 |x|`` without underflow for multiprecision values (``-inf`` at 0)."""
    if isinstance(x, (_MPC, _MPFR)):
        m = abs(x)
        return -math.inf if m == 0 else float(gmpy2.log10(m))
    m = abs(complex(x))
    return -math.inf if m == 0 else math.log10(m)


def to_complex(x):
    return complex(x)


class _DenseLU:
    def __init__(self, M):
        self.lu = sla.lu_factor(M, check_finite=False)

    def solve(self, rhs):
        return sla.lu_solve(self.lu, rhs, check_finite=False)


class _BandLU:
    """Gaussian elimination with partial pivoting on band storage.

    ``band[i, j - i + bl]`` holds ``A[i, j]`` for ``-bl <= j - i <= bu``.
    Row interchanges widen the upper bandwidth to ``bu + bl``; multipliers
    are kept per column and the interchanges are replayed on the right-hand
    side in elimination order.  ``pivot=False`` is safe for diagonally
    dominant matrices and avoids the fill-in.
    """

    def __init__(self, band, bl, bu, zero, pivot=True):
        N = band.shape[0]
        bl, bu = int(bl), int(bu)
        ub = bu + bl if pivot else bu
        W = bl + ub + 1
        A = np.empty((N, W), dtype=object)
        A.fill(zero)
        A[:, : bl + bu + 1] = band
        self.N, self.bl, self.ub = N, bl, ub
        self.piv = np.arange(N)
        self.mult = []
        for k in range(N):
            hi = min(N, k + bl + 1)
            cend = min(N, k + ub + 1)
            width = cend - k
            if pivot:
                mags = [abs(A[i, k - i + bl]) for i in range(k, hi)]
                p = k + int(max(range(len(mags)), key=mags.__getitem__))
            else:
                p = k
            if A[p, k - p + bl] == 0:
                raise ZeroDivisionError("singular banded matrix")
            if p != k:
                rk = A[k, bl: bl + width].copy()
                A[k, bl: bl + width] = A[p, k - p + bl: k - p + bl + width]
                A[p, k - p + bl: k - p + bl + width] = rk
            self.piv[k] = p
            pivot = A[k, bl]
            row = A[k, bl + 1: bl + width]
            ls = []
            for i in range(k + 1, hi):
                o = k - i + bl
                l = A[i, o] / pivot
                ls.append(l)
                if l != 0:
                    A[i, o + 1: o + width] = A[i, o + 1: o + width] - l * row
            self.mult.append(np.array(ls, dtype=object))
        self.A = A

    def solve(self, rhs):
        A, N, bl, ub = self.A, self.N, self.bl, self.ub
        y = np.array(rhs, dtype=object, copy=True)
        vec = y.ndim == 1
        if vec:
            y = y[:, None]
        for k in range(N):
            p = self.piv[k]
            if p != k:
                y[[k, p]] = y[[p, k]]
            m = self.mult[k]
            if len(m):
                y[k + 1: k + 1 + len(m)] = y[k + 1: k + 1 + len(m)] - m[:, None] * y[k]
        for k in range(N - 1, -1, -1):
            cend = min(N, k + ub + 1)
            acc = y[k]
            if cend > k + 1:
                acc = acc - A[k, bl + 1: bl + cend - k] @ y[k + 1: cend]
            y[k] = acc / A[k, bl]
        return y[:, 0] if vec else y


def to_band(M, bl, bu):
    """Band storage ``band[i, j - i + bl] = M[i, j]`` (zero outside the matrix)."""
    M = np.asarray(M)
    N = M.shape[0]
    band = np.zeros((N, bl + bu + 1), dtype=M.dtype)
    for d in range(-bl, bu + 1):
        i = np.arange(max(0, -d), min(N, N - d))
        band[i, d + bl] = M[i, i + d]
    return band


def bandwidths(M):
    """Lower and upper bandwidths of the nonzero pattern of ``M``."""
    i, j = np.nonzero(np.asarray(M) != 0)
    if i.size == 0:
        return 0, 0
    d = i - j
    return int(max(d.max(), 0)), int(max(-d.min(), 0))
