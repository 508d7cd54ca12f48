"""Two-mode reduction of a truncated operator around one free eigenvalue.

For the free eigenspace ``E`` at ``lambda0`` and ``lambda = lambda0 + z`` the
Schur complement

    B(z, w) = C_EE + C_ER (diag(lambda0 - d_R(w) + z) - C_RR)^{-1} C_RE

reduces the eigenvalue problem to ``det(diag(d_E(w) - lambda0 - z) + B) = 0``.
``w`` is a Floquet shift of the modes (``w = 0`` for the periodic and
anti-periodic problems); Floquet solutions with nonzero ``w`` locate the
Dirichlet eigenvalue through the condition that the solution vanishes at 0.

All arithmetic goes through :class:`~hillbasis._arith.Arithmetic`, so the same
code runs in complex128 or in multiprecision.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from ._arith import Arithmetic, bandwidths, to_band

__all__ = [
    "ReductionError",
    "BlockReduction",
    "Jet",
    "PairSolution",
    "DirichletSolution",
    "solve_pair",
    "solve_single",
    "solve_dirichlet",
]


class ReductionError(RuntimeError):
    pass


def _in_precision(fn):
    """Run ``fn(obj, ...)`` inside the working precision of ``obj.ar``."""

    @functools.wraps(fn)
    def wrapper(obj, *args, **kw):
        with obj.ar:
            return fn(obj, *args, **kw)

    return wrapper


@dataclass
class Jet:
    B: np.ndarray
    Bz: np.ndarray
    X: np.ndarray
    Xz: np.ndarray
    Bw: np.ndarray | None = None
    Xw: np.ndarray | None = None


class BlockReduction:
    """Schur complement of ``op`` onto the free block at index ``n``.

    Parameters
    ----------
    op : TruncatedOperator
        Periodic-type truncation (any boundary condition for ``jet``; the
        Floquet shift is only meaningful for PerPlus / PerMinus bases).
    n : int
        Block index.
    arith : Arithmetic, optional
        Working precision (default complex128).
    """

    def __init__(self, op, n, arith=None):
        self.op = op
        self.n = n
        self.ar = arith or Arithmetic()
        E = op.block_positions(n)
        mask = np.ones(op.truncation, dtype=bool)
        mask[E] = False
        R = np.flatnonzero(mask)
        self.E, self.R = E, R
        self.lam0 = float(op.free_diag[E[0]])
        C = op.coupling
        ar = self.ar
        self.shift = ar.arr(self.lam0 - op.free_diag[R])
        C_RR = C[np.ix_(R, R)]
        self.bands = bandwidths(C_RR)
        # multiprecision solves work on band storage only
        self.C_RR = ar.arr(to_band(C_RR, *self.bands) if ar.exact else C_RR)
        self._offdiag_sums = np.abs(C_RR).sum(axis=1) - np.abs(np.diagonal(C_RR))
        self.C_RE = ar.arr(C[np.ix_(R, E)])
        self.C_ER = ar.arr(C[np.ix_(E, R)])
        self.C_EE = ar.arr(C[np.ix_(E, E)])
        if op.bc.periodic_type:
            self._slope_R, self._quad = self._floquet_slopes(R)
            self._slope_E, _ = self._floquet_slopes(E)
            self.ell_E, self.ell_R = self._dirichlet_functional(E), self._dirichlet_functional(R)
        else:
            self._slope_R = self._slope_E = self.ell_E = self.ell_R = None
            self._quad = 0.0

    def _floquet_slopes(self, idx):
        # free value of mode j under the shift w: d_j + slope_j * w + quad * w**2
        labels = [self.op.basis_indices[i] for i in idx]
        if self.op.operator_kind == "hill":
            return [2.0 * m for m in labels], 1.0
        return [-1.0 if c == 1 else 1.0 for c, _ in labels], 0.0

    def _dirichlet_functional(self, idx):
        if self.op.operator_kind == "hill":
            return np.ones(len(idx))
        return np.array([1.0 if self.op.basis_indices[i][0] == 1 else -1.0 for i in idx])

    def floquet_offsets(self, w, which="E"):
        slope = self._slope_E if which == "E" else self._slope_R
        return [s * w + self._quad * w * w for s in slope]

    def _factor(self, z, w):
        ar = self.ar
        diag = self.shift + ar.num(z)
        if w != 0:
            diag = diag - np.array(self.floquet_offsets(w, "R"), dtype=object if ar.exact else complex)
        M = -self.C_RR
        if ar.exact:
            M[:, self.bands[0]] = M[:, self.bands[0]] + diag
            d = np.abs(np.array([complex(x) for x in M[:, self.bands[0]]]))
            dominant = bool(np.all(d > 1.01 * self._offdiag_sums))
            return ar.factor(M, self.bands, pivot=not dominant)
        else:
            M[np.diag_indices_from(M)] = M.diagonal() + diag
        return ar.factor(M, self.bands)

    @_in_precision
    def jet(self, z, w=0, floquet=False):
        """Reduced matrix and derivatives at ``(z, w)``."""
        ar = self.ar
        k = len(self.E)
        if len(self.R) == 0:
            Z = ar.zeros((k, k))
            return Jet(self.C_EE.copy(), Z, ar.zeros((0, k)), ar.zeros((0, k)), Z, ar.zeros((0, k)))
        fac = self._factor(z, w)
        X = fac.solve(self.C_RE)
        Xz = -fac.solve(X)
        B = self.C_EE + self.C_ER @ X
        Bz = self.C_ER @ Xz
        if not floquet:
            return Jet(B, Bz, X, Xz)
        g = np.array([s + 2 * self._quad * w for s in self._slope_R], dtype=object if ar.exact else complex)
        Xw = fac.solve(g[:, None] * X)
        return Jet(B, Bz, X, Xz, self.C_ER @ Xw, Xw)

    @_in_precision
    def lift(self, z, xE, w=0):
        """Coefficient vector ``(x_E, R(z) C_RE x_E)`` in the truncation basis."""
        ar = self.ar
        out = ar.zeros(self.op.truncation)
        out[self.E] = xE
        if len(self.R):
            out[self.R] = self._factor(z, w).solve(self.C_RE @ xE)
        return out


@dataclass
class PairSolution:
    z_minus: object
    z_plus: object
    gamma: object
    z_mid: object
    d_minus: object
    d_plus: object
    x_minus: np.ndarray
    x_plus: np.ndarray
    beta_minus: object
    beta_plus: object
    alpha: object
    diag_skew: float
    iterations: int


def _pair_terms(jet):
    B, dB = jet.B, jet.Bz
    a0 = (B[0, 0] + B[1, 1]) / 2
    a1 = (dB[0, 0] + dB[1, 1]) / 2
    return a0, a1, B[0, 1], B[1, 0], dB[0, 1], dB[1, 0], float(abs(B[0, 0] - B[1, 1]))


def _quad(zc, terms):
    a0, a1, bm, bp, bm1, bp1, _ = terms
    a = 1 - a1
    c0 = zc - a0
    P, S, T = bp * bm, bp * bm1 + bp1 * bm, bp1 * bm1
    A2 = a * a - T
    A1 = 2 * a * c0 - S
    A0 = c0 * c0 - P
    # A1**2 - 4*A2*A0 with the c0**2 terms cancelled analytically
    D = 4 * a * a * P - 4 * a * c0 * S + S * S + 4 * T * c0 * c0 - 4 * T * P
    return a, c0, A2, A1, A0, D


def _lex_key(x):
    x = complex(x)
    return (x.real, x.imag)


def _lex_positive(h):
    return h.real > 0 or (h.real == 0 and h.imag > 0)


def _null_vector(ar, bm, bp, d):
    """Null vector of ``[[-d, bm], [bp, -d]]`` where ``d**2 = bm * bp``."""
    if bm == 0 and bp == 0:
        return None
    if abs(bm) >= abs(bp):
        return np.array([bm, d], dtype=object if ar.exact else complex)
    return np.array([d, bp], dtype=object if ar.exact else complex)


@_in_precision
def solve_pair(red, guesses, max_iter=80):
    """Both roots of ``(z - alpha(z))**2 = beta_plus(z) beta_minus(z)`` near the guesses.

    The centre of the pair comes from a local quadratic model whose
    discriminant is formed without cancellation, so the splitting is
    accurate relative to its own size.  Roots separated by more than
    ``sqrt(eps)`` are then polished one at a time.  Labels follow the
    lexicographic order of the offsets (``z_plus`` is the larger).
    """
    ar = red.ar
    tol = 10 * ar.eps
    zc = ar.mean(guesses)
    it = 0
    for it in range(1, max_iter + 1):
        terms = _pair_terms(red.jet(zc))
        a, c0, A2, A1, A0, D = _quad(zc, terms)
        step = -A1 / (2 * A2)
        if abs(step) <= tol * (1 + abs(zc)):
            break
        zc = zc + step
    else:
        raise ReductionError(f"block n={red.n}: centre iteration did not converge")
    a0, a1, bm, bp, bm1, bp1, skew = terms
    h = ar.sqrt(D) / (2 * A2)
    zmid = zc + step
    if abs(h) > ar.sqrt_eps * max(1, abs(zmid)):
        roots = []
        for sign in (1, -1):
            z = zmid + sign * h
            for _ in range(max_iter):
                tz = _pair_terms(red.jet(z))
                a, c0, A2, A1, A0, D = _quad(z, tz)
                sq = ar.sqrt(D)
                den = -A1 - sq if abs(-A1 - sq) >= abs(-A1 + sq) else -A1 + sq
                w = 2 * A0 / den if den != 0 else 0 * z
                z = z + w
                if abs(w) <= tol * (1 + abs(z)):
                    break
            else:
                raise ReductionError(f"block n={red.n}: root polishing did not converge")
            # z - alpha(z) at the root, from the local model
            roots.append((z, a * w + c0, tz[3] + tz[5] * w, tz[2] + tz[4] * w))
        if _lex_key(roots[1][0]) > _lex_key(roots[0][0]):
            roots.reverse()
        (zp, dp, bpp, bmp), (zm, dm, bpm, bmm) = roots
        gamma = zp - zm
        z_mid = (zp + zm) / 2
    else:
        hp = h if _lex_positive(complex(h)) else -h
        a, c0 = 1 - a1, zc - a0
        wp, wm = step + hp, step - hp
        zp, zm = zmid + hp, zmid - hp
        # mean of z - alpha over the two roots, free of the rounding in c0
        dmean = (a * (bp * bm1 + bp1 * bm) - 2 * bp1 * bm1 * c0) / (2 * (a * a - bp1 * bm1))
        dp, dm = dmean + a * hp, dmean - a * hp
        bpp, bmp = bp + bp1 * wp, bm + bm1 * wp
        bpm, bmm = bp + bp1 * wm, bm + bm1 * wm
        gamma = 2 * hp
        z_mid = zmid
    xp = _null_vector(ar, bmp, bpp, dp)
    xm = _null_vector(ar, bmm, bpm, dm)
    if xp is None or xm is None:
        xm = ar.arr(np.array([1, 0]))
        xp = ar.arr(np.array([0, 1]))
    return PairSolution(zm, zp, gamma, z_mid, dm, dp, xm, xp, bm, bp, a0, skew, it)


@_in_precision
def solve_single(red, guess, max_iter=80):
    """Root of ``z = B(z)`` for a one-dimensional block (Newton)."""
    ar = red.ar
    z = ar.num(guess)
    for _ in range(max_iter):
        j = red.jet(z)
        step = -(z - j.B[0, 0]) / (1 - j.Bz[0, 0])
        z = z + step
        if abs(step) <= 10 * ar.eps * (1 + abs(z)):
            return z
    raise ReductionError(f"one-dimensional block n={red.n}: Newton iteration did not converge")


@dataclass
class DirichletSolution:
    z: object
    w: object
    iterations: int
    residual: float


def _dirichlet_system(red, z, w, row):
    """``(F, J)`` for the Floquet-Dirichlet equations in ``(z, w)``."""
    j = red.jet(z, w, floquet=True)
    d = red.floquet_offsets(w, "E")
    dd = [s + 2 * red._quad * w for s in red._slope_E]
    M = j.B.copy()
    M[0, 0] = M[0, 0] + d[0] - z
    M[1, 1] = M[1, 1] + d[1] - z
    Mz = j.Bz.copy()
    Mz[0, 0] = Mz[0, 0] - 1
    Mz[1, 1] = Mz[1, 1] - 1
    Mw = j.Bw.copy()
    Mw[0, 0] = Mw[0, 0] + dd[0]
    Mw[1, 1] = Mw[1, 1] + dd[1]

    def det(A):
        return A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]

    def ddet(A, dA):
        return dA[0, 0] * A[1, 1] + A[0, 0] * dA[1, 1] - dA[0, 1] * A[1, 0] - A[0, 1] * dA[1, 0]

    def nullv(A):
        return [A[0, 1], -A[0, 0]] if row == 0 else [-A[1, 1], A[1, 0]]

    q = [red.ell_E[i] + red.ell_R @ j.X[:, i] for i in range(2)]
    qz = [red.ell_R @ j.Xz[:, i] for i in range(2)]
    qw = [red.ell_R @ j.Xw[:, i] for i in range(2)]
    x, xz, xw = nullv(M), nullv(Mz), nullv(Mw)
    F1, F2 = det(M), q[0] * x[0] + q[1] * x[1]
    J = [
        [ddet(M, Mz), ddet(M, Mw)],
        [qz[0] * x[0] + qz[1] * x[1] + q[0] * xz[0] + q[1] * xz[1],
         qw[0] * x[0] + qw[1] * x[1] + q[0] * xw[0] + q[1] * xw[1]],
    ]
    return (F1, F2), J, j


@_in_precision
def solve_dirichlet(red, z_guess, max_iter=60):
    """Dirichlet eigenvalue near ``lambda0`` through a Floquet solution.

    A Floquet solution with multiplier different from its reciprocal
    satisfies the Dirichlet conditions exactly when it vanishes at ``x = 0``
    (Hill) or has equal components there (Dirac).  The unknowns are the
    spectral offset ``z`` and the Floquet shift ``w`` of the modes.
    """
    ar = red.ar
    z = ar.num(z_guess)
    j = red.jet(z)
    B = j.B
    q = [red.ell_E[i] + red.ell_R @ j.X[:, i] for i in range(2)]
    # frozen-coefficient solve: x ~ (q1, -q0) annihilates the Dirichlet functional
    if q[0] == 0 or q[1] == 0:
        w = 0 * z
    else:
        a0 = (B[0, 1] * q[0] - B[0, 0] * q[1]) / q[1]
        a1 = (B[1, 0] * q[1] - B[1, 1] * q[0]) / q[0]
        w = (a1 - a0) / (red._slope_E[1] - red._slope_E[0])
        z = red.floquet_offsets(w, "E")[0] - a0
    row = 0 if abs(B[0, 1]) >= abs(B[1, 0]) else 1
    tol = 10 * ar.eps
    for it in range(1, max_iter + 1):
        (F1, F2), J, _ = _dirichlet_system(red, z, w, row)
        det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
        if det == 0:
            if F1 == 0 and F2 == 0:
                return DirichletSolution(z, w, it, 0.0)
            raise ReductionError(f"block n={red.n}: singular Floquet-Dirichlet Jacobian")
        dz = -(J[1][1] * F1 - J[0][1] * F2) / det
        dw = -(-J[1][0] * F1 + J[0][0] * F2) / det
        z, w = z + dz, w + dw
        if abs(dz) <= tol * (1 + abs(z)) and abs(dw) <= tol * (1 + abs(w)):
            (F1, F2), _, _ = _dirichlet_system(red, z, w, row)
            return DirichletSolution(z, w, it, float(abs(F2)))
    raise ReductionError(f"block n={red.n}: Floquet-Dirichlet Newton iteration did not converge")
