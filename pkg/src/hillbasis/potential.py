"""Fourier-coefficient tables for Hill and Dirac potentials.

Hill potentials are pi-periodic and indexed on the even lattice,
``v(x) = sum_m V(m) exp(i m x)`` with ``m`` even.  Singular potentials
``v = w'`` carry the coefficients of ``w`` as provenance, ``V(m) = i m W(m)``.

Dirac potentials are the off-diagonal pair ``(P, Q)``, each given by its own
even-indexed table; no symmetry between them is assumed.
"""
from __future__ import annotations

import cmath
import math
import warnings
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HILL_REGULAR",
    "HILL_SINGULAR",
    "DIRAC",
    "PotentialError",
    "CoefficientWindowError",
    "DuplicateCoefficientWarning",
    "FourierPotential",
    "from_trig_coeffs",
    "from_w",
    "from_dirac_coeffs",
    "gasymov",
    "delta_comb",
    "mathieu",
    "four_harmonic_example",
    "random_trig_poly",
    "tail_energy",
]

HILL_REGULAR = "hill_regular"
HILL_SINGULAR = "hill_singular"
DIRAC = "dirac"
_KINDS = (HILL_REGULAR, HILL_SINGULAR, DIRAC)


class PotentialError(ValueError):
    """Invalid potential data."""


class CoefficientWindowError(PotentialError):
    """A coefficient was requested outside the materialized window."""

    def __init__(self, index, window):
        self.index = index
        self.window = window
        super().__init__(
            f"coefficient index {index} lies outside the declared window |m| <= {window}"
        )


class DuplicateCoefficientWarning(UserWarning):
    pass


def _check_even(keys, what="coefficient"):
    for k in keys:
        if int(k) != k:
            raise PotentialError(f"{what} index {k!r} is not an integer")
        if int(k) % 2:
            raise PotentialError(f"{what} index {int(k)} is odd; indices must be even")


def _clean(table):
    return {int(k): complex(v) for k, v in table.items() if complex(v) != 0}


@dataclass(frozen=True, eq=False)
class FourierPotential:
    """Finitely supported Fourier table of a Hill or Dirac potential.

    Parameters
    ----------
    kind : str
        One of ``"hill_regular"``, ``"hill_singular"``, ``"dirac"``.
    V : dict
        Hill coefficients keyed by even integers.
    W : dict or None
        Coefficients of the antiderivative ``w`` when ``v = w'``.
    P, Q : dict
        Dirac off-diagonal coefficients keyed by even integers.
    window : int or None
        When set, coefficient lookups with ``|m| > window`` raise
        :class:`CoefficientWindowError` instead of returning zero.
    meta : dict
        Family name, parameters and derived bounds.
    """

    kind: str
    V: Mapping[int, complex] = field(default_factory=dict)
    W: Mapping[int, complex] | None = None
    P: Mapping[int, complex] = field(default_factory=dict)
    Q: Mapping[int, complex] = field(default_factory=dict)
    window: int | None = None
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        _check_even(self.V)
        _check_even(self.P)
        _check_even(self.Q)
        if self.W is not None:
            _check_even(self.W)
            for m, w in self.W.items():
                expect = 1j * m * w
                if abs(self.V.get(m, 0) - expect) > 1e-12 * abs(expect):
                    raise PotentialError(f"V({m}) does not equal i*m*W(m)")
            if self.V.get(0, 0) != 0:
                raise PotentialError("singular potential must have V(0) = 0")

    @property
    def is_dirac(self):
        return self.kind == DIRAC

    @property
    def is_singular(self):
        return self.kind == HILL_SINGULAR

    @property
    def support_bound(self):
        keys = list(self.P) + list(self.Q) if self.is_dirac else list(self.V)
        return max((abs(k) for k in keys), default=0)

    def _lookup(self, table, m):
        m = int(m)
        if self.window is not None and abs(m) > self.window:
            raise CoefficientWindowError(m, self.window)
        if m % 2:
            return 0j
        return table.get(m, 0j)

    def coeff(self, m):
        """Hill coefficient ``V(m)``; zero for odd ``m``."""
        return self._lookup(self.V, m)

    def p(self, k):
        return self._lookup(self.P, k)

    def q(self, k):
        return self._lookup(self.Q, k)

    def table(self, which, indices):
        """Vectorized lookup of ``V``, ``P`` or ``Q`` on an integer array."""
        idx = np.asarray(indices, dtype=np.int64)
        src = {"V": self.V, "P": self.P, "Q": self.Q}[which]
        if idx.size == 0:
            return np.zeros(idx.shape, dtype=complex)
        bound = int(np.abs(idx).max())
        if self.window is not None and bound > self.window:
            bad = int(idx.flat[np.argmax(np.abs(idx))])
            raise CoefficientWindowError(bad, self.window)
        dense = np.zeros(2 * bound + 1, dtype=complex)
        for m, c in src.items():
            if abs(m) <= bound:
                dense[m + bound] = c
        return dense[idx + bound]

    def reflected(self):
        """Potential with ``V(m) -> V(-m)`` (``P``, ``Q`` likewise)."""
        flip = lambda t: {-k: v for k, v in t.items()}
        W = None if self.W is None else flip(self.W)
        if W is not None:
            W = {k: -v for k, v in W.items()}
        return FourierPotential(
            self.kind, flip(self.V), W, flip(self.P), flip(self.Q), self.window, dict(self.meta)
        )

    def with_window(self, window):
        return FourierPotential(
            self.kind, dict(self.V), None if self.W is None else dict(self.W),
            dict(self.P), dict(self.Q), window, dict(self.meta),
        )

    def evaluate(self, x):
        """Pointwise values of a regular Hill potential on ``x``."""
        if self.kind != HILL_REGULAR:
            raise PotentialError("pointwise evaluation is only defined for regular Hill potentials")
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for m, c in self.V.items():
            out += c * np.exp(1j * m * x)
        return out

    def __repr__(self):
        name = self.meta.get("family", "table")
        return f"FourierPotential(kind={self.kind!r}, family={name!r}, support_bound={self.support_bound})"


def _pairs(coeffs):
    if isinstance(coeffs, Mapping):
        return list(coeffs.items())
    return [tuple(item) for item in coeffs]


def from_trig_coeffs(coeffs, kind=HILL_REGULAR):
    """Hill potential from a table of even-indexed trigonometric coefficients.

    ``coeffs`` may be a mapping or an iterable of ``(m, value)`` pairs.  A
    repeated index keeps the last value and emits a
    :class:`DuplicateCoefficientWarning`.
    """
    if kind == DIRAC:
        raise PotentialError("use from_dirac_coeffs for Dirac potentials")
    pairs = _pairs(coeffs)
    _check_even([m for m, _ in pairs])
    table = {}
    for m, c in pairs:
        m = int(m)
        if m in table:
            warnings.warn(
                f"duplicate coefficient index {m}: {table[m]!r} replaced by {complex(c)!r}",
                DuplicateCoefficientWarning,
                stacklevel=2,
            )
        table[m] = complex(c)
    return FourierPotential(kind, _clean(table), meta={"family": "table"})


def from_w(W):
    """Singular Hill potential ``v = w'`` from the coefficients of ``w``."""
    W = dict(W)
    _check_even(W)
    W = {int(m): complex(w) for m, w in W.items()}
    V = _clean({m: 1j * m * w for m, w in W.items()})
    return FourierPotential(HILL_SINGULAR, V, W, meta={"family": "w-table"})


def _w_from_v(V):
    return {m: c / (1j * m) for m, c in V.items() if m != 0}


def from_dirac_coeffs(P, Q):
    P, Q = dict(P), dict(Q)
    _check_even(P, "P coefficient")
    _check_even(Q, "Q coefficient")
    return FourierPotential(DIRAC, P=_clean(P), Q=_clean(Q), meta={"family": "table"})


def gasymov(c, K, A=None, strict=False):
    """One-sided singular potential ``sum_{k=1}^K c(k) exp(2ikx)``.

    Parameters
    ----------
    c : sequence or callable
        ``c[k-1]`` (sequence) or ``c(k)`` (callable) for ``k = 1..K``.
    K : int
        Number of harmonics kept; ``V(m) = 0`` for ``m > 2K``.
    A : float, optional
        Declared two-sided bound ``1/A <= |c(k)| <= A``.  When omitted the
        tightest bound is derived; a vanishing ``c(k)`` is rejected either way.
    strict : bool
        Declare the window ``|m| <= 2K`` so that lookups beyond it fail.
    """
    K = int(K)
    if K < 1:
        raise PotentialError("gasymov cutoff K must be >= 1")
    vals = [complex(c(k)) if callable(c) else complex(c[k - 1]) for k in range(1, K + 1)]
    mags = [abs(v) for v in vals]
    for k, a in enumerate(mags, start=1):
        if a == 0:
            raise PotentialError(f"c({k}) = 0 violates the lower bound 1/A <= |c(k)|")
    if A is None:
        A = max(max(mags), 1.0 / min(mags), 1.0)
    for k, a in enumerate(mags, start=1):
        if not (1.0 / A <= a <= A):
            raise PotentialError(f"|c({k})| = {a:g} lies outside [1/A, A] with A = {A:g}")
    V = {2 * k: v for k, v in enumerate(vals, start=1)}
    return FourierPotential(
        HILL_SINGULAR,
        V,
        _w_from_v(V),
        window=2 * K if strict else None,
        meta={"family": "gasymov", "K": K, "A": float(A)},
    )


def delta_comb(points, weights, K, strict=False):
    """Periodized weighted delta comb with its mean removed.

    ``v = sum_alpha g(alpha) delta(x - alpha - k pi) - (1/pi) sum g``, so that
    ``V(k) = (1/pi) sum_alpha g(alpha) exp(i k alpha)`` for even ``k != 0`` and
    ``V(0) = 0``.  Coefficients are kept for ``|k| <= 2K``.

    ``meta["dominant"]`` records whether one weight exceeds the sum of the
    others in modulus; when it does, ``meta["A"]`` is the derived two-sided
    bound on ``|V(k)|``.
    """
    points = [float(a) for a in points]
    weights = [complex(g) for g in weights]
    if len(points) != len(weights):
        raise PotentialError("points and weights differ in length")
    if not points:
        raise PotentialError("delta comb needs at least one point")
    for a in points:
        if not (0.0 < a < math.pi):
            raise PotentialError(f"delta point {a!r} is outside the open interval (0, pi)")
    if len(set(points)) != len(points):
        raise PotentialError("delta points must be distinct")
    K = int(K)
    mags = [abs(g) for g in weights]
    top = max(range(len(mags)), key=mags.__getitem__)
    rest = sum(mags) - mags[top]
    dominant = mags[top] > rest
    A = max(math.pi / (mags[top] - rest), sum(mags) / math.pi) if dominant else None
    V = {}
    for k in range(-2 * K, 2 * K + 1, 2):
        if k == 0:
            continue
        V[k] = sum(g * cmath.exp(1j * k * a) for a, g in zip(points, weights)) / math.pi
    V = _clean(V)
    return FourierPotential(
        HILL_SINGULAR,
        V,
        _w_from_v(V),
        window=2 * K if strict else None,
        meta={"family": "delta_comb", "K": K, "dominant": dominant, "A": A,
              "points": tuple(points), "weights": tuple(weights)},
    )


def mathieu(q=1.0):
    """``v = 2 q cos 2x``."""
    pot = from_trig_coeffs({2: q, -2: q})
    return FourierPotential(pot.kind, pot.V, meta={"family": "mathieu", "q": complex(q)})


def four_harmonic_example(reading="literal"):
    """Four-term trigonometric potential that admits no basis of root functions.

    The printed form lists ``2 exp(2ix)`` and ``-3 exp(2ix)`` together.  The
    ``"literal"`` reading keeps the last of the two (``V(2) = -3``); the
    ``"corrected"`` reading moves the first to ``exp(-2ix)``.
    """
    if reading == "literal":
        pairs = [(-4, 5), (2, 2), (2, -3), (4, 4)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DuplicateCoefficientWarning)
            pot = from_trig_coeffs(pairs)
    elif reading == "corrected":
        pot = from_trig_coeffs([(-4, 5), (-2, 2), (2, -3), (4, 4)])
    else:
        raise PotentialError(f"unknown reading {reading!r}")
    return FourierPotential(pot.kind, pot.V, meta={"family": "four_harmonic", "reading": reading})


def random_trig_poly(rng, max_harmonics=6, degree=12, scale=1.0):
    """Random complex Hill trigonometric polynomial.

    Draws between 1 and ``max_harmonics`` distinct nonzero even indices with
    ``|m| <= degree`` and standard complex normal coefficients times ``scale``.
    """
    lattice = [m for m in range(-degree, degree + 1, 2) if m != 0]
    count = int(rng.integers(1, max_harmonics + 1))
    idx = rng.choice(lattice, size=count, replace=False)
    vals = scale * (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / math.sqrt(2)
    pot = from_trig_coeffs(dict(zip(idx.tolist(), vals.tolist())))
    return FourierPotential(pot.kind, pot.V, meta={"family": "random"})


def tail_energy(pot, N):
    """l2 tail ``(sum_{|m| >= N} |W(m)|^2)^(1/2)`` of the singular provenance."""
    if pot.W is None:
        raise PotentialError("no singular provenance")
    return math.sqrt(sum(abs(w) ** 2 for m, w in pot.W.items() if abs(m) >= N))
