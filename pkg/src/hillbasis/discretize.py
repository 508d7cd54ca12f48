"""Fourier-Galerkin truncations of Hill and Dirac operators on [0, pi].

Bases (all orthonormal for the normalized inner product ``(1/pi) int_0^pi``):

* Hill, periodic / anti-periodic: ``exp(ikx)`` with ``k`` even / odd.
* Hill, Dirichlet: ``sqrt(2) sin(nx)``, ``n >= 1``.
* Dirac, periodic / anti-periodic: ``e1_n = (exp(-inx), 0)`` and
  ``e2_n = (0, exp(inx))`` with ``n`` even / odd.
* Dirac, Dirichlet: ``g_n = (e1_n + e2_n) / sqrt(2)``, ``n`` in Z.

Block data near each free eigenvalue is refined through the Schur complement
of the truncated matrix onto the free eigenspace ``E_n``.  This 2x2 (or 1x1)
matrix ``B(z)`` has the structure ``[[alpha, beta_minus], [beta_plus, alpha]]``
and its entries are computed from diagonally dominant solves, so the splitting
``gamma`` keeps full relative accuracy even when it is far below the
``sqrt(eps * ||A||)`` floor of a dense eigensolver.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg as sla

from ._arith import Arithmetic, log10_abs
from .potential import FourierPotential, PotentialError
from .reduction import (BlockReduction, ReductionError, solve_dirichlet, solve_pair,
                        solve_single)

__all__ = [
    "HILL",
    "DIRAC",
    "BoundaryCondition",
    "Tolerances",
    "TruncatedOperator",
    "EigenSystem",
    "Localization",
    "SpectralBlock",
    "ProjectionSystem",
    "BlockAssembly",
    "DiscretizationError",
    "EigenSolveError",
    "LocalizationError",
    "ContourError",
    "index_set",
    "free_value",
    "build_matrix",
    "eigensolve",
    "localize",
    "BlockReduction",
    "solve_pair",
    "solve_single",
    "solve_dirichlet",
    "jordan_threshold",
    "riesz_projection",
    "box_projection",
    "spectral_projector",
    "free_projection",
    "projection_system",
    "assemble_blocks",
    "associated_vector",
    "option2_vectors",
]

HILL = "hill"
DIRAC = "dirac"

M, M1, M2 = "M", "M1", "M2"


class DiscretizationError(RuntimeError):
    pass


class EigenSolveError(DiscretizationError):
    pass


class LocalizationError(DiscretizationError):
    pass


class ContourError(DiscretizationError):
    pass


class BoundaryCondition(str, Enum):
    PER_PLUS = "PerPlus"
    PER_MINUS = "PerMinus"
    DIRICHLET = "Dirichlet"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"per+": cls.PER_PLUS, "periodic": cls.PER_PLUS,
                   "per-": cls.PER_MINUS, "antiperiodic": cls.PER_MINUS,
                   "anti-periodic": cls.PER_MINUS, "dir": cls.DIRICHLET}
        key = str(value).strip()
        for bc in cls:
            if key.lower() == bc.value.lower():
                return bc
        if key.lower() in aliases:
            return aliases[key.lower()]
        raise ValueError(f"unknown boundary condition {value!r}")

    @property
    def periodic_type(self):
        return self is not BoundaryCondition.DIRICHLET


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by the pipeline.

    ``jordan_tol`` is relative: a block counts as degenerate when
    ``|gamma| <= jordan_tol * max(1, |lambda0|)``.  ``None`` selects a
    threshold from the working precision and the size of the reduced
    off-diagonal entries (see :func:`jordan_threshold`).
    ``escalate_tol`` triggers multiprecision for pairs split by less than
    that relative amount; ``precision="double"`` disables escalation.
    """

    series_tol: float = 1e-10
    proj_tol: float = 1e-8
    jordan_tol: float | None = None
    offdiag_tol: float = 1e-6
    t_floor: float = 1e-3
    slope_tol: float = 0.5
    growth_floor: float = 1.0
    kappa_div: float = 1e3
    fund_slack: float = 1e-6
    trunc_tol: float = 1e-6
    xi_tol: float = 1e-6
    zero_tol: float = 0.0
    residual_tol: float = 1e-10
    quad_points: int = 64
    max_quad_points: int = 1024
    min_blocks: int = 8
    lp_grid: int = 2048
    escalate_tol: float = 1e-5
    max_dps: int = 400
    precision: str = "auto"
    validate_precision: bool = False

    def replace(self, **kw):
        unknown = set(kw) - set(self.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return Tolerances(**{**self.__dict__, **kw})

    def as_dict(self):
        return dict(self.__dict__)


def _op_kind(pot):
    return DIRAC if pot.is_dirac else HILL


def index_set(bc, operator_kind, limit):
    """Indices of ``Gamma_bc`` with ``|n| <= limit``."""
    bc = BoundaryCondition.parse(bc)
    limit = int(limit)
    if operator_kind == HILL:
        if bc is BoundaryCondition.PER_PLUS:
            return list(range(0, limit + 1, 2))
        if bc is BoundaryCondition.PER_MINUS:
            return list(range(1, limit + 1, 2))
        return list(range(1, limit + 1))
    if bc is BoundaryCondition.PER_PLUS:
        return [n for n in range(-limit, limit + 1) if n % 2 == 0]
    if bc is BoundaryCondition.PER_MINUS:
        return [n for n in range(-limit, limit + 1) if n % 2]
    return list(range(-limit, limit + 1))


def free_value(n, operator_kind):
    return float(n * n) if operator_kind == HILL else float(n)


def block_dimension(bc):
    return 2 if BoundaryCondition.parse(bc).periodic_type else 1


def s_dimension(bc, operator_kind, n_star):
    """Dimension of the low-lying spectral subspace for a given level."""
    bc = BoundaryCondition.parse(bc)
    if operator_kind == HILL:
        return n_star + 1 if bc is BoundaryCondition.PER_PLUS else n_star
    if bc is BoundaryCondition.PER_PLUS:
        return 2 * n_star + 2
    if bc is BoundaryCondition.PER_MINUS:
        return 2 * n_star
    return 2 * n_star + 1


@dataclass(eq=False)
class TruncatedOperator:
    operator_kind: str
    bc: BoundaryCondition
    basis_indices: tuple
    free_diag: np.ndarray
    coupling: np.ndarray
    cutoff: int
    potential: FourierPotential | None = None

    @property
    def matrix(self):
        return np.diag(self.free_diag.astype(complex)) + self.coupling

    @property
    def truncation(self):
        return len(self.basis_indices)

    def position(self, label):
        try:
            return self._positions[label]
        except AttributeError:
            self._positions = {lab: i for i, lab in enumerate(self.basis_indices)}
            return self._positions[label]

    def block_positions(self, n):
        if self.bc is BoundaryCondition.DIRICHLET:
            return [self.position(n)]
        if self.operator_kind == HILL:
            return [self.position(-n)] if n == 0 else [self.position(-n), self.position(n)]
        return [self.position((1, n)), self.position((2, n))]


def _half_interval_integral(s):
    """``(1/pi) int_0^pi exp(i s x) dx`` for integer arrays ``s``."""
    s = np.asarray(s)
    out = np.zeros(s.shape, dtype=complex)
    out[s == 0] = 1.0
    odd = (s % 2) != 0
    out[odd] = 2j / (math.pi * s[odd])
    return out


def _cos_moment(pot, p):
    """``(1/pi) int_0^pi cos(p x) v(x) dx`` for an integer array ``p``."""
    p = np.asarray(p)
    out = np.zeros(p.shape, dtype=complex)
    even = (p % 2) == 0
    if even.any():
        pe = p[even]
        out[even] = 0.5 * (pot.table("V", pe) + pot.table("V", -pe))
    odd = ~even
    if odd.any():
        po = p[odd]
        acc = np.zeros(po.shape, dtype=complex)
        for k, c in pot.V.items():
            acc += c * (1.0 / (k + po) + 1.0 / (k - po))
        out[odd] = 1j / math.pi * acc
    return out


def _exp_moments(pot, table, s):
    """``sum_k T(k) I(k + s)`` for the Dirac Dirichlet entries."""
    s = np.asarray(s)
    out = np.zeros(s.shape, dtype=complex)
    even = (s % 2) == 0
    if even.any():
        out[even] = pot.table(table, -s[even])
    odd = ~even
    if odd.any():
        so = s[odd]
        acc = np.zeros(so.shape, dtype=complex)
        for k, c in (pot.P if table == "P" else pot.Q).items():
            acc += c * _half_interval_integral(k + so)
        out[odd] = acc
    return out


def build_matrix(pot, bc, cutoff):
    """Truncated Galerkin matrix of ``L_bc(v)``.

    Raises
    ------
    CoefficientWindowError
        When an entry needs a coefficient outside the potential's window.
    """
    bc = BoundaryCondition.parse(bc)
    cutoff = int(cutoff)
    if cutoff < 1:
        raise ValueError("cutoff must be a positive integer")
    kind = _op_kind(pot)
    if kind == HILL:
        if bc.periodic_type:
            k = np.arange(-cutoff, cutoff + 1)
            k = k[(k % 2) == (0 if bc is BoundaryCondition.PER_PLUS else 1)]
            C = pot.table("V", k[:, None] - k[None, :])
            return TruncatedOperator(kind, bc, tuple(k.tolist()), (k * k).astype(float), C, cutoff, pot)
        n = np.arange(1, cutoff + 1)
        C = _cos_moment(pot, n[:, None] - n[None, :]) - _cos_moment(pot, n[:, None] + n[None, :])
        return TruncatedOperator(kind, bc, tuple(n.tolist()), (n * n).astype(float), C, cutoff, pot)

    ns = np.array(index_set(bc, DIRAC, cutoff))
    if bc.periodic_type:
        # e1_m couples to e2_n only through p(-m-n), q(m+n): ordering e2_n by -n keeps
        # the matrix banded, which the multiprecision band solver relies on
        labels = sorted(((c, int(n)) for n in ns for c in (1, 2)), key=lambda l: (l[1] if l[0] == 1 else -l[1], l[0]))
        comp = np.array([c for c, _ in labels])
        idx = np.array([n for _, n in labels])
        C = np.zeros((len(labels), len(labels)), dtype=complex)
        one, two = comp == 1, comp == 2
        # <e1_m, v e2_n> = p(-m-n),  <e2_m, v e1_n> = q(m+n)
        C[np.ix_(one, two)] = pot.table("P", -(idx[one][:, None] + idx[two][None, :]))
        C[np.ix_(two, one)] = pot.table("Q", idx[two][:, None] + idx[one][None, :])
        return TruncatedOperator(kind, bc, tuple(labels), idx.astype(float), C, cutoff, pot)
    S = ns[:, None] + ns[None, :]
    C = 0.5 * (_exp_moments(pot, "P", S) + _exp_moments(pot, "Q", -S))
    return TruncatedOperator(kind, bc, tuple(ns.tolist()), ns.astype(float), C, cutoff, pot)


@dataclass
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __iter__(self):
        return iter(zip(self.values, self.vectors.T))

    def __len__(self):
        return len(self.values)


def eigensolve(op, residual_tol=1e-10):
    """All eigenpairs of a truncated operator (or a bare square matrix)."""
    A = op.matrix if isinstance(op, TruncatedOperator) else np.asarray(op, dtype=complex)
    if not np.all(np.isfinite(A)):
        raise EigenSolveError("matrix has non-finite entries")
    try:
        w, v = sla.eig(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"dense eigensolver failed on a {A.shape[0]}x{A.shape[0]} matrix: {exc}") from exc
    v = v / np.linalg.norm(v, axis=0)
    res = np.linalg.norm(A @ v - v * w, axis=0)
    scale = max(np.linalg.norm(A, 2), 1.0)
    worst = float(res.max(initial=0.0))
    if worst > residual_tol * scale:
        raise EigenSolveError(
            f"eigenpair residual {worst:.3e} exceeds {residual_tol:g} * ||A|| = {residual_tol * scale:.3e}"
        )
    return EigenSystem(w, v, res)


@dataclass
class Localization:
    n_star: int
    operator_kind: str
    bc: BoundaryCondition
    singular: bool
    n_max: int
    discs: dict = field(default_factory=dict)      # n -> (center, radius)
    assignment: dict = field(default_factory=dict)  # n -> eigenvalues in the disc
    box_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    @property
    def box_half_width(self):
        return box_half_width(self.n_star, self.operator_kind)

    @property
    def box_dimension(self):
        return len(self.box_eigenvalues)

    @property
    def blocks(self):
        return sorted(self.assignment, key=lambda n: (abs(n), n))


def box_half_width(N, operator_kind):
    # the Dirac box is taken as |x|, |y| < N + 1/4 so that it stays disjoint from D(n, 1/4), |n| > N
    return N * N + N / 2 if operator_kind == HILL else N + 0.25


def disc_radius(n, n_star, operator_kind, singular):
    if operator_kind == DIRAC:
        return 0.25
    return abs(n) / 4 if singular else n_star / 2


def _ceiling(n_max, operator_kind):
    return n_max * n_max + 2 * n_max if operator_kind == HILL else n_max + 0.5


def localize(values, bc, operator_kind, singular=False, n_max=None, cutoff=None):
    """Smallest level ``N*`` for which the spectrum splits into the box and discs.

    Only eigenvalues below the trusted ceiling (about ``n_max**2`` for Hill,
    ``n_max`` for Dirac) are examined; the default ``n_max`` is ``cutoff // 2``.
    """
    bc = BoundaryCondition.parse(bc)
    values = np.asarray(values, dtype=complex)
    if n_max is None:
        if cutoff is None:
            raise ValueError("localize needs n_max or cutoff")
        n_max = int(cutoff) // 2
    mult = block_dimension(bc)
    ceiling = _ceiling(n_max, operator_kind)
    trusted = values[np.abs(values.real) < ceiling] if operator_kind == DIRAC else values[values.real < ceiling]
    start = 2 if operator_kind == HILL else 0
    for N in range(start, n_max, 2):
        h = box_half_width(N, operator_kind)
        in_box = (np.abs(trusted.real) < h) & (np.abs(trusted.imag) < h)
        used = in_box.copy()
        discs, assignment = {}, {}
        ok = True
        for n in index_set(bc, operator_kind, n_max):
            if abs(n) <= N:
                continue
            c = free_value(n, operator_kind)
            r = disc_radius(n, N, operator_kind, singular)
            inside = np.abs(trusted - c) < r
            if inside.sum() != mult or (used & inside).any():
                ok = False
                break
            used |= inside
            discs[n] = (c, r)
            assignment[n] = trusted[inside]
        if ok and used.all() and assignment:
            return Localization(N, operator_kind, bc, singular, n_max, discs, assignment, trusted[in_box])
    raise LocalizationError(
        f"localization failed at this truncation: no level N* < {n_max} separates the spectrum"
    )


def _matrix_of(op):
    return op.matrix if isinstance(op, TruncatedOperator) else np.asarray(op, dtype=complex)


def _check_contour(eigs, center, radius, dist_tol):
    d = np.abs(np.abs(eigs - center) - radius)
    if d.size and d.min() < dist_tol:
        bad = eigs[np.argmin(d)]
        raise ContourError(f"eigenvalue {bad:.6g} lies within {dist_tol:g} of the contour |z - {center}| = {radius}")


def riesz_projection(op, center, radius, quad_points=64, proj_tol=1e-8, max_points=1024,
                     eigenvalues=None, dist_tol=None):
    """Trapezoidal approximation of ``(1/2 pi i) \\oint_{|z-c|=r} (z - L)^{-1} dz``.

    The node count is doubled from ``quad_points`` until the idempotency
    defect ``||P^2 - P||`` drops below ``proj_tol`` (cap ``max_points``).
    """
    A = _matrix_of(op)
    N = A.shape[0]
    eigs = np.linalg.eigvals(A) if eigenvalues is None else np.asarray(eigenvalues)
    _check_contour(eigs, center, radius, radius * 1e-3 if dist_tol is None else dist_tol)
    Ac = A - center * np.eye(N)
    q = int(quad_points)
    I = np.eye(N)
    while True:
        P = np.zeros((N, N), dtype=complex)
        for th in 2 * np.pi * (np.arange(q) + 0.5) / q:
            w = radius * np.exp(1j * th)
            P += w * np.linalg.solve(w * I - Ac, I)
        P /= q
        defect = np.linalg.norm(P @ P - P, 2)
        if defect < proj_tol:
            return P
        if q >= max_points:
            raise ContourError(f"idempotency defect {defect:.3e} after {q} nodes exceeds {proj_tol:g}")
        q *= 2


def box_projection(op, half_width, quad_points=64, proj_tol=1e-8, max_points=1024, eigenvalues=None):
    """Contour projection onto the spectrum inside ``|Re z|, |Im z| < half_width``."""
    A = _matrix_of(op)
    N = A.shape[0]
    h = float(half_width)
    eigs = np.linalg.eigvals(A) if eigenvalues is None else np.asarray(eigenvalues)
    edge = np.minimum(np.abs(np.abs(eigs.real) - h), np.abs(np.abs(eigs.imag) - h))
    if eigs.size and edge.min() < 1e-3:
        raise ContourError(f"eigenvalue {eigs[np.argmin(edge)]:.6g} lies on the box boundary {h:g}")
    corners = [h * (1 - 1j), h * (1 + 1j), h * (-1 + 1j), h * (-1 - 1j)]
    I = np.eye(N)
    q = int(quad_points)
    while True:
        x, wts = np.polynomial.legendre.leggauss(q)
        P = np.zeros((N, N), dtype=complex)
        for a, b in zip(corners, corners[1:] + corners[:1]):
            zs = 0.5 * (a + b) + 0.5 * (b - a) * x
            for z, wt in zip(zs, wts):
                P += wt * 0.5 * (b - a) * np.linalg.solve(z * I - A, I)
        P /= 2j * np.pi
        defect = np.linalg.norm(P @ P - P, 2)
        if defect < proj_tol:
            return P
        if q >= max_points:
            raise ContourError(f"box projection defect {defect:.3e} after {q} nodes per side")
        q *= 2


def spectral_projector(op, selected):
    """Projector built from eigenpairs: ``V[:, sel] @ inv(V)[sel, :]``.

    ``selected`` is a boolean mask or a predicate on eigenvalues.
    """
    A = _matrix_of(op)
    w, V = sla.eig(A)
    sel = np.array([bool(selected(x)) for x in w]) if callable(selected) else np.asarray(selected, bool)
    Vinv = np.linalg.inv(V)
    return V[:, sel] @ Vinv[sel, :]


def free_projection(op, n):
    P0 = np.zeros((op.truncation, op.truncation))
    P0[op.block_positions(n), op.block_positions(n)] = 1.0
    return P0


@dataclass
class ProjectionSystem:
    P: dict
    P0: dict
    S: np.ndarray | None
    ranks: dict
    s_rank: int | None
    deviation_norms: dict
    norms: dict
    n_star: int

    def indices(self):
        return sorted(self.P, key=lambda n: (abs(n), n))


def _rank(P):
    return int(round(float(np.trace(P).real)))


def projection_system(op, loc, tol=None, include_box=True, eigenvalues=None):
    tol = tol or Tolerances()
    eigs = np.linalg.eigvals(op.matrix) if eigenvalues is None else eigenvalues
    P, P0, ranks, dev, norms = {}, {}, {}, {}, {}
    for n in loc.blocks:
        c, r = loc.discs[n]
        Pn = riesz_projection(op, c, r, tol.quad_points, tol.proj_tol, tol.max_quad_points, eigenvalues=eigs)
        P[n] = Pn
        P0[n] = free_projection(op, n)
        ranks[n] = _rank(Pn)
        dev[n] = float(np.linalg.norm(Pn - P0[n], 2))
        norms[n] = float(np.linalg.norm(Pn, 2))
    S = s_rank = None
    if include_box:
        S = box_projection(op, loc.box_half_width, tol.quad_points, tol.proj_tol, tol.max_quad_points, eigs)
        s_rank = _rank(S)
    return ProjectionSystem(P, P0, S, ranks, s_rank, dev, norms, loc.n_star)


@dataclass
class SpectralBlock:
    """Per-index data of the pair of eigenvalues near ``lambda0_n``.

    Offsets ``z_minus``, ``z_plus``, ``z_star``, ``z_mu`` are relative to
    ``lambda0``; the absolute eigenvalues are derived properties.  The
    differences ``mu - lambda_pm`` are stored separately because they can be
    far below the rounding level of the offsets themselves.  Blocks computed
    in multiprecision keep the unrounded values in ``exact``.
    """

    n: int
    lambda0: float
    z_minus: complex
    z_plus: complex
    gamma: complex
    z_star: complex
    z_mu: complex | None
    u_minus: np.ndarray
    u_plus: np.ndarray
    block_class: str
    compression: np.ndarray | None = None
    beta_minus_reduced: complex = 0j
    beta_plus_reduced: complex = 0j
    residuals: dict = field(default_factory=dict)
    accepted: bool = True
    drift: float | None = None
    dmu_minus: complex | None = None
    dmu_plus: complex | None = None
    mu_source: str | None = None
    dps: int | None = None
    exact: dict | None = None

    @property
    def lambda_minus(self):
        return self.lambda0 + self.z_minus

    @property
    def lambda_plus(self):
        return self.lambda0 + self.z_plus

    @property
    def mu(self):
        return None if self.z_mu is None else self.lambda0 + self.z_mu

    @property
    def delta(self):
        """``mu - lambda_star`` with ``lambda_star`` the midpoint of the pair."""
        if self.z_mu is None:
            return None
        if self.dmu_plus is not None:
            return (self.dmu_plus + self.dmu_minus) / 2
        return self.z_mu - self.z_star

    @property
    def mu_minus_lambda_plus(self):
        if self.z_mu is None:
            return None
        return self.dmu_plus if self.dmu_plus is not None else self.z_mu - self.z_plus

    @property
    def mu_minus_lambda_minus(self):
        if self.z_mu is None:
            return None
        return self.dmu_minus if self.dmu_minus is not None else self.z_mu - self.z_minus

    def swapped(self):
        """Same block with the labels of the two eigenvalues exchanged."""
        ex = None
        if self.exact is not None:
            ex = dict(self.exact)
            for a, b in (("z_minus", "z_plus"), ("u_minus", "u_plus"), ("dmu_minus", "dmu_plus")):
                if a in ex or b in ex:
                    ex[a], ex[b] = self.exact.get(b), self.exact.get(a)
            if "gamma" in ex:
                ex["gamma"] = -ex["gamma"]
        return replace(
            self, z_minus=self.z_plus, z_plus=self.z_minus, gamma=-self.gamma,
            u_minus=self.u_plus, u_plus=self.u_minus, residuals=dict(self.residuals),
            dmu_minus=self.dmu_plus, dmu_plus=self.dmu_minus, exact=ex,
        )


@dataclass
class BlockAssembly:
    potential: FourierPotential
    bc: BoundaryCondition
    cutoff: int
    op: TruncatedOperator
    dirichlet_op: TruncatedOperator | None
    eigen: EigenSystem
    localization: Localization
    blocks: list
    projections: ProjectionSystem | None
    tolerances: Tolerances
    excluded: list = field(default_factory=list)

    @property
    def n_star(self):
        return self.localization.n_star

    def block(self, n):
        for b in self.blocks:
            if b.n == n:
                return b
        raise KeyError(n)

    def __iter__(self):
        return iter(self.blocks)


def _unit(v):
    return v / np.linalg.norm(v)


def _to_complex(a):
    return np.array([complex(x) for x in a], dtype=complex)


def _schur_pair(A, lam0, centre, radius):
    N = A.shape[0]
    T, Z, sdim = sla.schur(A - lam0 * np.eye(N), output="complex",
                           sort=lambda x: abs(x - centre) < radius)
    if sdim != 2:
        raise DiscretizationError(f"invariant subspace near {lam0} has dimension {sdim}, expected 2")
    return T[:2, :2], Z[:, :2]


def jordan_threshold(tol, arith, lam0, beta=None):
    """Absolute splitting below which a pair is treated as degenerate.

    With an explicit ``jordan_tol`` this is ``jordan_tol * max(1, |lambda0|)``.
    Otherwise it follows the sensitivity of ``gamma**2 = 4 beta^+ beta^-``
    to an absolute error ``eps * scale`` in the reduced entries:
    ``1e3 * sqrt(eps * scale * max(|beta^-|, |beta^+|, eps * scale))``.
    Without ``beta`` the worst case ``|beta| = scale`` gives
    ``1e3 * sqrt(eps) * scale``.
    """
    scale = max(1.0, abs(lam0))
    if tol.jordan_tol is not None:
        return tol.jordan_tol * scale
    eps = arith.eps
    big = scale if beta is None else max(max(abs(b) for b in beta), eps * scale)
    return 1e3 * (eps * scale * big) ** 0.5


_EPS = float(np.finfo(float).eps)


def _needed_dps(sol, lam0, tol):
    """Working precision for a pair, or ``None`` when double suffices."""
    scale = max(1.0, abs(lam0))
    g, bm, bp = abs(sol.gamma), abs(sol.beta_minus), abs(sol.beta_plus)
    double_thr = 1e3 * math.sqrt(_EPS * scale * max(bm, bp, _EPS * scale))
    tiny = 0 < g < max(tol.escalate_tol * scale, double_thr) or (g == 0 and bm > 0 and bp > 0)
    if not tiny:
        return None
    smallest = min(x for x in (g, bm, bp, scale) if x > 0) / scale
    digits = max(0.0, -log10_abs(smallest))
    return int(40 + math.ceil(1.25 * digits))


def _solve_block(op, n, guesses, tol, A):
    """Pair solve with precision escalation; returns ``(reduction, solution)``."""
    red = BlockReduction(op, n)
    sol = solve_pair(red, guesses)
    if tol.precision == "double":
        return red, sol
    dps = _needed_dps(sol, red.lam0, tol)
    tried = 0
    while dps is not None and tried < 6:
        dps = min(dps, tol.max_dps)
        red = BlockReduction(op, n, Arithmetic(dps))
        sol = solve_pair(red, [sol.z_minus, sol.z_plus])
        nxt = _needed_dps(sol, red.lam0, tol)
        tried += 1
        if nxt is None or nxt <= dps + 5 or dps >= tol.max_dps:
            break
        dps = nxt
    return red, sol


def _refine_block(op, n, guesses, radius, tol, A=None):
    A = op.matrix if A is None else A
    lam0 = free_value(n, op.operator_kind)
    red, sol = _solve_block(op, n, [g - lam0 for g in guesses], tol, A)
    with red.ar:
        return _refine_in_precision(op, n, guesses, radius, tol, A, lam0, red, sol)


def _refine_in_precision(op, n, guesses, radius, tol, A, lam0, red, sol):
    ar = red.ar
    xm = red.lift(sol.z_minus, sol.x_minus)
    xp = red.lift(sol.z_plus, sol.x_plus)
    xm, xp = xm / ar.norm(xm), xp / ar.norm(xp)
    um, up = _to_complex(xm), _to_complex(xp)
    zm, zp = complex(sol.z_minus), complex(sol.z_plus)
    Ash = A - lam0 * np.eye(len(A))
    res = {
        "diag_skew": float(sol.diag_skew),
        "eig_minus": float(np.linalg.norm(Ash @ um - zm * um)),
        "eig_plus": float(np.linalg.norm(Ash @ up - zp * up)),
        "dense_mismatch": float(max(abs(np.sort_complex(np.asarray(guesses) - lam0)
                                        - np.sort_complex(np.array([zm, zp]))))),
    }
    compression = None
    thr = jordan_threshold(tol, ar, lam0, (sol.beta_minus, sol.beta_plus))
    if abs(sol.gamma) > thr:
        cls, u_minus, u_plus = M, um, up
    else:
        T, Z = _schur_pair(A, lam0, complex(sol.z_mid), radius)
        compression = T
        cls = M2 if abs(T[0, 1]) > tol.offdiag_tol else M1
        # Option 1: the eigenvector first, then its orthogonal complement in E_n
        u_plus, u_minus = Z[:, 0], Z[:, 1]
    exact = None
    if ar.exact:
        exact = {"z_minus": sol.z_minus, "z_plus": sol.z_plus, "gamma": sol.gamma,
                 "z_star": sol.z_mid, "beta_minus": sol.beta_minus, "beta_plus": sol.beta_plus}
        if cls == M:
            exact.update(u_minus=xm, u_plus=xp)
    block = SpectralBlock(
        n, lam0, zm, zp, complex(sol.gamma), complex(sol.z_mid), None, u_minus, u_plus, cls,
        compression, complex(sol.beta_minus), complex(sol.beta_plus), res,
        dps=ar.dps, exact=exact,
    )
    block.residuals["jordan_threshold"] = float(thr)
    return red, sol, block


def _galerkin_mu(dop, n, guess):
    return solve_single(BlockReduction(dop, n), guess)


def _attach_mu(block, red, sol, dop, eig_d, radius):
    """Dirichlet eigenvalue near the block through a Floquet solution.

    Falls back to the sine-basis truncation when the Floquet system is
    singular (a degenerate pair) or the iteration fails.
    """
    with red.ar:
        return _attach_mu_in_precision(block, red, sol, dop, eig_d, radius)


def _attach_mu_in_precision(block, red, sol, dop, eig_d, radius):
    n = block.n
    galerkin = None
    if dop is not None and n in dop.basis_indices:
        guess = eig_d[np.argmin(np.abs(eig_d - block.lambda0))] - block.lambda0
        try:
            galerkin = complex(_galerkin_mu(dop, n, guess))
        except ReductionError:
            galerkin = complex(guess)
    try:
        ds = solve_dirichlet(red, sol.z_mid)
        zmu = ds.z
        if not abs(complex(zmu)) < radius:
            raise ReductionError("Floquet root left the disc")
    except ReductionError:
        if galerkin is None:
            return None
        block.z_mu = galerkin
        block.mu_source = "galerkin"
        block.dmu_plus = galerkin - block.z_plus
        block.dmu_minus = galerkin - block.z_minus
        return None
    block.z_mu = complex(zmu)
    block.mu_source = "floquet"
    block.dmu_plus = complex(zmu - sol.z_plus)
    block.dmu_minus = complex(zmu - sol.z_minus)
    block.residuals["floquet_w"] = complex(ds.w)
    block.residuals["floquet_residual"] = ds.residual
    if galerkin is not None:
        block.residuals["mu_galerkin_gap"] = abs(galerkin - block.z_mu)
    if block.exact is not None:
        block.exact.update(z_mu=zmu, dmu_plus=zmu - sol.z_plus, dmu_minus=zmu - sol.z_minus)
    return ds


def _validate_block(block, op2, red, sol, ds, tol):
    """Recompute the pair at the doubled cutoff.

    The eigenvalue drift is measured in double precision, which resolves
    it against ``trunc_tol``.  With ``tol.validate_precision`` the splitting
    and ``mu - lambda_plus`` are also recomputed in the block's working
    precision and their relative drifts recorded.
    """
    red2 = BlockReduction(op2, block.n)
    sol2 = solve_pair(red2, [block.z_minus, block.z_plus])
    d1 = max(abs(sol2.z_minus - block.z_minus), abs(sol2.z_plus - block.z_plus))
    d2 = max(abs(sol2.z_minus - block.z_plus), abs(sol2.z_plus - block.z_minus))
    block.drift = float(min(d1, d2))
    block.accepted = block.drift < tol.trunc_tol * max(1.0, abs(block.lambda0))
    if red.ar.exact and not tol.validate_precision:
        return
    with red.ar:
        if red.ar.exact:
            red2 = BlockReduction(op2, block.n, red.ar)
            sol2 = solve_pair(red2, [sol.z_minus, sol.z_plus])
        g = abs(sol.gamma)
        if g > 0:
            block.residuals["gamma_rel_drift"] = float(abs(abs(sol2.gamma) - g) / g)
        if ds is None:
            return
        try:
            ds2 = solve_dirichlet(red2, sol2.z_mid)
        except ReductionError:
            block.residuals["dmu_rel_drift"] = math.inf
            return
        same = abs(sol2.z_plus - sol.z_plus) <= abs(sol2.z_plus - sol.z_minus)
        dm = abs(ds2.z - (sol2.z_plus if same else sol2.z_minus))
        ref = abs(ds.z - sol.z_plus)
        if ref > 0:
            block.residuals["dmu_rel_drift"] = float(abs(dm - ref) / ref)


def assemble_blocks(pot, bc, cutoff, tol=None, n_max=None, validate=True, projections=True, workers=1):
    """Eigen-data for every localized block of ``L_bc(v)`` at a truncation.

    Returns a :class:`BlockAssembly` with one :class:`SpectralBlock` per
    index ``n`` beyond ``N*`` (periodic / anti-periodic conditions), the
    localization, and optionally the :class:`ProjectionSystem`.  Pairs whose
    splitting is below ``escalate_tol * max(1, |lambda0|)`` are recomputed
    in multiprecision.  With ``validate`` set, every block is recomputed at
    ``2 * cutoff`` and blocks whose eigenvalues drift by more than
    ``trunc_tol * max(1, |lambda0|)`` are marked as not accepted.
    """
    tol = tol or Tolerances()
    bc = BoundaryCondition.parse(bc)
    if not bc.periodic_type:
        raise ValueError("assemble_blocks handles PerPlus / PerMinus; use projection_system for Dirichlet")
    op = build_matrix(pot, bc, cutoff)
    eig = eigensolve(op, tol.residual_tol)
    kind = op.operator_kind
    loc = localize(eig.values, bc, kind, singular=pot.is_singular, n_max=n_max, cutoff=cutoff)
    A = op.matrix
    ns = loc.blocks
    dop = build_matrix(pot, BoundaryCondition.DIRICHLET, cutoff)
    eig_d = np.linalg.eigvals(dop.matrix)
    op2 = build_matrix(pot, bc, 2 * cutoff) if validate else None

    def work(n):
        _, r = loc.discs[n]
        red, sol, block = _refine_block(op, n, loc.assignment[n], r, tol, A)
        ds = _attach_mu(block, red, sol, dop, eig_d, r)
        if validate:
            _validate_block(block, op2, red, sol, ds, tol)
        return block

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            blocks = list(ex.map(work, ns))
    else:
        blocks = [work(n) for n in ns]
    excluded = [b.n for b in blocks if not b.accepted]
    proj = projection_system(op, loc, tol, eigenvalues=eig.values) if projections else None
    return BlockAssembly(pot, bc, int(cutoff), op, dop, eig, loc, blocks, proj, tol, excluded)


def associated_vector(A, basis, eigval):
    """Associated vector of a Jordan pair inside a 2-D invariant subspace.

    ``basis`` holds orthonormal columns ``(f, phi)`` with ``f`` the
    eigenvector.  Returns ``(u, xi)`` where ``(A - eigval) u = f``,
    ``<u, f> = 0`` and ``xi = 1 / ||u||``.
    """
    A = np.asarray(A, dtype=complex)
    Qb = np.asarray(basis, dtype=complex)
    T = Qb.conj().T @ A @ Qb
    s = T[0, 1]
    if abs(s) == 0:
        raise DiscretizationError("compression has no Jordan coupling")
    u = Qb[:, 1] / s
    return u, float(abs(s))


def option2_vectors(block, op=None):
    """Associated function ``u_{2m-1}`` chosen orthogonal to the eigenvector.

    Returns ``(u_assoc, xi)`` with ``xi = 1 / ||u_assoc||`` before
    renormalization.
    """
    if block.block_class != M2:
        raise ValueError(f"block n={block.n} has class {block.block_class}, Option 2 needs M2")
    s = block.compression[0, 1]
    return block.u_minus / s, float(abs(s))
