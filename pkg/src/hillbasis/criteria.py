"""Gap, deviation and criterion sequences with finite-window verdicts.

Three sequences are computed over the blocks with a simple pair of
eigenvalues (class ``M``):

* ``kappa_n``: the overlap functional of the two unit eigenvectors;
* ``r_n = |mu_n - lambda_n^+| / |gamma_n|``;
* ``t_n = |beta_n^- / beta_n^+|`` at the midpoint ``z_n^*``.

Each is mapped to a common divergence scale ``d``: ``|log t|``,
``2 arccosh kappa`` and ``2 arccosh (r^+ + r^-)``, where ``r^-`` measures
``mu`` from the other eigenvalue of the pair.  For the two-mode model
``kappa = r^+ + r^- = cosh(log(t) / 2)`` exactly, so the three scales share
one threshold and one trend rule, and none depends on which root carries
the ``+`` label.  Since ``|r^+ - r^-| <= 1`` the sum is bounded exactly
when ``r^+`` is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from .beta import BetaConvergenceError, BetaDomainError, beta_pm, t_ratio
from .discretize import (DIRAC, M, M2, BoundaryCondition, Tolerances, assemble_blocks,
                         option2_vectors)
from .geometry import _precision, inner
from .geometry import kappa as kappa_of
from .geometry import trend_slope

__all__ = [
    "HOLDS",
    "FAILS",
    "INCONCLUSIVE",
    "Verdict",
    "CriterionReport",
    "CriteriaError",
    "gaps_and_deviations",
    "ratio_R",
    "block_kappa",
    "t_sequence",
    "divergence_scale",
    "sequence_verdict",
    "criterion_t",
    "criterion_kappa",
    "criterion_R",
    "fundamental_check",
    "fundamental_ok",
    "xi_relation_check",
    "lp_ratio",
    "consolidate",
    "default_window",
    "analyze",
]

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


class CriteriaError(ValueError):
    pass


@dataclass
class Verdict:
    status: str
    evidence: dict = field(default_factory=dict)
    vacuous: bool = False

    def as_dict(self):
        return {"status": self.status, "vacuous": self.vacuous, **self.evidence}


def gaps_and_deviations(blocks):
    """``({n: gamma_n}, {n: delta_n})`` over the blocks (``delta`` is ``None`` without ``mu``)."""
    return {b.n: b.gamma for b in blocks}, {b.n: b.delta for b in blocks}


def ratio_R(blocks):
    """``({n: r_n}, sup r)`` with ``r_n = |mu_n - lambda_n^+| / |gamma_n|``.

    Raises
    ------
    CriteriaError
        If a block has ``gamma = 0`` or no Dirichlet eigenvalue.
    """
    out = {}
    for b in blocks:
        if b.gamma == 0:
            raise CriteriaError(f"block n={b.n} has gamma = 0; r is defined only for simple pairs")
        if b.z_mu is None:
            raise CriteriaError(f"block n={b.n} has no Dirichlet eigenvalue")
        out[b.n] = _ratio(b, "plus")
    return out, (max(out.values()) if out else 0.0)


def _ratio(block, which):
    """``|mu - lambda_pm| / |gamma|`` from the most precise stored values."""
    ex = block.exact
    if ex is not None and "dmu_plus" in ex:
        return float(abs(ex["dmu_" + which]) / abs(ex["gamma"]))
    num = block.mu_minus_lambda_plus if which == "plus" else block.mu_minus_lambda_minus
    return abs(num) / abs(block.gamma)


def block_kappa(block):
    """``kappa`` of the unit eigenvectors, from the multiprecision vectors when present."""
    ex = block.exact
    if ex is not None and "u_minus" in ex:
        return kappa_of(ex["u_minus"], ex["u_plus"])
    return kappa_of(block.u_minus, block.u_plus)


def t_sequence(pot, blocks, tol=None, order=None):
    """``{n: (t_n, info)}`` at ``z_n^*``.

    For Hill operators the entries come from the chain series at the
    midpoint (in the block's working precision); ``info`` also carries the
    ratio read from the Schur complement, an independent route to the same
    quantity.  Dirac blocks use the Schur complement only.
    """
    tol = tol or Tolerances()
    out = {}
    for b in blocks:
        t_schur = t_ratio(abs(b.beta_minus_reduced), abs(b.beta_plus_reduced), tol.zero_tol)
        info = {"t_schur": t_schur, "route": "schur"}
        if pot.is_dirac or b.n == 0:
            out[b.n] = (t_schur, info)
            continue
        z = b.exact["z_star"] if b.exact is not None else b.z_star
        # dps exceeds 40 + 1.25 * digits(min |beta| / scale), so this keeps the
        # series error about 1e-10 below the smaller entry
        stol = tol.series_tol if b.dps is None else min(tol.series_tol, 10.0 ** (-(b.dps - 30)))
        try:
            ev = beta_pm(pot, abs(b.n), z, order=order, series_tol=stol, zero_tol=tol.zero_tol, dps=b.dps)
        except (BetaDomainError, BetaConvergenceError) as exc:
            info["beta_error"] = str(exc)
            out[b.n] = (t_schur, info)
            continue
        info.update(route="series", converged=ev.converged, order_used=ev.order_used,
                    band_used=ev.band_used, beta_minus=complex(ev.beta_minus), beta_plus=complex(ev.beta_plus))
        out[b.n] = (ev.t, info)
    return out


def divergence_scale(kind, value):
    """Map ``t``, ``kappa`` or ``r`` to the common scale ``d >= 0``."""
    v = float(value)
    if kind == "t":
        if v == 0 or math.isinf(v):
            return math.inf
        return abs(math.log(v))
    if kind == "kappa":
        return math.inf if math.isinf(v) else 2 * math.acosh(max(1.0, v))
    if kind == "r":
        # v is the two-sided ratio r^+ + r^-
        return math.inf if math.isinf(v) else 2 * math.acosh(max(1.0, v))
    raise ValueError(f"unknown sequence kind {kind!r}")


def sequence_verdict(ns, values, kind, tol=None):
    """Finite-window verdict for one criterion sequence.

    * fewer than ``min_blocks`` entries: inconclusive;
    * some ``d_n`` above ``-log t_floor``: fails;
    * slope of ``d`` against ``log n`` above ``slope_tol`` while the last
      ``d`` exceeds ``growth_floor``: fails;
    * slope at most ``slope_tol``: holds;
    * otherwise inconclusive.
    """
    tol = tol or Tolerances()
    ns, values = list(ns), list(values)
    d = [divergence_scale(kind, v) for v in values]
    limit = -math.log(tol.t_floor)
    ev = {"count": len(d), "level_limit": limit}
    if d:
        order = np.argsort([abs(n) for n in ns], kind="stable")
        ns = [ns[i] for i in order]
        d = [d[i] for i in order]
        values = [values[i] for i in order]
        ev.update(max_d=max(d), last_d=d[-1], min=min(values), max=max(values),
                  slope=trend_slope(ns, d) if all(math.isfinite(x) for x in d) else math.inf)
    if len(d) < tol.min_blocks:
        ev["reason"] = f"window holds {len(d)} simple pairs, fewer than {tol.min_blocks}"
        return Verdict(INCONCLUSIVE, ev)
    if max(d) > limit:
        ev["reason"] = "level: divergence scale exceeds -log(t_floor)"
        return Verdict(FAILS, ev)
    if ev["slope"] > tol.slope_tol and d[-1] > tol.growth_floor:
        ev["reason"] = "trend: divergence scale grows along the window"
        return Verdict(FAILS, ev)
    if ev["slope"] <= tol.slope_tol:
        ev["reason"] = "bounded and flat within slope_tol"
        return Verdict(HOLDS, ev)
    ev["reason"] = "rising trend still below growth_floor"
    return Verdict(INCONCLUSIVE, ev)


def criterion_t(t_seq, ns=None, tol=None):
    """Two-sided boundedness of ``t_n`` (``t_seq``: mapping ``n -> t`` or a sequence)."""
    ns, vals = _unpack(t_seq, ns)
    return sequence_verdict(ns, vals, "t", tol)


def criterion_kappa(kappa_seq, ns=None, tol=None):
    ns, vals = _unpack(kappa_seq, ns)
    return sequence_verdict(ns, vals, "kappa", tol)


def criterion_R(r_seq, r_minus=None, ns=None, tol=None):
    """Boundedness of ``r_n``, judged on ``r_n^+ + r_n^-``.

    Without ``r_minus`` the sum is bounded above by ``2 r^+ + 1`` and that
    bound is used instead.
    """
    ns, vals = _unpack(r_seq, ns)
    if r_minus is None:
        two_sided = [2 * v + 1 for v in vals]
    else:
        _, other = _unpack(r_minus, ns)
        two_sided = [a + b for a, b in zip(vals, other)]
    return sequence_verdict(ns, two_sided, "r", tol)


def _unpack(seq, ns):
    if isinstance(seq, dict):
        return list(seq), list(seq.values())
    vals = list(seq)
    return (list(range(1, len(vals) + 1)) if ns is None else list(ns)), vals


def fundamental_check(kappa, r):
    """``(max(0, r - 6 kappa), max(0, kappa - 16 - 72 r))``."""
    return max(0.0, r - 6 * kappa), max(0.0, kappa - 16 - 72 * r)


def fundamental_ok(kappa, r, slack=1e-6):
    """Both residuals within ``slack`` relative to their right-hand sides."""
    a, b = fundamental_check(kappa, r)
    return a <= slack * max(1.0, 6 * kappa) and b <= slack * max(1.0, 16 + 72 * r)


def xi_relation_check(block, op):
    """``|xi_direct + (a / b) gamma|`` for a simple pair.

    ``f`` is the unit eigenvector of ``lambda^+`` and ``h = a f + b phi`` the
    unit eigenvector of ``lambda^-``, rotated so that ``a >= 0``, with ``phi``
    a unit vector orthogonal to ``f`` and ``b > 0``.  ``xi_direct`` is the
    ``f``-component of the truncated operator applied to ``phi``.  The
    multiprecision eigenvectors are used when the block carries them, which
    resolves ``b`` far below double precision.
    """
    if block.block_class != M:
        raise CriteriaError(f"block n={block.n} has class {block.block_class}; the relation needs a simple pair")
    ex = block.exact
    if ex is not None and "u_plus" in ex:
        return _xi_relation_exact(block, op, ex)
    f = np.asarray(block.u_plus, dtype=complex)
    h = np.asarray(block.u_minus, dtype=complex)
    a = np.vdot(f, h)
    if abs(a) > 0:
        h = h * (abs(a) / a)
    a = abs(a)
    rest = h - a * f
    b = float(np.linalg.norm(rest))
    if b < 1e-12:
        raise CriteriaError(f"block n={block.n}: near-parallel eigenvectors (b = {b:.3e})")
    phi = rest / b
    A = op.matrix - block.lambda0 * np.eye(op.truncation)
    xi = np.vdot(f, A @ phi)
    return float(abs(xi + (a / b) * block.gamma)), complex(xi), float(a), b


def _xi_relation_exact(block, op, ex):
    f, h = ex["u_plus"], ex["u_minus"]
    bits = _precision(f, h)
    with gmpy2.context(precision=bits, real_prec=bits, imag_prec=bits):
        f = np.array([gmpy2.mpc(x) for x in f], dtype=object)
        h = np.array([gmpy2.mpc(x) for x in h], dtype=object)
        a = inner(h, f)
        if a != 0:
            h = h * (abs(a) / a)
        a = abs(a)
        rest = h - a * f
        b = gmpy2.sqrt(sum((gmpy2.norm(x) for x in rest), gmpy2.mpfr(0)))
        if b <= 2.0 ** (30 - bits):
            raise CriteriaError(f"block n={block.n}: eigenvectors parallel at working precision")
        phi = rest / b
        A = op.matrix - block.lambda0 * np.eye(op.truncation)
        rows, cols = np.nonzero(A)
        Aphi = np.array([gmpy2.mpc(0)] * op.truncation, dtype=object)
        for i, j in zip(rows, cols):
            Aphi[i] += gmpy2.mpc(complex(A[i, j])) * phi[j]
        xi = inner(Aphi, f)
        res = abs(xi + (a / b) * gmpy2.mpc(ex["gamma"]))
        return float(res), complex(xi), float(a), float(b)


def lp_ratio(vec, op, grid=2048):
    """``||u||_inf / ||u||_1`` of the function with coefficient vector ``vec`` on a uniform grid."""
    x = np.linspace(0.0, math.pi, grid, endpoint=False)
    vec = np.asarray(vec, dtype=complex)
    if op.operator_kind == DIRAC:
        if op.bc is BoundaryCondition.DIRICHLET:
            ns = np.array(op.basis_indices)
            E = np.exp(-1j * np.outer(x, ns)) / math.sqrt(2)
            F = np.exp(1j * np.outer(x, ns)) / math.sqrt(2)
            mag = np.sqrt(np.abs(E @ vec) ** 2 + np.abs(F @ vec) ** 2)
        else:
            comp = np.array([c for c, _ in op.basis_indices])
            ks = np.array([k for _, k in op.basis_indices])
            u1 = np.exp(-1j * np.outer(x, ks[comp == 1])) @ vec[comp == 1]
            u2 = np.exp(1j * np.outer(x, ks[comp == 2])) @ vec[comp == 2]
            mag = np.sqrt(np.abs(u1) ** 2 + np.abs(u2) ** 2)
    elif op.bc is BoundaryCondition.DIRICHLET:
        ns = np.array(op.basis_indices)
        mag = np.abs(math.sqrt(2) * np.sin(np.outer(x, ns)) @ vec)
    else:
        ks = np.array(op.basis_indices)
        mag = np.abs(np.exp(1j * np.outer(x, ks)) @ vec)
    l1 = float(mag.mean())
    return math.inf if l1 == 0 else float(mag.max()) / l1


@dataclass
class CriterionReport:
    """Sequences, per-block checks and verdicts over one window."""

    window: list
    gamma_seq: dict
    delta_seq: dict
    kappa_seq: dict
    r_seq: dict
    t_seq: dict
    fundamental_residuals: dict
    verdicts: dict
    lp_checks: dict
    consistent: bool
    classes: dict = field(default_factory=dict)
    r_minus_seq: dict = field(default_factory=dict)
    t_window: dict = field(default_factory=dict)
    t_window_verdict: Verdict | None = None
    xi_option2: dict = field(default_factory=dict)
    xi_relation: dict = field(default_factory=dict)
    beta_info: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)
    swap_consistent: bool | None = None
    notes: list = field(default_factory=list)

    @property
    def simple(self):
        return sorted(self.kappa_seq, key=lambda n: (abs(n), n))


def _verdicts(kseq, rseq, rminus, tseq, tol, vacuous_note):
    if not kseq:
        ev = {"count": 0, "reason": vacuous_note}
        return {k: Verdict(HOLDS, dict(ev), vacuous=True) for k in ("kappa", "R", "t")}
    return {"kappa": criterion_kappa(kseq, tol=tol), "R": criterion_R(rseq, rminus, tol=tol),
            "t": criterion_t(tseq, tol=tol)}


def consolidate(blocks, pot, op=None, tol=None, window=None, lp=True, t_seq=None, excluded=()):
    """Build the :class:`CriterionReport` for the accepted blocks inside ``window``."""
    tol = tol or Tolerances()
    if window is not None:
        lo, hi = window
        blocks = [b for b in blocks if lo <= abs(b.n) <= hi]
    blocks = sorted(blocks, key=lambda b: (abs(b.n), b.n))
    excluded = sorted(set(excluded) | {b.n for b in blocks if not b.accepted}, key=lambda n: (abs(n), n))
    blocks = [b for b in blocks if b.accepted]
    gseq, dseq = gaps_and_deviations(blocks)
    simple = [b for b in blocks if b.block_class == M]
    tall = t_seq if t_seq is not None else t_sequence(pot, blocks, tol)
    kseq = {b.n: block_kappa(b) for b in simple}
    rseq, _ = ratio_R(simple)
    tseq = {b.n: tall[b.n][0] for b in simple}
    fres = {n: fundamental_check(kseq[n], rseq[n]) for n in kseq}
    notes = []
    if not simple:
        classes = sorted({b.block_class for b in blocks})
        note = f"no simple pairs in the window (classes {', '.join(classes) or 'none'})"
        notes.append(note + "; the criteria hold vacuously")
    else:
        note = ""
    rminus = {b.n: _ratio(b, "minus") for b in simple}
    verdicts = _verdicts(kseq, rseq, rminus, tseq, tol, note)
    statuses = {v.status for v in verdicts.values()}
    consistent = len(statuses) == 1
    # relabelled pairs: t -> 1/t and r measured from the other eigenvalue
    swapped = _verdicts(
        kseq, rminus, rseq,
        {n: (math.inf if t == 0 else (0.0 if math.isinf(t) else 1 / t)) for n, t in tseq.items()},
        tol, note,
    )
    swap_ok = all(swapped[k].status == verdicts[k].status for k in verdicts)
    lp_checks = {}
    if lp and op is not None:
        for b in blocks:
            lp_checks[b.n] = (lp_ratio(b.u_minus, op, tol.lp_grid), lp_ratio(b.u_plus, op, tol.lp_grid))
    xi2 = {}
    for b in blocks:
        if b.block_class == M2:
            xi2[b.n] = option2_vectors(b)[1]
    xrel = {}
    if op is not None:
        for b in simple:
            try:
                xrel[b.n] = xi_relation_check(b, op)[0]
            except CriteriaError:
                xrel[b.n] = math.inf
    tw = {b.n: tall[b.n][0] for b in blocks}
    return CriterionReport(
        window=[b.n for b in blocks], gamma_seq=gseq, delta_seq=dseq, kappa_seq=kseq, r_seq=rseq, r_minus_seq=rminus,
        t_seq=tseq, fundamental_residuals=fres, verdicts=verdicts, lp_checks=lp_checks,
        consistent=consistent, classes={b.n: b.block_class for b in blocks}, t_window=tw,
        t_window_verdict=criterion_t(tw, tol=tol) if tw else None, xi_option2=xi2, xi_relation=xrel,
        beta_info={n: v[1] for n, v in tall.items()}, excluded=excluded, swap_consistent=swap_ok,
        notes=notes,
    )


def default_window(pot, n_star, cutoff):
    """``(N* + 1, n_max)`` with ``n_max = cutoff // 2``, capped at ``K`` for truncated families.

    A family truncated after ``K`` harmonics is a trigonometric polynomial of
    degree ``2K``; beyond ``n = K`` its blocks are governed by the truncation
    rather than by the family.
    """
    hi = int(cutoff) // 2
    K = pot.meta.get("K") if pot.meta else None
    if K is not None and pot.meta.get("family") in ("gasymov", "delta_comb"):
        hi = min(hi, int(K))
    return n_star + 1, hi


def analyze(pot, bc, cutoff, window=None, tol=None, validate=True, projections=False, lp=True, workers=1):
    """Assemble blocks and consolidate the criteria for one boundary condition.

    Returns ``(assembly, report)``.
    """
    tol = tol or Tolerances()
    bc = BoundaryCondition.parse(bc)
    hi = window[1] if window is not None else default_window(pot, 0, cutoff)[1]
    asm = assemble_blocks(pot, bc, cutoff, tol=tol, n_max=hi, validate=validate,
                          projections=projections, workers=workers)
    if window is None:
        window = default_window(pot, asm.n_star, cutoff)
    report = consolidate(asm.blocks, pot, asm.op, tol, window, lp=lp)
    return asm, report
