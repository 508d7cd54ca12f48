import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillbasis import criteria as cr
from hillbasis import discretize as dz
from hillbasis import potential as pt

NS = list(range(4, 24))


def _block(n=5, z_minus=-0.25, z_plus=0.25, z_mu=0.25, cls=dz.M, u_minus=None, u_plus=None):
    e1, e2 = np.eye(2, dtype=complex)
    return dz.SpectralBlock(
        n=n, lambda0=float(n * n), z_minus=z_minus, z_plus=z_plus, gamma=z_plus - z_minus,
        z_star=(z_plus + z_minus) / 2, z_mu=z_mu,
        u_minus=e1 if u_minus is None else u_minus, u_plus=e2 if u_plus is None else u_plus,
        block_class=cls,
    )


@functools.lru_cache(maxsize=None)
def _mathieu(bc):
    return cr.analyze(pt.mathieu(1.0), bc, 64, validate=False)


# sequence verdicts

def test_constant_t_holds():
    assert cr.criterion_t([1.0] * len(NS), NS).status == cr.HOLDS


def test_t_one_over_n_fails():
    v = cr.criterion_t([1 / n for n in NS], NS)
    assert v.status == cr.FAILS and "trend" in v.evidence["reason"]


def test_vanishing_t_fails_on_level():
    v = cr.criterion_t([0.0] * len(NS), NS)
    assert v.status == cr.FAILS and "level" in v.evidence["reason"]


def test_short_window_inconclusive():
    v = cr.criterion_t([1.0] * 5, range(4, 9))
    assert v.status == cr.INCONCLUSIVE and "fewer than 8" in v.evidence["reason"]


def test_kappa_verdicts():
    assert cr.criterion_kappa([1.0] * len(NS), NS).status == cr.HOLDS
    assert cr.criterion_kappa([float(n) for n in NS], NS).status == cr.FAILS


def test_ratio_verdicts():
    assert cr.criterion_R([0.0] * len(NS), [1.0] * len(NS), NS).status == cr.HOLDS
    assert cr.criterion_R([float(n * n) for n in NS], None, NS).status == cr.FAILS


@settings(max_examples=60)
@given(st.lists(st.floats(1e-6, 1e6), min_size=8, max_size=30))
def test_t_verdict_is_invariant_under_inversion(ts):
    ns = range(4, 4 + len(ts))
    a = cr.criterion_t(ts, ns)
    b = cr.criterion_t([1 / t for t in ts], ns)
    assert a.status == b.status


@settings(max_examples=60)
@given(st.floats(-20, 20))
def test_two_mode_scales_agree(log_t):
    # for the two-mode model kappa = r+ + r- = cosh(log(t) / 2)
    k = math.cosh(log_t / 2)
    d_t = cr.divergence_scale("t", math.exp(log_t))
    assert cr.divergence_scale("kappa", k) == pytest.approx(d_t, abs=1e-6)
    assert cr.divergence_scale("r", k) == pytest.approx(d_t, abs=1e-6)


def test_divergence_scale_unknown_kind():
    with pytest.raises(ValueError):
        cr.divergence_scale("q", 1.0)


# per-block quantities

def test_ratio_R_examples():
    r, sup = cr.ratio_R([_block(n=3, z_mu=0.25), _block(n=5, z_minus=0.0, z_plus=0.5, z_mu=-0.5)])
    assert r == {3: 0.0, 5: 2.0}
    assert sup == 2.0


def test_ratio_R_rejects_degenerate_pair():
    with pytest.raises(cr.CriteriaError, match="gamma = 0"):
        cr.ratio_R([_block(z_minus=0.1, z_plus=0.1)])


def test_ratio_R_needs_mu():
    with pytest.raises(cr.CriteriaError, match="Dirichlet"):
        cr.ratio_R([_block(z_mu=None)])


def test_fundamental_examples():
    assert cr.fundamental_check(1.0, 0.0) == (0.0, 0.0)
    assert cr.fundamental_check(1000.0, 1.0) == (0.0, 912.0)
    assert not cr.fundamental_ok(1000.0, 1.0)
    assert cr.fundamental_check(1.0, 7.0) == (1.0, 0.0)


def test_xi_relation_orthogonal_pair():
    op = dz.TruncatedOperator(dz.HILL, dz.BoundaryCondition.PER_PLUS, (0, 1), np.array([24.75, 25.25]),
                              np.zeros((2, 2), complex), 1)
    res, xi, a, b = cr.xi_relation_check(_block(), op)
    assert res == 0 and xi == 0 and a == 0 and b == 1


@pytest.mark.parametrize("s", [0.3, 2.0])
def test_xi_relation_triangular_pair(s):
    # A = [[l+, s], [0, l-]]: eigenvectors e1 (l+) and h along (s, l- - l+), so phi = -e2 and xi = -s
    lp, lm = 25.25, 24.75
    op = dz.TruncatedOperator(dz.HILL, dz.BoundaryCondition.PER_PLUS, (0, 1), np.array([lp, lm]),
                              np.array([[0, s], [0, 0]], complex), 1)
    h = np.array([s, lm - lp], complex)
    blk = _block(u_plus=np.array([1, 0], complex), u_minus=h / np.linalg.norm(h))
    res, xi, a, b = cr.xi_relation_check(blk, op)
    assert xi == pytest.approx(-s)
    assert b == pytest.approx(0.5 / math.hypot(s, 0.5))
    assert res < 1e-13


def test_xi_relation_needs_simple_pair():
    with pytest.raises(cr.CriteriaError, match="simple pair"):
        cr.xi_relation_check(_block(cls=dz.M1), None)


def test_lp_ratio_of_exponential_is_one():
    op = dz.build_matrix(pt.from_trig_coeffs({}), "PerPlus", 8)
    e = np.zeros(op.truncation, complex)
    e[op.position(4)] = 1
    assert cr.lp_ratio(e, op) == pytest.approx(1.0)
    dop = dz.build_matrix(pt.from_trig_coeffs({}), "Dirichlet", 8)
    s = np.zeros(8, complex)
    s[0] = 1
    assert cr.lp_ratio(s, dop) == pytest.approx(math.pi / 2, rel=1e-4)


# consolidated reports

def test_free_report_is_vacuous():
    _, rep = cr.analyze(pt.from_trig_coeffs({}), "PerPlus", 32, validate=False)
    assert rep.kappa_seq == {} and rep.window
    assert all(v.vacuous and v.status == cr.HOLDS for v in rep.verdicts.values())
    assert all(g == 0 for g in rep.gamma_seq.values())
    assert all(d == 0 for d in rep.delta_seq.values())
    assert "vacuously" in rep.notes[0]


@pytest.mark.parametrize("bc", ["PerPlus", "PerMinus"])
def test_mathieu_report(bc):
    asm, rep = _mathieu(bc)
    assert len(rep.kappa_seq) >= 8
    assert rep.consistent and rep.swap_consistent
    assert all(v.status == cr.HOLDS for v in rep.verdicts.values())
    for n, (a, b) in rep.fundamental_residuals.items():
        assert a == 0 and b == 0
    assert max(rep.xi_relation.values()) <= 1e-6
    gaps = [abs(rep.gamma_seq[n]) for n in rep.simple]
    assert all(y < x for x, y in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("bc", ["PerPlus", "PerMinus"])
def test_mathieu_gap_asymptotics(bc):
    # classical splitting of the Mathieu intervals for v = 2 cos 2x: 8 (1/4)^n / ((n-1)!)^2
    asm, _ = _mathieu(bc)
    for b in asm.blocks:
        g = b.exact["gamma"] if b.exact and "gamma" in b.exact else b.gamma
        oracle = 8 * 0.25 ** b.n / math.factorial(b.n - 1) ** 2
        assert abs(float(abs(g)) / oracle - 1) < 1 / b.n ** 2


@pytest.mark.parametrize("bc", ["PerPlus", "PerMinus"])
def test_t_routes_agree(bc):
    asm, rep = _mathieu(bc)
    for n in rep.simple:
        info = rep.beta_info[n]
        assert info["route"] == "series" and info["converged"]
        assert abs(math.log(rep.t_seq[n]) - math.log(info["t_schur"])) < 1e-8


def test_relabelled_blocks_keep_verdicts():
    asm, rep = _mathieu("PerPlus")
    swapped = [b.swapped() for b in asm.blocks]
    rep2 = cr.consolidate(swapped, asm.potential, asm.op, window=(rep.window[0], rep.window[-1]))
    assert {k: v.status for k, v in rep2.verdicts.items()} == {k: v.status for k, v in rep.verdicts.items()}
    for n in rep.simple:
        assert rep2.r_seq[n] == pytest.approx(rep.r_minus_seq[n], rel=1e-10)
        assert rep2.kappa_seq[n] == pytest.approx(rep.kappa_seq[n], rel=1e-10)


def test_default_window_caps_truncated_families():
    assert cr.default_window(pt.gasymov([1.0] * 10, 10), 2, 96) == (3, 10)
    assert cr.default_window(pt.mathieu(1.0), 2, 96) == (3, 48)
