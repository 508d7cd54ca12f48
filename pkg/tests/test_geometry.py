import math

import gmpy2
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hillbasis import discretize as dz
from hillbasis import geometry as geo
from hillbasis import potential as pt

seeds = st.integers(0, 2**32 - 1)


def _unit(v):
    return v / np.linalg.norm(v)


def _pair(seed, dim=6):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, dim)) + 1j * rng.standard_normal((2, dim))
    return _unit(z[0]), _unit(z[1]), rng


def _unitary(rng, dim):
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def test_kappa_examples():
    e1, e2 = np.eye(2)
    assert geo.kappa(e1, e2) == 1.0
    a = math.sqrt(3) / 2
    assert geo.kappa(e1, np.array([a, 0.5])) == pytest.approx(2.0)
    assert geo.kappa(e1, e1) == math.inf


def test_kappa_rejects_unnormalized():
    with pytest.raises(geo.GeometryError, match="not normalized"):
        geo.kappa(np.array([1.0, 1.0]), np.array([1.0, 0.0]))


@settings(max_examples=60)
@given(seeds, st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_kappa_invariances(seed, th1, th2):
    u1, u2, rng = _pair(seed)
    k = geo.kappa(u1, u2)
    assert k >= 1
    U = _unitary(rng, len(u1))
    assert geo.kappa(U @ u1, U @ u2) == pytest.approx(k, rel=1e-10)
    assert geo.kappa(np.exp(1j * th1) * u1, np.exp(1j * th2) * u2) == pytest.approx(k, rel=1e-10)
    assert geo.kappa(u2, u1) == pytest.approx(k, rel=1e-12)


@settings(max_examples=40)
@given(st.floats(1e-6, 1.0))
def test_kappa_matches_angle(b):
    # u2 = a e1 + b e2 has kappa = 1/b
    a = math.sqrt(1 - b * b)
    assert geo.kappa(np.array([1.0, 0.0]), np.array([a, b])) == pytest.approx(1 / b, rel=1e-8)


def test_kappa_parallel_cutoff():
    # 1 - |<u1, u2>| ~ b**2 / 2 crosses 1e-14 near b = 1.4e-7
    e1 = np.array([1.0, 0.0])
    at = lambda b: np.array([math.sqrt(1 - b * b), b])
    assert math.isfinite(geo.kappa(e1, at(2e-7)))
    assert geo.kappa(e1, at(1e-7)) == math.inf


def test_kappa_multiprecision_resolves_near_parallel():
    with gmpy2.context(precision=200, real_prec=200, imag_prec=200):
        b = gmpy2.mpfr("1e-20")
        a = gmpy2.sqrt(1 - b * b)
        u1 = np.array([gmpy2.mpc(1), gmpy2.mpc(0)], dtype=object)
        u2 = np.array([gmpy2.mpc(a), gmpy2.mpc(b)], dtype=object)
    assert geo.kappa(u1, u2) == pytest.approx(1e20, rel=1e-12)
    assert geo.kappa(u1.astype(complex), u2.astype(complex)) == math.inf


def test_overlap_defect_lagrange_identity():
    u1, u2, _ = _pair(3)
    direct = np.vdot(u1, u1).real * np.vdot(u2, u2).real - abs(np.vdot(u1, u2)) ** 2
    assert geo.overlap_defect(u1, u2) == pytest.approx(direct, rel=1e-12)


def test_biorthogonal_orthonormal_pair():
    e1, e2 = np.eye(3)[:2]
    p1, p2 = geo.biorthogonal_2d(e1, e2)
    np.testing.assert_allclose(p1, e1)
    np.testing.assert_allclose(p2, e2)


@settings(max_examples=60)
@given(seeds)
def test_biorthogonal_delta_and_norm(seed):
    u1, u2, _ = _pair(seed)
    k = geo.kappa(u1, u2)
    assume(k < 1e6)
    p1, p2 = geo.biorthogonal_2d(u1, u2)
    G = np.array([[np.vdot(p, u) for u in (u1, u2)] for p in (p1, p2)])
    np.testing.assert_allclose(G, np.eye(2), atol=1e-10 * k * k)
    assert np.linalg.norm(p1) == pytest.approx(k, rel=1e-8)
    assert np.linalg.norm(p2) == pytest.approx(k, rel=1e-8)


@pytest.mark.parametrize("a", [0.0, 0.3, 0.9, 0.999])
def test_biorthogonal_overlap_pair(a):
    b = math.sqrt(1 - a * a)
    f, phi = np.eye(2)
    h = a * f + b * phi
    p1, p2 = geo.biorthogonal_2d(f, h)
    assert np.linalg.norm(p2) == pytest.approx(1 / b, rel=1e-12)


def test_biorthogonal_degenerate():
    with pytest.raises(geo.GeometryError, match="degenerate"):
        geo.biorthogonal_2d(np.array([1.0, 0.0]), np.array([1.0, 0.0]))


@settings(max_examples=30)
@given(seeds)
def test_reconstruction(seed):
    u1, u2, rng = _pair(seed)
    assume(geo.kappa(u1, u2) < 1e4)
    p1, p2 = geo.biorthogonal_2d(u1, u2)
    c = rng.standard_normal((100, 2)) + 1j * rng.standard_normal((100, 2))
    for a, b in c:
        h = a * u1 + b * u2
        assert np.linalg.norm(geo.reconstruct(h, u1, u2, p1, p2) - h) <= 1e-8 * np.linalg.norm(h)


@settings(max_examples=30)
@given(seeds)
def test_q_bracketing(seed):
    u1, u2, rng = _pair(seed)
    assume(geo.kappa(u1, u2) < 1e6)
    ys = rng.standard_normal((20, len(u1))) + 1j * rng.standard_normal((20, len(u1)))
    lo, hi = geo.q_bracketing(u1, u2, ys)
    assert lo <= 1 + 1e-12 and hi <= 1 + 1e-12


def test_q_norms_equal_kappa():
    u1, u2, _ = _pair(11)
    k = geo.kappa(u1, u2)
    assert geo.q_norms(u1, u2) == pytest.approx((k, k), rel=1e-10)


def test_orlicz_identity_resolution():
    Qs = [np.diag(v) for v in np.eye(4)]
    ys = np.random.default_rng(0).standard_normal((10, 4))
    assert geo.orlicz_check(Qs, ys).C1 == pytest.approx(1.0)


def test_orlicz_scaled_projections():
    Qs = [2 * np.diag(v) for v in np.eye(4)]
    ys = np.random.default_rng(0).standard_normal((10, 4))
    assert geo.orlicz_check(Qs, ys, annihilation_tol=1e-8).C1 >= 2


def test_orlicz_overlap_rejected():
    P = np.diag([1.0, 0.0])
    with pytest.raises(geo.GeometryError, match="overlap"):
        geo.orlicz_check([P, P], [np.ones(2)])


def test_orlicz_mathieu():
    asm = dz.assemble_blocks(pt.mathieu(1.0), "PerPlus", 48, validate=False)
    proj = asm.projections
    Qs = [proj.S] + [proj.P[n] for n in proj.indices()]
    rng = np.random.default_rng(5)
    dim = asm.op.truncation
    ys = rng.standard_normal((50, dim)) + 1j * rng.standard_normal((50, dim))
    res = geo.orlicz_check(Qs, ys, annihilation_tol=1e-7)
    assert 1 <= res.C1 < 2


def test_basis_bound_examples():
    e1, e2 = np.eye(2)
    pairs = [geo.BlockPair.from_vectors(e1, e2)] * 5
    assert geo.basis_bound_check(pairs) == (1.0, "bounded")
    growing = [geo.BlockPair.from_vectors(e1, [math.sqrt(1 - b * b), b]) for b in 10.0 ** -np.arange(1, 6)]
    sup, verdict = geo.basis_bound_check(growing)
    assert sup == pytest.approx(1e5) and verdict == "unbounded"


def test_basis_bound_gasymov_option1():
    asm = dz.assemble_blocks(pt.gasymov([1.0] * 16, 16), "PerPlus", 64, validate=False, projections=False)
    pairs = [geo.BlockPair.from_vectors(b.u_minus, b.u_plus) for b in asm.blocks]
    sup, verdict = geo.basis_bound_check(pairs)
    assert verdict == "bounded" and sup == pytest.approx(1.0, abs=1e-8)


def test_trend_slope():
    ns = np.arange(1, 20)
    assert geo.trend_slope(ns, 3 * np.log(ns) + 1) == pytest.approx(3)
    assert geo.trend_slope([4], [1.0]) == 0.0
