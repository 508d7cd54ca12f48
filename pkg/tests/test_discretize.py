import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillbasis import discretize as dz
from hillbasis import potential as pt
from hillbasis._arith import Arithmetic

FREE = pt.from_trig_coeffs({})
PP, PM, DIR = (dz.BoundaryCondition.PER_PLUS, dz.BoundaryCondition.PER_MINUS,
               dz.BoundaryCondition.DIRICHLET)


@pytest.mark.parametrize("kind, bc, expect", [
    (dz.HILL, PP, [0, 2, 4, 6]),
    (dz.HILL, PM, [1, 3, 5]),
    (dz.HILL, DIR, [1, 2, 3, 4, 5, 6]),
    (dz.DIRAC, PP, [-6, -4, -2, 0, 2, 4, 6]),
    (dz.DIRAC, PM, [-5, -3, -1, 1, 3, 5]),
    (dz.DIRAC, DIR, list(range(-6, 7))),
])
def test_index_sets(kind, bc, expect):
    assert dz.index_set(bc, kind, 6) == expect


@pytest.mark.parametrize("alias, bc", [("per+", PP), ("antiperiodic", PM), ("Dirichlet", DIR), ("dir", DIR)])
def test_bc_aliases(alias, bc):
    assert dz.BoundaryCondition.parse(alias) is bc


def test_unknown_bc():
    with pytest.raises(ValueError, match="unknown boundary"):
        dz.BoundaryCondition.parse("robin")


def test_free_hill_matrix():
    op = dz.build_matrix(FREE, PP, 8)
    assert op.basis_indices == (-8, -6, -4, -2, 0, 2, 4, 6, 8)
    np.testing.assert_array_equal(op.matrix, np.diag([64, 36, 16, 4, 0, 4, 16, 36, 64]).astype(complex))
    assert sorted(np.diag(op.matrix).real) == [0, 4, 4, 16, 16, 36, 36, 64, 64]


def test_mathieu_matrix_is_tridiagonal_in_modes():
    op = dz.build_matrix(pt.mathieu(1.0), PP, 8)
    k = np.array(op.basis_indices)
    off = op.matrix - np.diag(np.diag(op.matrix))
    expect = (np.abs(k[:, None] - k[None, :]) == 2).astype(complex)
    np.testing.assert_array_equal(off, expect)


def test_free_dirac_matrix():
    pot = pt.from_dirac_coeffs({}, {})
    op = dz.build_matrix(pot, PP, 4)
    assert sorted(np.linalg.eigvals(op.matrix).real) == [-4, -4, -2, -2, 0, 0, 2, 2, 4, 4]
    np.testing.assert_array_equal(op.coupling, 0)


def test_dirac_ordering_is_banded():
    pot = pt.from_dirac_coeffs({2: 1.0, -2: 0.5}, {2: 0.3, -2: 1j})
    op = dz.build_matrix(pot, PP, 12)
    rows, cols = np.nonzero(op.coupling)
    assert np.abs(rows - cols).max() <= 3


def test_hill_dirichlet_matches_quadrature():
    pot = pt.from_trig_coeffs({2: 0.7, -2: 0.2j, 4: -0.4})
    op = dz.build_matrix(pot, DIR, 10)
    x = (np.arange(4000) + 0.5) * math.pi / 4000
    s = math.sqrt(2) * np.sin(np.outer(np.arange(1, 11), x))
    ref = (s * pot.evaluate(x)) @ s.T / 4000
    np.testing.assert_allclose(op.coupling, ref, atol=1e-6)


def test_window_violation_names_index():
    pot = pt.gasymov([1.0] * 4, 4, strict=True)
    with pytest.raises(pt.CoefficientWindowError, match="outside the declared window"):
        dz.build_matrix(pot, PP, 16)


def test_eigensolve_free():
    vals = np.sort(dz.eigensolve(dz.build_matrix(FREE, PP, 8)).values.real)
    np.testing.assert_allclose(vals, [0, 4, 4, 16, 16, 36, 36, 64, 64])
    vals = np.sort(dz.eigensolve(dz.build_matrix(FREE, DIR, 6)).values.real)
    np.testing.assert_allclose(vals, [1, 4, 9, 16, 25, 36])


def test_eigensolve_jordan_block():
    es = dz.eigensolve(np.array([[2.0, 1.0], [0.0, 2.0]]))
    np.testing.assert_allclose(es.values, [2, 2])
    v1, v2 = es.vectors.T
    assert abs(np.vdot(v1, v2)) == pytest.approx(1.0, abs=1e-12)


def test_eigensolve_rejects_nonfinite():
    with pytest.raises(dz.EigenSolveError, match="non-finite"):
        dz.eigensolve(np.array([[np.nan]]))


def test_localize_free():
    op = dz.build_matrix(FREE, PP, 32)
    loc = dz.localize(dz.eigensolve(op).values, PP, dz.HILL, cutoff=32)
    assert loc.n_star == 2
    for n in loc.blocks:
        np.testing.assert_allclose(loc.assignment[n], [n * n, n * n])


def test_localize_mathieu_two_per_disc():
    op = dz.build_matrix(pt.mathieu(1.0), PP, 64)
    loc = dz.localize(dz.eigensolve(op).values, PP, dz.HILL, cutoff=64)
    for n in range(loc.n_star + 2, 17, 2):
        c, r = loc.discs[n]
        assert len(loc.assignment[n]) == 2
        assert np.all(np.abs(loc.assignment[n] - c) < r)


def test_localize_free_dirac():
    op = dz.build_matrix(pt.from_dirac_coeffs({}, {}), PM, 16)
    loc = dz.localize(dz.eigensolve(op).values, PM, dz.DIRAC, cutoff=16)
    assert loc.discs[3] == (3.0, 0.25)
    np.testing.assert_allclose(loc.assignment[-5], [-5, -5])


def test_localize_failure():
    # a spectrum with no room for the discs
    vals = np.arange(40) * 0.1
    with pytest.raises(dz.LocalizationError, match="localization failed at this truncation"):
        dz.localize(vals, PP, dz.HILL, n_max=8)


def test_riesz_free_block():
    op = dz.build_matrix(FREE, PP, 12)
    P = dz.riesz_projection(op, 4.0, 1.0)
    np.testing.assert_allclose(P, dz.free_projection(op, 2), atol=1e-12)
    assert np.trace(P).real == pytest.approx(2)


def test_riesz_empty_contour_is_zero():
    op = dz.build_matrix(FREE, PP, 12)
    np.testing.assert_allclose(dz.riesz_projection(op, 9.0, 0.5), 0, atol=1e-14)


def test_riesz_rejects_eigenvalue_on_contour():
    op = dz.build_matrix(FREE, PP, 12)
    with pytest.raises(dz.ContourError, match="contour"):
        dz.riesz_projection(op, 3.0, 1.0)


def test_riesz_mathieu_trace_and_spectral_agreement():
    op = dz.build_matrix(pt.mathieu(1.0), PP, 48)
    for n in (6, 10, 14):
        P = dz.riesz_projection(op, n * n, n / 2)
        assert abs(np.trace(P) - 2) < 1e-8
        Q = dz.spectral_projector(op, lambda x: abs(x - n * n) < n / 2)
        assert np.linalg.norm(P - Q, 2) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_riesz_matches_spectral_projector_on_random_matrices(seed):
    rng = np.random.default_rng(seed)
    d = np.array([0.0, 3.0, 3.2, 7.0, 10.0, 14.0])
    A = np.diag(d) + 0.2 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    eigs = np.linalg.eigvals(A)
    dist = np.abs(np.abs(eigs - 3.1) - 1.5)
    if dist.min() < 0.05:
        return
    P = dz.riesz_projection(A, 3.1, 1.5)
    Q = dz.spectral_projector(A, lambda x: abs(x - 3.1) < 1.5)
    assert np.linalg.norm(P - Q, 2) < 1e-8


def test_box_projection_rank():
    op = dz.build_matrix(pt.mathieu(1.0), PP, 32)
    S = dz.box_projection(op, 4 * 4 + 2)
    assert round(np.trace(S).real) == dz.s_dimension(PP, dz.HILL, 4)


@pytest.mark.parametrize("bc, kind, N, dim", [
    (PP, dz.HILL, 4, 5), (PM, dz.HILL, 5, 5), (DIR, dz.HILL, 4, 4),
    (PP, dz.DIRAC, 2, 6), (PM, dz.DIRAC, 3, 6), (DIR, dz.DIRAC, 2, 5),
])
def test_s_dimension(bc, kind, N, dim):
    assert dz.s_dimension(bc, kind, N) == dim


def test_free_round_trip():
    asm = dz.assemble_blocks(FREE, PP, 32, validate=False)
    for b in asm.blocks:
        assert b.block_class == dz.M1
        assert abs(b.lambda_minus - b.n ** 2) < 1e-10 and abs(b.lambda_plus - b.n ** 2) < 1e-10
        assert b.gamma == 0
        assert np.linalg.norm(asm.projections.P[b.n] - asm.projections.P0[b.n], 2) < 1e-8
        assert asm.projections.ranks[b.n] == 2


def test_mathieu_blocks():
    asm = dz.assemble_blocks(pt.mathieu(1.0), PP, 64, validate=False)
    proj = asm.projections
    for b in asm.blocks:
        assert abs(np.linalg.norm(b.u_minus) - 1) < 1e-12
        assert abs(np.linalg.norm(b.u_plus) - 1) < 1e-12
        c, r = asm.localization.discs[b.n]
        assert abs(b.lambda_minus - c) < r and abs(b.lambda_plus - c) < r
        assert (b.lambda_minus.real, b.lambda_minus.imag) <= (b.lambda_plus.real, b.lambda_plus.imag)
        assert proj.norms[b.n] <= 1.5
    devs = [proj.deviation_norms[n] for n in proj.indices()]
    assert devs[-1] < devs[0]
    partial = np.cumsum(np.square(devs))
    half = len(partial) // 2
    assert partial[-1] - partial[half] < 0.1 * partial[-1]
    ns = proj.indices()
    scaled = [n * d for n, d in zip(ns, devs)]
    assert max(scaled[half:]) <= max(scaled[:half])


def test_gasymov_blocks_are_jordan():
    asm = dz.assemble_blocks(pt.gasymov([1.0] * 16, 16), PP, 64, validate=False, projections=False)
    assert asm.blocks and all(b.block_class == dz.M2 for b in asm.blocks)


def test_dirichlet_mu_is_paired():
    asm = dz.assemble_blocks(pt.mathieu(1.0), PM, 48, validate=False, projections=False)
    d = np.sort(np.linalg.eigvals(asm.dirichlet_op.matrix).real)
    for b in asm.blocks:
        nearest = d[np.argmin(np.abs(d - b.n ** 2))]
        assert abs(b.mu - nearest) < 1e-8


def test_swapped_block():
    asm = dz.assemble_blocks(pt.mathieu(1.0), PP, 32, validate=False, projections=False)
    b = asm.blocks[0]
    s = b.swapped()
    assert s.lambda_plus == b.lambda_minus and s.gamma == -b.gamma
    assert s.swapped().z_plus == b.z_plus


def test_assemble_rejects_dirichlet():
    with pytest.raises(ValueError, match="Dirichlet"):
        dz.assemble_blocks(FREE, DIR, 16)


def test_option2_canonical_jordan():
    A = np.array([[5.0, 1.0], [0.0, 5.0]])
    u, xi = dz.associated_vector(A, np.eye(2), 5.0)
    np.testing.assert_allclose(u, [0, 1])
    assert xi == 1


@pytest.mark.parametrize("s", [0.25, 3.0, 1e-4])
def test_option2_scaled_jordan(s):
    A = np.array([[5.0, s], [0.0, 5.0]])
    u, xi = dz.associated_vector(A, np.eye(2), 5.0)
    assert xi == pytest.approx(s)
    np.testing.assert_allclose(A @ u - 5 * u, [1, 0], atol=1e-12)


def test_option2_needs_jordan_block():
    asm = dz.assemble_blocks(pt.mathieu(1.0), PP, 32, validate=False, projections=False)
    with pytest.raises(ValueError, match="Option 2 needs M2"):
        dz.option2_vectors(asm.blocks[0])


def test_option2_gasymov_xi_bounded():
    asm = dz.assemble_blocks(pt.gasymov([1.0] * 16, 16), PP, 64, validate=False, projections=False)
    xis = [dz.option2_vectors(b)[1] for b in asm.blocks]
    assert min(xis) > 0 and max(xis) / min(xis) < 1e3


def test_jordan_threshold_modes():
    ar = Arithmetic()
    explicit = dz.Tolerances(jordan_tol=1e-8)
    assert dz.jordan_threshold(explicit, ar, 100.0) == pytest.approx(1e-6)
    auto = dz.Tolerances()
    worst = dz.jordan_threshold(auto, ar, 100.0)
    assert worst == pytest.approx(1e3 * math.sqrt(ar.eps) * 100)
    # small reduced entries lower the threshold
    floor = 1e3 * ar.eps * 100
    assert dz.jordan_threshold(auto, ar, 100.0, (1e-20, 1e-30)) == pytest.approx(floor)
    assert dz.jordan_threshold(auto, Arithmetic(60), 100.0) < 1e-20


def test_tolerances_replace():
    tol = dz.Tolerances().replace(t_floor=1e-2)
    assert tol.t_floor == 1e-2
    with pytest.raises(KeyError, match="bogus"):
        tol.replace(bogus=1)
