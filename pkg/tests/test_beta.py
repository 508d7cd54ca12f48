import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hillbasis import beta as bt
from hillbasis import discretize as dz
from hillbasis import potential as pt

FREE = pt.from_trig_coeffs({})


@pytest.mark.parametrize("bm, bp, expect", [(0, 0, 1.0), (0, 0.5, 0.0), (2, 0, math.inf), (1, 4, 0.25)])
def test_t_ratio_branches(bm, bp, expect):
    assert bt.t_ratio(bm, bp) == expect


def test_t_ratio_zero_tol():
    assert bt.t_ratio(1e-20, 1e-21, zero_tol=1e-15) == 1.0
    assert bt.t_ratio(1e-3, 1e-21, zero_tol=1e-15) == math.inf


@pytest.mark.parametrize("n", [1, 2, 5])
def test_free_beta_vanishes(n):
    ev = bt.beta_pm(FREE, n, 0.1)
    assert ev.beta_minus == 0 and ev.beta_plus == 0 and ev.t == 1.0


@pytest.mark.parametrize("n", [3, 4, 9])
def test_gasymov_beta_minus_is_exactly_zero(n):
    ev = bt.beta_pm(pt.gasymov([1.0] * 24, 24), n, 0.2 + 0.1j)
    assert ev.beta_minus == 0
    assert ev.beta_plus != 0
    assert ev.t == 0.0


@pytest.mark.parametrize("c, z", [(1.0, 0.0), (0.5 + 0.2j, 0.3), (2.0, -0.1 + 0.2j)])
def test_single_chain_oracle(c, z):
    pot = pt.from_trig_coeffs({2: c, -2: c})
    ev = bt.beta_pm(pot, 2, z, order=1, series_tol=0, validate_band=False)
    expect = c * c / (4 + z)
    assert abs(ev.beta_plus - expect) < 1e-15
    bm, bp = bt.brute_force_beta(pot, 2, z, 1, 10)
    assert abs(bp - expect) < 1e-15 and abs(bm - expect) < 1e-15


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_dynamic_programming_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    pot = pt.random_trig_poly(rng, max_harmonics=3, degree=4)
    z = complex(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15)) * n
    ev = bt.beta_pm(pot, n, z, order=3, band=8, series_tol=0, validate_band=False)
    bm, bp = bt.brute_force_beta(pot, n, z, 3, 8)
    assert abs(ev.beta_minus - bm) <= 1e-12 * max(1, abs(bm))
    assert abs(ev.beta_plus - bp) <= 1e-12 * max(1, abs(bp))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_reflection_swaps_entries(seed, n):
    rng = np.random.default_rng(seed)
    pot = pt.random_trig_poly(rng, max_harmonics=4, degree=6, scale=0.5)
    z = 0.1 * n * complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    a = bt.beta_pm(pot, n, z, validate_band=False)
    b = bt.beta_pm(pot.reflected(), n, z, validate_band=False)
    scale = max(1e-300, abs(a.beta_plus), abs(a.beta_minus))
    assert abs(a.beta_plus - b.beta_minus) <= 1e-12 * scale
    assert abs(a.beta_minus - b.beta_plus) <= 1e-12 * scale


def _fd(pot, n, z, h):
    def f(w):
        ev = bt.beta_pm(pot, n, w, validate_band=False)
        return np.array([complex(ev.beta_minus), complex(ev.beta_plus)])

    return (f(z + h) - f(z - h)) / (2 * h), (f(z + 1j * h) - f(z - 1j * h)) / (2j * h)


@pytest.mark.parametrize("n", [4, 7, 12])
def test_cauchy_riemann(n):
    pot = pt.from_trig_coeffs({2: 1.0, -2: 0.3j, 4: 0.5, -6: 0.2})
    dx, dy = _fd(pot, n, 0.05 + 0.02j, 1e-4)
    assert np.max(np.abs(dx - dy)) < 1e-6


def test_derivative_decreases_in_n():
    pot = pt.from_trig_coeffs({2: 1.0, -2: 0.3j, 4: 0.5})
    ns = list(range(4, 30, 2))
    d = [np.max(np.abs(_fd(pot, n, 0.0, 1e-4)[0])) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(d), 1)[0]
    assert slope < 0


def test_multiprecision_agrees_with_double():
    pot = pt.from_trig_coeffs({2: 0.8, -2: 0.4 - 0.1j, 6: 0.3})
    a = bt.beta_pm(pot, 5, 0.3j)
    b = bt.beta_pm(pot, 5, 0.3j, dps=40)
    assert abs(complex(b.beta_plus) - a.beta_plus) < 1e-13 * abs(a.beta_plus)
    assert abs(complex(b.beta_minus) - a.beta_minus) < 1e-13 * abs(a.beta_minus)
    assert b.converged


def test_multiprecision_resolves_tiny_entries():
    ev = bt.beta_pm(pt.mathieu(1.0), 40, 0.0, dps=60, series_tol=1e-40)
    assert 0 < abs(ev.beta_plus) < 1e-60
    assert ev.t == pytest.approx(1.0, abs=1e-30)


def test_term_norms_decay_when_converged():
    ev = bt.beta_pm(pt.delta_comb([math.pi / 2], [1.0], 64), 10, 0.0)
    assert ev.converged
    for key in ("plus", "minus"):
        tail = ev.term_norms[key][-4:]
        assert all(b < a for a, b in zip(tail, tail[1:]))


def test_domain_errors():
    pot = pt.mathieu(1.0)
    with pytest.raises(bt.BetaDomainError, match="outside the disc"):
        bt.beta_pm(pot, 4, 1.5)
    with pytest.raises(bt.BetaDomainError, match="n >= 1"):
        bt.beta_pm(pot, 0, 0.0)
    with pytest.raises(ValueError, match="beta_schur"):
        bt.beta_pm(pt.from_dirac_coeffs({2: 1}, {}), 2, 0.0)


def test_band_beyond_window_is_an_error():
    pot = pt.gasymov([1.0] * 4, 4, strict=True)
    with pytest.raises(pt.CoefficientWindowError):
        bt.beta_pm(pot, 6, 0.0)


@pytest.mark.parametrize("n", [4, 8, 12])
def test_series_matches_schur_complement(n):
    pot = pt.from_trig_coeffs({2: 1.0, -2: 0.5j, 4: 0.3})
    z = 0.1 + 0.05j
    bm, bp = bt.beta_schur(pot, dz.BoundaryCondition.PER_PLUS, n, z, 96)
    ev = bt.beta_pm(pot, n, z)
    assert abs(ev.beta_minus - bm) < 1e-10 * max(1, abs(bm))
    assert abs(ev.beta_plus - bp) < 1e-10 * max(1, abs(bp))


def test_gap_bound_free_and_mathieu():
    asm = dz.assemble_blocks(FREE, "PerPlus", 32, validate=False, projections=False)
    b = asm.blocks[0]
    assert bt.gap_bound_check(b, bt.beta_pm(FREE, b.n, b.z_star)) == 0
    asm = dz.assemble_blocks(pt.mathieu(1.0), "PerPlus", 64, validate=False, projections=False)
    for b in asm.blocks:
        if b.n <= 12:
            ev = bt.beta_pm(pt.mathieu(1.0), b.n, complex(b.z_star))
            assert bt.gap_bound_check(b, ev) <= 1e-6


def test_leading_term_beyond_support_is_beta_itself():
    pot = pt.mathieu(1.0)
    n = 6
    ev = bt.beta_pm(pot, n, 0.0)
    dev = bt.leading_term_check(pot, n, 0.0)
    assert dev == pytest.approx(max(abs(ev.beta_plus), abs(ev.beta_minus)) * n / math.log(n))


def test_leading_term_delta_comb_bounded():
    pot = pt.delta_comb([math.pi / 2], [1.0], 64)
    A = pot.meta["A"]
    devs = [bt.leading_term_check(pot, n, 0.0) for n in range(4, 31)]
    assert max(devs) <= 16 * A * A
