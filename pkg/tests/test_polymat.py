"""Unit and property tests for the polynomial engine."""

from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import assert_poly_close, rand_poly
from pdecert.polymat import (
    BETA,
    ETA,
    S,
    THETA,
    AffineCoeff,
    AffineDegreeError,
    DimensionMismatch,
    PolyMatrix,
    TriangleKernel,
    UnassignedSymbolError,
    kernel_integrate,
    poly_arith,
    poly_compare,
    poly_eval,
    poly_integrate,
)

s_poly = PolyMatrix.monomial(S)
theta_poly = PolyMatrix.monomial(THETA)
one = PolyMatrix.constant(1.0)


def test_monomial_product():
    assert_poly_close(s_poly @ s_poly, PolyMatrix.monomial(S, 2), tol=0)


def test_identity_multiplication(rng):
    a = rand_poly(rng, 2, 2, [S, THETA], 3)
    assert poly_compare(PolyMatrix.identity(2) @ a, a) == []


def test_difference_of_squares():
    p = one + s_poly
    q = one - s_poly
    expect = one - PolyMatrix.monomial(S, 2)
    assert_poly_close(p @ q, expect, tol=0)


def test_affine_product_rejected():
    d = PolyMatrix.decision(("x", 0, 0))
    with pytest.raises(AffineDegreeError):
        _ = d @ d


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        _ = PolyMatrix.zeros(2, 3) @ PolyMatrix.zeros(2, 3)
    with pytest.raises(DimensionMismatch):
        poly_arith(PolyMatrix.zeros(2, 3), PolyMatrix.zeros(3, 3), "add")


def test_integrate_power_rule():
    # int_0^s theta dtheta = s^2 / 2
    got = poly_integrate(theta_poly, THETA, 0.0, S)
    assert_poly_close(got, PolyMatrix.monomial(S, 2, 0.5), tol=0)


def test_integrate_constant():
    # int_s^L 1 dtheta = L - s
    L = 1.7
    got = poly_integrate(one, THETA, S, L)
    assert_poly_close(got, PolyMatrix.constant(L) - s_poly, tol=1e-15)


def test_integrate_bilinear_vs_quadrature():
    # int_0^L (s - theta) * theta dtheta = s L^2/2 - L^3/3, spot checked at s=0.3, L=1
    L = 1.0
    integrand = (s_poly - theta_poly).scalar_mul(theta_poly)
    got = poly_integrate(integrand, THETA, 0.0, L)
    expect = PolyMatrix.monomial(S, 1, L**2 / 2) - PolyMatrix.constant(L**3 / 3)
    assert_poly_close(got, expect, tol=1e-14)
    val, _ = quad(lambda th: (0.3 - th) * th, 0.0, 1.0)
    assert got.eval({S: 0.3})[0, 0] == pytest.approx(val, rel=1e-13)


def test_integration_bound_error():
    with pytest.raises(Exception):
        poly_integrate(theta_poly, THETA, 0.0, THETA)


def test_kernel_indicator_measure():
    # indicator of {eta <= s} integrated over eta in [0, L] has measure s
    k = TriangleKernel(S, ETA, upper=one, lower=PolyMatrix.zeros(1, 1))
    got = kernel_integrate(k, ETA, 1.0)
    assert_poly_close(got, s_poly, tol=0)


def test_kernel_dirichlet_state_kernel():
    # G(s,eta) = s(eta-1) + 1(s>=eta)(s-eta) on [0,1]; its eta-integral is s(s-1)/2
    base = s_poly.scalar_mul(PolyMatrix.monomial(ETA) - one)
    k = TriangleKernel(S, ETA, upper=base + (s_poly - PolyMatrix.monomial(ETA)), lower=base)
    got = kernel_integrate(k, ETA, 1.0)
    expect = PolyMatrix.monomial(S, 2, 0.5) - PolyMatrix.monomial(S, 1, 0.5)
    assert_poly_close(got, expect, tol=1e-14)
    assert got.eval({S: 0.5})[0, 0] == pytest.approx(-0.125)


def test_kernel_zero():
    z = PolyMatrix.zeros(2, 2)
    k = TriangleKernel(S, ETA, upper=z, lower=z)
    assert kernel_integrate(k, ETA, 2.0).is_zero()


def test_kernel_full_is_left_plus_right(rng):
    up = rand_poly(rng, 2, 2, [S, ETA], 3)
    lo = rand_poly(rng, 2, 2, [S, ETA], 3)
    k = TriangleKernel(S, ETA, upper=up, lower=lo)
    full = kernel_integrate(k, ETA, 1.0)
    left = kernel_integrate(k, ETA, 1.0, "left")
    right = kernel_integrate(k, ETA, 1.0, "right")
    assert poly_compare(full, left + right) == []


def test_kernel_integrate_first_variable(rng):
    # integrating the first variable picks the lower branch below the diagonal
    up = rand_poly(rng, 1, 1, [S, ETA], 2)
    lo = rand_poly(rng, 1, 1, [S, ETA], 2)
    k = TriangleKernel(S, ETA, upper=up, lower=lo)
    got = kernel_integrate(k, S, 1.0)
    expect = lo.integrate(S, 0.0, ETA) + up.integrate(S, ETA, 1.0)
    assert poly_compare(got, expect) == []


def test_compare_trivial_cases():
    assert poly_compare(s_poly, s_poly) == []
    diffs = poly_compare(s_poly, PolyMatrix.zeros(1, 1))
    assert len(diffs) == 1
    assert diffs[0].cell == (0, 0)
    assert diffs[0].coeff.const == 1.0

    gamma = ("gain_sq", 0, 0)
    a = PolyMatrix(1, 1, {(0, 0): {(1, 0, 0, 0): AffineCoeff(0.0, {gamma: 1.0})}})
    b = PolyMatrix.monomial(S, 1, 2.0)
    diffs = poly_compare(a, b)
    assert len(diffs) == 1
    assert diffs[0].coeff.const == -2.0
    assert diffs[0].coeff.terms == {gamma: 1.0}


def test_eval_examples():
    assert poly_eval(PolyMatrix.monomial(S, 2), {S: 3.0})[0, 0] == 9.0
    L = 2.0
    p = PolyMatrix.constant(L) - s_poly
    assert poly_eval(p, {S: L})[0, 0] == 0.0
    g = PolyMatrix.decision(("gain_sq", 0, 0), 1.0 / L)
    assert poly_eval(g, {}, {("gain_sq", 0, 0): 4.0})[0, 0] == pytest.approx(2.0)
    with pytest.raises(UnassignedSymbolError):
        poly_eval(s_poly, {})
    with pytest.raises(UnassignedSymbolError):
        poly_eval(g, {}, {})


def test_integration_linearity(rng):
    for _ in range(10):
        p = rand_poly(rng, 2, 1, [S, THETA], 4)
        q = rand_poly(rng, 2, 1, [S, THETA], 4)
        alpha = float(rng.standard_normal())
        lhs = poly_integrate(p.scale(alpha) + q, THETA, 0.0, S)
        rhs = poly_integrate(p, THETA, 0.0, S).scale(alpha) + poly_integrate(q, THETA, 0.0, S)
        assert_poly_close(lhs, rhs, tol=1e-13)


def test_fundamental_theorem(rng):
    for _ in range(10):
        p = rand_poly(rng, 1, 1, [S], 6)
        integral = poly_integrate(p.rename({S: THETA}), THETA, 0.0, S)
        assert_poly_close(integral.diff(S), p, tol=1e-13)


def test_quadrature_oracle(rng):
    for _ in range(100):
        p = rand_poly(rng, 1, 1, [S], 5)
        lo, hi = sorted(rng.uniform(0.0, 1.0, size=2))
        got = poly_integrate(p, S, lo, hi)
        assert got.variables() == set()
        expect, _ = quad(lambda x: p.eval({S: x})[0, 0], lo, hi)
        assert got.eval({})[0, 0] == pytest.approx(expect, rel=1e-12, abs=1e-13)


def test_transpose_involution(rng):
    a = rand_poly(rng, 3, 2, [S, THETA], 2)
    assert poly_compare(a.T.T, a) == []


def test_mul_associativity_exact():
    rng = np.random.default_rng(7)
    dims = (2, 3, 2, 2)
    mats = []
    for r, c in zip(dims[:-1], dims[1:]):
        m = PolyMatrix(r, c)
        for i in range(r):
            for j in range(c):
                m.cells[(i, j)] = {
                    (int(rng.integers(0, 2)), int(rng.integers(0, 2)), 0, 0): AffineCoeff(
                        Fraction(int(rng.integers(-3, 4)))
                    )
                }
        mats.append(m)
    a, b, c = mats
    lhs = (a @ b) @ c
    rhs = a @ (b @ c)
    assert poly_compare(lhs, rhs) == []


def test_exact_rational_mode():
    # coefficients stay exact through integration when given as Fractions
    p = PolyMatrix(1, 1, {(0, 0): {(2, 0, 0, 0): AffineCoeff(Fraction(1, 3))}})
    got = poly_integrate(p, S, 0, PolyMatrix.constant(Fraction(1, 2)))
    coeff = got.cells[(0, 0)][(0, 0, 0, 0)].const
    assert coeff == Fraction(1, 72)
    assert isinstance(coeff, Fraction)


def test_degenerate_dimensions():
    empty = PolyMatrix.zeros(0, 2)
    tall = PolyMatrix.zeros(2, 0)
    prod = empty @ PolyMatrix.identity(2)
    assert prod.shape == (0, 2)
    assert (tall @ empty).shape == (2, 2)
    assert (tall @ empty).is_zero()
    assert empty.eval({}).shape == (0, 2)


def test_rename_swap(rng):
    p = rand_poly(rng, 1, 1, [S, THETA], 3)
    swapped = p.rename({S: THETA, THETA: S})
    assert poly_compare(swapped.rename({S: THETA, THETA: S}), p) == []
    pt = {S: 0.37, THETA: -1.21}
    assert swapped.eval(pt)[0, 0] == pytest.approx(p.eval({S: pt[THETA], THETA: pt[S]})[0, 0])


def test_prune_drops_roundoff_dust():
    p = PolyMatrix(1, 1, {(0, 0): {(0, 0, 0, 0): AffineCoeff(1.0), (1, 0, 0, 0): AffineCoeff(1e-30)}})
    assert (1, 0, 0, 0) not in p.pruned().cells[(0, 0)]
