"""Operator quadratic forms against brute-force quadrature."""

import numpy as np
import pytest
from scipy.integrate import dblquad

from conftest import assert_poly_close, rand_poly
from pdecert.operator_core import (
    AsymmetricOperatorError,
    MNOperator,
    PQRSOperator,
    mn_apply,
    mn_functional,
    pqrs_functional,
)
from pdecert.polymat import S, THETA, PolyMatrix, swap_transpose


def random_self_adjoint(rng, n, deg=3):
    m = rand_poly(rng, n, n, [S], deg)
    n1 = rand_poly(rng, n, n, [S, THETA], deg)
    return MNOperator(m + m.transpose(), n1, swap_transpose(n1))


def test_pqrs_pure_feedthrough():
    L = 2.5
    op = PQRSOperator(
        PolyMatrix.identity(2, 1.0 / L),
        PolyMatrix.zeros(2, 1),
        PolyMatrix.zeros(1, 1),
        PolyMatrix.zeros(1, 1),
    )
    w = np.array([0.3, -1.2])
    val = pqrs_functional(op, w, PolyMatrix.zeros(1, 1), L)
    assert val == pytest.approx(w @ w)


def test_pqrs_zero_operator(rng):
    op = PQRSOperator.zero(2, 2)
    x2 = rand_poly(rng, 2, 1, [S], 3)
    assert pqrs_functional(op, np.ones(2), x2, 1.0) == 0.0


def test_pqrs_constant_kernels():
    # unit R kernels with unit state: both triangles contribute 1/2
    op = PQRSOperator(
        PolyMatrix.zeros(0, 0),
        PolyMatrix.zeros(0, 1),
        PolyMatrix.identity(1),
        PolyMatrix.identity(1),
    )
    val = pqrs_functional(op, np.zeros(0), PolyMatrix.constant(1.0), 1.0)
    assert val == pytest.approx(1.0)


def test_mn_norm_functional():
    op = MNOperator(PolyMatrix.identity(1), PolyMatrix.zeros(1, 1), PolyMatrix.zeros(1, 1))
    assert mn_functional(op, PolyMatrix.constant(1.0), 1.0) == pytest.approx(1.0)
    assert mn_functional(op, PolyMatrix.zeros(1, 1), 1.0) == 0.0


def test_mn_functional_unit_kernels_vs_quadrature():
    op = MNOperator(PolyMatrix.zeros(1, 1), PolyMatrix.identity(1), PolyMatrix.identity(1))
    x = PolyMatrix.monomial(S)
    got = mn_functional(op, x, 1.0)
    expect, _ = dblquad(lambda t, s: s * t, 0.0, 1.0, 0.0, 1.0)
    assert got == pytest.approx(expect, rel=1e-12)
    assert got == pytest.approx(0.25)


def test_mn_apply_identity(rng):
    op = MNOperator(PolyMatrix.identity(2), PolyMatrix.zeros(2, 2), PolyMatrix.zeros(2, 2))
    x = rand_poly(rng, 2, 1, [S], 3)
    assert_poly_close(mn_apply(op, x, 1.0), x, tol=1e-14)
    assert mn_apply(op, PolyMatrix.zeros(2, 1), 1.0).is_zero()


def test_mn_apply_unit_kernels_constant_state():
    op = MNOperator(PolyMatrix.zeros(1, 1), PolyMatrix.identity(1), PolyMatrix.identity(1))
    got = mn_apply(op, PolyMatrix.constant(1.0), 1.0)
    assert_poly_close(got, PolyMatrix.constant(1.0), tol=1e-14)


def test_mn_apply_consistent_with_functional(rng):
    for _ in range(100):
        n = int(rng.integers(1, 3))
        op = random_self_adjoint(rng, n)
        x = rand_poly(rng, n, 1, [S], 4)
        direct = mn_functional(op, x, 1.0)
        via_apply = (x.transpose() @ mn_apply(op, x, 1.0)).integrate(S, 0.0, 1.0).eval({})[0, 0]
        assert direct == pytest.approx(via_apply, rel=1e-12, abs=1e-12)


def test_pqrs_swap_invariance(rng):
    # exchanging (R1, R2) for their adjoint partners leaves the form unchanged
    n, m = 2, 2
    p = rand_poly(rng, m, m, [], 0)
    p = p + p.transpose()
    q = rand_poly(rng, m, n, [S], 2)
    r1 = rand_poly(rng, n, n, [S, THETA], 2)
    op = PQRSOperator(p, q, r1, swap_transpose(r1))
    swapped = PQRSOperator(p, q, swap_transpose(op.R2), swap_transpose(op.R1))
    w = rng.standard_normal(m)
    x2 = rand_poly(rng, n, 1, [S], 3)
    assert pqrs_functional(op, w, x2, 1.0) == pytest.approx(
        pqrs_functional(swapped, w, x2, 1.0), rel=1e-12
    )


def test_pqrs_quadratic_scaling(rng):
    n, m = 2, 1
    p = rand_poly(rng, m, m, [], 0)
    p = p + p.transpose()
    q = rand_poly(rng, m, n, [S], 2)
    r1 = rand_poly(rng, n, n, [S, THETA], 2)
    op = PQRSOperator(p, q, r1, swap_transpose(r1))
    w = rng.standard_normal(m)
    x2 = rand_poly(rng, n, 1, [S], 3)
    base = pqrs_functional(op, w, x2, 1.3)
    alpha = 1.7
    scaled = pqrs_functional(op, alpha * w, x2.scale(alpha), 1.3)
    assert scaled == pytest.approx(alpha**2 * base, rel=1e-12)


def test_asymmetric_operator_rejected(rng):
    n1 = rand_poly(rng, 1, 1, [S, THETA], 2)
    op = MNOperator(PolyMatrix.identity(1), n1, n1)
    with pytest.raises(AsymmetricOperatorError):
        mn_functional(op, PolyMatrix.constant(1.0), 1.0)
