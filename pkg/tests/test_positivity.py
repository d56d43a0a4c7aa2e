"""Gram parameterizations checked against explicit square expansions."""

import numpy as np
import pytest

from conftest import rand_poly
from pdecert.operator_core import MNOperator, mn_functional, pqrs_functional
from pdecert.polymat import (
    BETA,
    S,
    THETA,
    PolyMatrix,
    compare_norm,
    poly_compare,
)
from pdecert.positivity import (
    PSDBlockVar,
    build_bases,
    gram_values,
    mn_from_gram,
    pqrs_from_gram,
)


def random_psd(rng, dim, rank=None):
    a = rng.standard_normal((dim, rank or dim))
    t = a @ a.T
    return t / max(1.0, np.linalg.norm(t, 2))


def sqrt_slices(T, partition):
    w, v = np.linalg.eigh(T)
    u = np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.T
    p1, p2, p3 = partition
    return u[:, :p1], u[:, p1 : p1 + p2], u[:, p1 + p2 :]


def expand_square(U1, U2, U3, basis, L):
    """(P, Q, R1, R2) of the squared factor, built by branch selection per subinterval."""
    zb_t = basis.Z.rename({S: BETA})  # Z(beta, theta)
    zb_s = basis.Z.rename({S: BETA, THETA: S})  # Z(beta, s)
    a2s = PolyMatrix.from_array(U2) @ zb_s
    a3s = PolyMatrix.from_array(U3) @ zb_s
    a2t = PolyMatrix.from_array(U2) @ zb_t
    a3t = PolyMatrix.from_array(U3) @ zb_t
    p = PolyMatrix.from_array(U1.T @ U1)
    u1t = PolyMatrix.from_array(U1.T)
    q = (
        (u1t @ a2t).integrate(BETA, THETA, L) + (u1t @ a3t).integrate(BETA, 0.0, THETA)
    ).rename({THETA: S})
    r1 = (
        (a3s.transpose() @ a3t).integrate(BETA, 0.0, THETA)
        + (a3s.transpose() @ a2t).integrate(BETA, THETA, S)
        + (a2s.transpose() @ a2t).integrate(BETA, S, L)
    )
    r2 = (
        (a3s.transpose() @ a3t).integrate(BETA, 0.0, S)
        + (a2s.transpose() @ a3t).integrate(BETA, S, THETA)
        + (a2s.transpose() @ a2t).integrate(BETA, THETA, L)
    )
    return p, q, r1, r2


def test_basis_scalar_unit():
    basis = build_bases(1, 0, 0)
    assert basis.Z1.shape == (1, 1)
    assert basis.Z.shape == (1, 1)
    assert basis.mn_block_dim == 3


def test_basis_linear_counts():
    basis = build_bases(1, 1, 1)
    assert basis.Z1.shape == (2, 1)
    assert basis.Z.shape == (3, 1)
    assert basis.mn_block_dim == 8
    # listing order: 1, s, theta
    assert basis.Z.eval({S: 2.0, THETA: 5.0}).ravel().tolist() == [1.0, 2.0, 5.0]


def test_basis_tensor_structure():
    basis = build_bases(2, 1, 0)
    assert basis.Z1.shape == (4, 2)
    got = basis.Z1.eval({S: 3.0})
    assert np.allclose(got, np.vstack([np.eye(2), 3.0 * np.eye(2)]))


def test_zero_gram_gives_zero_operators():
    basis = build_bases(1, 1, 1)
    blk = PSDBlockVar("T", (basis.univariate_rows, basis.bivariate_rows, basis.bivariate_rows))
    zeros = gram_values(blk, np.zeros((blk.dim, blk.dim)))
    op = mn_from_gram(blk, basis, 1.0)
    assert op.M.with_decisions(zeros).is_zero()
    assert op.N1.with_decisions(zeros).is_zero()
    blk2 = PSDBlockVar("U", (2, basis.bivariate_rows, basis.bivariate_rows))
    form = pqrs_from_gram(blk2, basis, 1.0, 2)
    z2 = gram_values(blk2, np.zeros((blk2.dim, blk2.dim)))
    assert form.P.with_decisions(z2).is_zero()
    assert form.Q.with_decisions(z2).is_zero()
    assert form.R1.with_decisions(z2).is_zero()


def test_identity_gram_scalar_case():
    L = 1.4
    basis = build_bases(1, 0, 0)
    blk = PSDBlockVar("T", (1, 1, 1))
    vals = gram_values(blk, np.eye(3))
    form = pqrs_from_gram(blk, basis, L, 1)
    r1 = form.R1.with_decisions(vals)
    # (L - s) + theta from the three unit integrals
    expect = PolyMatrix.constant(L) - PolyMatrix.monomial(S) + PolyMatrix.monomial(THETA)
    assert compare_norm(poly_compare(r1, expect)) <= 1e-12
    assert form.Q.with_decisions(vals).is_zero()
    assert np.allclose(form.P.with_decisions(vals).eval({}), 1.0)

    op = mn_from_gram(PSDBlockVar("M", (1, 1, 1)), basis, L)
    vals2 = gram_values(PSDBlockVar("M", (1, 1, 1)), np.eye(3))
    assert np.allclose(op.M.with_decisions(vals2).eval({}), 1.0)
    assert compare_norm(poly_compare(op.N1.with_decisions(vals2), expect)) <= 1e-12


@pytest.mark.parametrize("n,d1,d2,L", [(1, 1, 1, 1.0), (2, 0, 1, 1.5), (1, 2, 2, 0.8)])
def test_mn_square_expansion_exact(rng, n, d1, d2, L):
    basis = build_bases(n, d1, d2)
    part = (basis.univariate_rows, basis.bivariate_rows, basis.bivariate_rows)
    blk = PSDBlockVar("T", part)
    op = mn_from_gram(blk, basis, L)
    for _ in range(7):
        t = random_psd(rng, blk.dim)
        vals = gram_values(blk, t)
        u1, u2, u3 = sqrt_slices(t, part)
        _, _, r1, _ = expand_square(u1, u2, u3, basis, L)
        z_ts = basis.Z.rename({S: THETA, THETA: S})
        z1_t = basis.Z1.rename({S: THETA})
        n1_expect = (
            basis.Z1.transpose() @ PolyMatrix.from_array(u1.T @ u2) @ basis.Z
            + z_ts.transpose() @ PolyMatrix.from_array(u3.T @ u1) @ z1_t
            + r1
        )
        m_expect = basis.Z1.transpose() @ PolyMatrix.from_array(u1.T @ u1) @ basis.Z1
        assert compare_norm(poly_compare(op.M.with_decisions(vals), m_expect)) <= 1e-10
        assert compare_norm(poly_compare(op.N1.with_decisions(vals), n1_expect)) <= 1e-10


@pytest.mark.parametrize("n,d2,m,L", [(1, 1, 1, 1.0), (2, 1, 2, 1.5), (1, 3, 2, 0.8)])
def test_pqrs_square_expansion_exact(rng, n, d2, m, L):
    basis = build_bases(n, 0, d2)
    part = (m, basis.bivariate_rows, basis.bivariate_rows)
    blk = PSDBlockVar("T", part)
    form = pqrs_from_gram(blk, basis, L, m)
    for _ in range(7):
        t = random_psd(rng, blk.dim)
        vals = gram_values(blk, t)
        u1, u2, u3 = sqrt_slices(t, part)
        p, q, r1, r2 = expand_square(u1, u2, u3, basis, L)
        assert compare_norm(poly_compare(form.P.with_decisions(vals), p)) <= 1e-10
        assert compare_norm(poly_compare(form.Q.with_decisions(vals), q)) <= 1e-10
        assert compare_norm(poly_compare(form.R1.with_decisions(vals), r1)) <= 1e-10
        assert compare_norm(poly_compare(form.R2.with_decisions(vals), r2)) <= 1e-10


def test_linearity_in_gram(rng):
    basis = build_bases(1, 1, 1)
    part = (basis.univariate_rows, basis.bivariate_rows, basis.bivariate_rows)
    blk = PSDBlockVar("T", part)
    op = mn_from_gram(blk, basis, 1.0)
    ta = random_psd(rng, blk.dim)
    tb = random_psd(rng, blk.dim)
    combined = op.N1.with_decisions(gram_values(blk, ta + tb))
    separate = op.N1.with_decisions(gram_values(blk, ta)) + op.N1.with_decisions(gram_values(blk, tb))
    assert compare_norm(poly_compare(combined, separate)) <= 1e-12


def test_mn_sampled_nonnegativity(rng):
    L = 1.0
    basis = build_bases(1, 1, 1)
    part = (basis.univariate_rows, basis.bivariate_rows, basis.bivariate_rows)
    blk = PSDBlockVar("T", part)
    template = mn_from_gram(blk, basis, L)
    for _ in range(10):
        t = random_psd(rng, blk.dim)
        vals = gram_values(blk, t)
        op = MNOperator(
            template.M.with_decisions(vals),
            template.N1.with_decisions(vals),
            template.N2.with_decisions(vals),
        )
        for _ in range(20):
            x = rand_poly(rng, 1, 1, [S], 4)
            val = mn_functional(op, x, L)
            norm_sq = (x.transpose() @ x).integrate(S, 0.0, L).eval({})[0, 0]
            assert val >= -1e-9 * (1.0 + norm_sq)


def test_pqrs_sampled_nonnegativity(rng):
    L = 1.3
    basis = build_bases(2, 0, 1)
    m = 2
    part = (m, basis.bivariate_rows, basis.bivariate_rows)
    blk = PSDBlockVar("T", part)
    template = pqrs_from_gram(blk, basis, L, m)
    for _ in range(10):
        t = random_psd(rng, blk.dim)
        vals = gram_values(blk, t)
        form = template
        numeric = type(form)(
            form.P.with_decisions(vals),
            form.Q.with_decisions(vals),
            form.R1.with_decisions(vals),
            form.R2.with_decisions(vals),
        )
        for _ in range(20):
            w = rng.standard_normal(m)
            x2 = rand_poly(rng, 2, 1, [S], 3)
            val = pqrs_functional(numeric, w, x2, L)
            norm_sq = (x2.transpose() @ x2).integrate(S, 0.0, L).eval({})[0, 0]
            assert val >= -1e-9 * (1.0 + float(w @ w) + norm_sq)


def test_coercivity_shift(rng):
    L = 1.0
    eps = 1e-4
    basis = build_bases(1, 1, 1)
    part = (basis.univariate_rows, basis.bivariate_rows, basis.bivariate_rows)
    blk = PSDBlockVar("T", part)
    template = mn_from_gram(blk, basis, L)
    t = random_psd(rng, blk.dim)
    vals = gram_values(blk, t)
    shifted = MNOperator(
        template.M.with_decisions(vals) + PolyMatrix.identity(1, eps),
        template.N1.with_decisions(vals),
        template.N2.with_decisions(vals),
    )
    for _ in range(200):
        x = rand_poly(rng, 1, 1, [S], 4)
        val = mn_functional(shifted, x, L)
        norm_sq = (x.transpose() @ x).integrate(S, 0.0, L).eval({})[0, 0]
        assert val >= eps * norm_sq - 1e-9 * (1.0 + norm_sq)


def test_partition_mismatch_rejected():
    basis = build_bases(1, 1, 1)
    blk = PSDBlockVar("T", (1, 2, 2))
    with pytest.raises(ValueError):
        mn_from_gram(blk, basis, 1.0)
    with pytest.raises(ValueError):
        pqrs_from_gram(blk, basis, 1.0, 2)
