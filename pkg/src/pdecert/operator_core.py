"""The two operator classes driving the analysis, with exact quadratic-form evaluation.

An MNOperator acts on L2^n[0, L] through a pointwise multiplier M(s) and a
pair of triangle kernels N1 (below the diagonal) and N2 (above it).  A
PQRSOperator acts on R^m x L2^n[0, L]; its quadratic form

    F[w, x2] = L w'Pw + 2 w' int_0^L Q(s) x2(s) ds
               + int_0^L int_0^s x2(s)' R1(s,t) x2(t) dt ds
               + int_0^L int_s^L x2(s)' R2(s,t) x2(t) dt ds

is the single convention every reformulation identity in this package is
checked against.  Both functionals are evaluated by exact polynomial
integration, which makes them usable as oracles in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polymat import (
    S,
    THETA,
    DimensionMismatch,
    PolyMatrix,
    compare_norm,
    poly_compare,
    swap_transpose,
)

__all__ = ["MNOperator", "PQRSOperator", "mn_apply", "mn_functional", "pqrs_functional", "AsymmetricOperatorError"]

SYMMETRY_REL_TOL = 1e-9


class AsymmetricOperatorError(ValueError):
    pass


@dataclass
class MNOperator:
    """Multiplier-plus-integral operator: M(s) pointwise, N1 below / N2 above the diagonal."""

    M: PolyMatrix  # n x n in s
    N1: PolyMatrix  # n x n in (s, theta), used for theta <= s
    N2: PolyMatrix  # n x n in (s, theta), used for theta > s

    def __post_init__(self):
        n = self.M.rows
        if self.M.shape != (n, n) or self.N1.shape != (n, n) or self.N2.shape != (n, n):
            raise DimensionMismatch("MNOperator blocks must all be n x n")

    @property
    def n(self) -> int:
        return self.M.rows

    def __add__(self, other: "MNOperator") -> "MNOperator":
        return MNOperator(self.M + other.M, self.N1 + other.N1, self.N2 + other.N2)

    def scale(self, c) -> "MNOperator":
        return MNOperator(self.M.scale(c), self.N1.scale(c), self.N2.scale(c))

    def is_self_adjoint(self, tol: float = SYMMETRY_REL_TOL) -> bool:
        scale = max(self.M.max_coeff_norm(), self.N1.max_coeff_norm(), 1.0)
        dm = compare_norm(poly_compare(self.M, self.M.transpose()))
        dn = compare_norm(poly_compare(self.N2, swap_transpose(self.N1)))
        return max(dm, dn) <= tol * scale

    def require_self_adjoint(self) -> None:
        if not self.is_self_adjoint():
            raise AsymmetricOperatorError("operator data is not self-adjoint")

    @classmethod
    def zero(cls, n: int) -> "MNOperator":
        z2 = PolyMatrix.zeros(n, n)
        return cls(z2, PolyMatrix.zeros(n, n), PolyMatrix.zeros(n, n))


@dataclass
class PQRSOperator:
    """Block operator on R^m x L2^n defined by P, a cross kernel Q, and triangle kernels R1/R2."""

    P: PolyMatrix  # m x m, constant in the spatial variables (may carry decision terms)
    Q: PolyMatrix  # m x n in s
    R1: PolyMatrix  # n x n in (s, theta), theta <= s
    R2: PolyMatrix  # n x n in (s, theta), theta > s

    def __post_init__(self):
        m = self.P.rows
        n = self.R1.rows
        if self.P.shape != (m, m):
            raise DimensionMismatch("P must be square")
        if self.Q.shape != (m, n):
            raise DimensionMismatch(f"Q must be {m} x {n}, got {self.Q.shape}")
        if self.R1.shape != (n, n) or self.R2.shape != (n, n):
            raise DimensionMismatch("R1/R2 must be n x n")
        if self.P.variables():
            raise DimensionMismatch("P may not depend on the spatial variables")

    @property
    def m(self) -> int:
        return self.P.rows

    @property
    def n(self) -> int:
        return self.R1.rows

    def __add__(self, other: "PQRSOperator") -> "PQRSOperator":
        return PQRSOperator(self.P + other.P, self.Q + other.Q, self.R1 + other.R1, self.R2 + other.R2)

    def __neg__(self) -> "PQRSOperator":
        return self.scale(-1)

    def scale(self, c) -> "PQRSOperator":
        return PQRSOperator(self.P.scale(c), self.Q.scale(c), self.R1.scale(c), self.R2.scale(c))

    def is_symmetric(self, tol: float = SYMMETRY_REL_TOL) -> bool:
        scale = max(self.P.max_coeff_norm(), self.R1.max_coeff_norm(), 1.0)
        dp = compare_norm(poly_compare(self.P, self.P.transpose()))
        dr = compare_norm(poly_compare(self.R2, swap_transpose(self.R1)))
        return max(dp, dr) <= tol * scale

    def require_symmetric(self) -> None:
        if not self.is_symmetric():
            raise AsymmetricOperatorError("operator data is not symmetric")

    @classmethod
    def zero(cls, m: int, n: int) -> "PQRSOperator":
        return cls(
            PolyMatrix.zeros(m, m),
            PolyMatrix.zeros(m, n),
            PolyMatrix.zeros(n, n),
            PolyMatrix.zeros(n, n),
        )


def mn_apply(op: MNOperator, x: PolyMatrix, L: float) -> PolyMatrix:
    """Pointwise image (op x)(s) of a polynomial state x(s)."""
    if x.shape != (op.n, 1):
        raise DimensionMismatch(f"state must be {op.n} x 1, got {x.shape}")
    x_t = x.rename({S: THETA})
    below = (op.N1 @ x_t).integrate(THETA, 0.0, S)
    above = (op.N2 @ x_t).integrate(THETA, S, L)
    return op.M @ x + below + above


def mn_functional(op: MNOperator, x: PolyMatrix, L: float, decisions=None) -> float:
    """<x, op x> on L2[0, L], by exact polynomial integration."""
    op.require_self_adjoint()
    inner = x.transpose() @ mn_apply(op, x, L)
    return inner.integrate(S, 0.0, L).eval({}, decisions)[0, 0]


def quadratic_cross(x_left: PolyMatrix, kernel: PolyMatrix, x_right: PolyMatrix, L: float, lower, upper) -> PolyMatrix:
    """int_0^L int_lower^upper x_left(s)' kernel(s,t) x_right(t) dt ds as a 1x1 polynomial."""
    integrand = x_left.transpose() @ kernel @ x_right.rename({S: THETA})
    return integrand.integrate(THETA, lower, upper).integrate(S, 0.0, L)


def pqrs_functional(op: PQRSOperator, w: np.ndarray, x2: PolyMatrix, L: float, decisions=None) -> float:
    """F[w, x2] for a symmetric PQRS operator (see module docstring for the convention)."""
    op.require_symmetric()
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != op.m:
        raise DimensionMismatch(f"w must have length {op.m}")
    if x2.shape != (op.n, 1):
        raise DimensionMismatch(f"x2 must be {op.n} x 1")
    total = L * float(w @ op.P.eval({}, decisions) @ w)
    q_int = (op.Q @ x2).integrate(S, 0.0, L).eval({}, decisions).reshape(-1)
    total += 2.0 * float(w @ q_int)
    total += quadratic_cross(x2, op.R1, x2, L, 0.0, S).eval({}, decisions)[0, 0]
    total += quadratic_cross(x2, op.R2, x2, L, S, L).eval({}, decisions)[0, 0]
    return total
