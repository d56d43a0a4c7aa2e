"""Positive-operator cones parameterized by PSD Gram matrices over monomial bases.

Given a 3x3-partitioned symmetric decision matrix T >= 0 and monomial bases,
``mn_from_gram`` builds a self-adjoint MNOperator and ``pqrs_from_gram`` a
symmetric PQRSOperator that are nonnegative by construction: each one is the
quadratic form of U_1 x_1 + int U_2 Z x_2 + int U_3 Z x_2 for any square root
U of T.  Membership in either cone is therefore expressed purely as "T is
positive semidefinite" plus linear coefficient relations, never tested post
hoc.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .operator_core import MNOperator, PQRSOperator
from .polymat import (
    BETA,
    S,
    THETA,
    AffineCoeff,
    PolyMatrix,
    swap_transpose,
)

__all__ = [
    "MonomialBasis",
    "PSDBlockVar",
    "build_bases",
    "mn_from_gram",
    "pqrs_from_gram",
    "symbolic_block",
    "gram_values",
]


def _bivariate_monomials(d: int) -> list[tuple[int, int]]:
    """(s, theta)-exponents with total degree <= d, ascending degree, s-major."""
    monos = []
    for total in range(d + 1):
        for es in range(total, -1, -1):
            monos.append((es, total - es))
    return monos


@dataclass
class MonomialBasis:
    """Monomial bases tensored with the n-dimensional identity."""

    n: int
    d1: int
    d2: int
    Z1: PolyMatrix  # (d1+1)n x n in s
    Z: PolyMatrix  # c*n x n in (s, theta)
    c: int  # number of bivariate monomials

    @property
    def univariate_rows(self) -> int:
        return (self.d1 + 1) * self.n

    @property
    def bivariate_rows(self) -> int:
        return self.c * self.n

    @property
    def mn_block_dim(self) -> int:
        return self.univariate_rows + 2 * self.bivariate_rows

    def pqrs_block_dim(self, firstdim: int) -> int:
        return firstdim + 2 * self.bivariate_rows


def build_bases(n: int, d1: int, d2: int) -> MonomialBasis:
    if d1 < 0 or d2 < 0 or n < 0:
        raise ValueError("degrees and dimension must be nonnegative")
    z1 = PolyMatrix((d1 + 1) * n, n)
    for k in range(d1 + 1):
        mono = (k, 0, 0, 0)
        for i in range(n):
            z1.cells[(k * n + i, i)] = {mono: AffineCoeff(1.0)}
    monos = _bivariate_monomials(d2)
    z = PolyMatrix(len(monos) * n, n)
    for k, (es, et) in enumerate(monos):
        mono = (es, et, 0, 0)
        for i in range(n):
            z.cells[(k * n + i, i)] = {mono: AffineCoeff(1.0)}
    return MonomialBasis(n=n, d1=d1, d2=d2, Z1=z1, Z=z, c=len(monos))


@dataclass
class PSDBlockVar:
    """A named symmetric PSD decision block with a fixed 3-way partition."""

    name: str
    partition: tuple[int, int, int]

    @property
    def dim(self) -> int:
        return sum(self.partition)

    def entry_id(self, i: int, j: int):
        return (self.name, min(i, j), max(i, j))

    def entry_ids(self):
        for i, j in combinations_with_replacement(range(self.dim), 2):
            yield (self.name, i, j)


def symbolic_block(block: PSDBlockVar, rows: range, cols: range) -> PolyMatrix:
    """Sub-block of the symmetric decision matrix as a decision-affine PolyMatrix."""
    out = PolyMatrix(len(rows), len(cols))
    zero = (0, 0, 0, 0)
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            out.cells[(a, b)] = {zero: AffineCoeff(0.0, {block.entry_id(i, j): 1.0})}
    return out


def gram_values(block: PSDBlockVar, T: np.ndarray) -> dict:
    """Decision assignment mapping the block's entry ids to a numeric matrix."""
    T = np.asarray(T, dtype=float)
    if T.shape != (block.dim, block.dim):
        raise ValueError(f"matrix shape {T.shape} does not match block dim {block.dim}")
    return {(block.name, i, j): T[i, j] for i, j in combinations_with_replacement(range(block.dim), 2)}


def _partition_ranges(block: PSDBlockVar):
    p1, p2, p3 = block.partition
    r1 = range(0, p1)
    r2 = range(p1, p1 + p2)
    r3 = range(p1 + p2, p1 + p2 + p3)
    return r1, r2, r3


def _triangle_gram_kernel(block: PSDBlockVar, basis: MonomialBasis, L: float) -> PolyMatrix:
    """Kernel on theta <= s from the three diagonal-split integrals of Z' T Z."""
    r1, r2, r3 = _partition_ranges(block)
    t22 = symbolic_block(block, r2, r2)
    t32 = symbolic_block(block, r3, r2)
    t33 = symbolic_block(block, r3, r3)
    z_bs = basis.Z.rename({S: BETA, THETA: S})  # Z(beta, s)
    z_bt = basis.Z.rename({S: BETA})  # Z(beta, theta)
    return (
        (z_bs.transpose() @ t22 @ z_bt).integrate(BETA, S, L)
        + (z_bs.transpose() @ t32 @ z_bt).integrate(BETA, THETA, S)
        + (z_bs.transpose() @ t33 @ z_bt).integrate(BETA, 0.0, THETA)
    )


def mn_from_gram(block: PSDBlockVar, basis: MonomialBasis, L: float) -> MNOperator:
    """Self-adjoint MNOperator that is nonnegative whenever the block is PSD."""
    if block.partition != (basis.univariate_rows, basis.bivariate_rows, basis.bivariate_rows):
        raise ValueError(
            f"block partition {block.partition} does not match basis "
            f"({basis.univariate_rows}, {basis.bivariate_rows}, {basis.bivariate_rows})"
        )
    r1, r2, r3 = _partition_ranges(block)
    t11 = symbolic_block(block, r1, r1)
    t12 = symbolic_block(block, r1, r2)
    t31 = symbolic_block(block, r3, r1)
    m = basis.Z1.transpose() @ t11 @ basis.Z1
    z_ts = basis.Z.rename({S: THETA, THETA: S})  # Z(theta, s)
    z1_t = basis.Z1.rename({S: THETA})
    n1 = (
        basis.Z1.transpose() @ t12 @ basis.Z
        + z_ts.transpose() @ t31 @ z1_t
        + _triangle_gram_kernel(block, basis, L)
    )
    return MNOperator(m, n1, swap_transpose(n1))


def pqrs_from_gram(block: PSDBlockVar, basis: MonomialBasis, L: float, firstdim: int) -> PQRSOperator:
    """Symmetric PQRSOperator that is nonnegative whenever the block is PSD."""
    if block.partition != (firstdim, basis.bivariate_rows, basis.bivariate_rows):
        raise ValueError(
            f"block partition {block.partition} does not match "
            f"({firstdim}, {basis.bivariate_rows}, {basis.bivariate_rows})"
        )
    r1, r2, r3 = _partition_ranges(block)
    p = symbolic_block(block, r1, r1)
    t12 = symbolic_block(block, r1, r2)
    t13 = symbolic_block(block, r1, r3)
    z_bt = basis.Z.rename({S: BETA})  # Z(beta, theta)
    q_theta = (t12 @ z_bt).integrate(BETA, THETA, L) + (t13 @ z_bt).integrate(BETA, 0.0, THETA)
    q = q_theta.rename({THETA: S})
    r1_kernel = _triangle_gram_kernel(block, basis, L)
    return PQRSOperator(p, q, r1_kernel, swap_transpose(r1_kernel))
