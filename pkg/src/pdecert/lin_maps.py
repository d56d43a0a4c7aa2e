"""Linear maps that rewrite operator inequalities on the state as kernel forms on the curvature.

Every map here takes an MNOperator acting on the state x and produces kernel
data acting on the curvature x_ss, using the boundary-elimination kernels of
the validated system.  The three core maps handle the pairings <x, P x>,
<x, P x_s>, and <x, P x_ss>; on top of them sit the input coupling kernel and
the two end-to-end assemblies for gain and passivity analysis.

All outputs are affine in whatever decision variables the input operator
carries, so the assemblies can be fed directly into coefficient matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator_core import MNOperator, PQRSOperator
from .pde_model import ValidatedSystem
from .polymat import (
    BETA,
    ETA,
    S,
    THETA,
    AffineCoeff,
    PolyMatrix,
    TriangleKernel,
    hcat,
    kernel_integrate,
    swap_transpose,
)

__all__ = [
    "KernelPair",
    "BoundaryMoments",
    "map_xx",
    "map_xs",
    "map_xss",
    "input_coupling_kernel",
    "assemble_gain_form",
    "assemble_passivity_form",
    "compose_multiplier",
    "dynamics_kernels",
    "GAIN_SQ",
]

GAIN_SQ = ("gain_sq", 0, 0)  # canonical decision id for the squared gain


@dataclass
class KernelPair:
    """Kernels acting below (first) and above (second) the diagonal."""

    first: PolyMatrix  # n x n in (s, theta), used on theta <= s
    second: PolyMatrix  # n x n in (s, theta), used on theta > s

    def __add__(self, other: "KernelPair") -> "KernelPair":
        return KernelPair(self.first + other.first, self.second + other.second)

    def scale(self, c) -> "KernelPair":
        return KernelPair(self.first.scale(c), self.second.scale(c))


@dataclass
class BoundaryMoments:
    """Boundary-coupled moments of the operator data shared by the three maps.

    ``ba(a, b)`` is the polynomial part of the state kernel evaluated at
    arbitrary variable slots, ``bb(b)`` the same for the slope kernel; the
    y-blocks collect the operator kernels integrated against them.
    """

    n: int
    L: float
    M: PolyMatrix
    N1: PolyMatrix
    N2: PolyMatrix
    bc: PolyMatrix  # boundary_coeff, 2n x n in eta
    y1: PolyMatrix  # (s, eta)
    y2: PolyMatrix  # (beta,)
    y3: PolyMatrix  # (beta, eta)

    def ba(self, a, b) -> PolyMatrix:
        """[I  a*I] boundary_coeff(b): boundary part of the state kernel at (a, b)."""
        eye = PolyMatrix.identity(self.n)
        row = hcat(eye, eye.scalar_mul(PolyMatrix.monomial(a)))
        return row @ self.bc.rename({ETA: b})

    def bb(self, b) -> PolyMatrix:
        eye = PolyMatrix.identity(self.n)
        row = hcat(PolyMatrix.zeros(self.n, self.n), eye)
        return row @ self.bc.rename({ETA: b})


def boundary_moments(op: MNOperator, vs: ValidatedSystem) -> BoundaryMoments:
    n, L = vs.n, vs.L
    M, N1, N2 = op.M, op.N1, op.N2
    blocks = BoundaryMoments(n=n, L=L, M=M, N1=N1, N2=N2, bc=vs.boundary_coeff,
                            y1=None, y2=None, y3=None)

    m_eta = M.rename({S: ETA})
    n1_be = N1.rename({S: BETA, THETA: ETA})
    n2_be = N2.rename({S: BETA, THETA: ETA})

    # y1(s, eta): boundary moment against the left factor of the state kernel
    ba_es = blocks.ba(ETA, S)
    ba_bs = blocks.ba(BETA, S)
    blocks.y1 = (
        ba_es.transpose() @ m_eta
        + (ba_bs.transpose() @ n1_be).integrate(BETA, ETA, L)
        + (ba_bs.transpose() @ n2_be).integrate(BETA, 0.0, ETA)
    )

    # y2(beta): row sums of the operator kernel
    m_beta = M.rename({S: BETA})
    n1_b_eta = N1.rename({S: BETA, THETA: ETA})
    n2_b_eta = N2.rename({S: BETA, THETA: ETA})
    blocks.y2 = (
        m_beta
        + n1_b_eta.integrate(ETA, 0.0, BETA)
        + n2_b_eta.integrate(ETA, BETA, L)
    )

    # y3(beta, eta): operator applied to the boundary part of the state kernel
    n1_b_t = N1.rename({S: BETA})  # (beta, theta)
    n2_b_t = N2.rename({S: BETA})
    ba_te = blocks.ba(THETA, ETA)
    blocks.y3 = (
        m_beta @ blocks.ba(BETA, ETA)
        + (n1_b_t @ ba_te).integrate(THETA, 0.0, BETA)
        + (n2_b_t @ ba_te).integrate(THETA, BETA, L)
    )
    return blocks


def map_xss(op: MNOperator, vs: ValidatedSystem) -> KernelPair:
    """Kernel pair with <x, op x_ss> = curvature form of the result."""
    blk = boundary_moments(op, vs)
    L = vs.L
    n1_bt = op.N1.rename({S: BETA})  # (beta, theta)
    n2_bt = op.N2.rename({S: BETA})
    beta_minus_s = PolyMatrix.monomial(BETA) - PolyMatrix.monomial(S)

    e1 = n1_bt.scalar_mul(beta_minus_s).integrate(BETA, S, L)
    e2 = (
        op.M.rename({S: THETA}).scalar_mul(PolyMatrix.monomial(THETA) - PolyMatrix.monomial(S))
        + n1_bt.scalar_mul(beta_minus_s).integrate(BETA, THETA, L)
        + n2_bt.scalar_mul(beta_minus_s).integrate(BETA, S, THETA)
    )
    e3 = blk.y1.rename({ETA: THETA})
    return KernelPair(e1 + e3, e2 + e3)


def _slope_inner_blocks(blk: BoundaryMoments):
    """(f4, f5) shared by the slope and state maps; f4 lives in (theta, beta), f5 in (s, beta)."""
    L = blk.L
    m_beta = blk.M.rename({S: BETA})
    n1_b_eta = blk.N1.rename({S: BETA, THETA: ETA})  # N1(beta, eta)
    n2_e_b = blk.N2.rename({S: ETA, THETA: BETA})  # N2(eta, beta)
    f4 = m_beta + n1_b_eta.integrate(ETA, THETA, BETA)
    eta_minus_s = PolyMatrix.monomial(ETA) - PolyMatrix.monomial(S)
    f5 = n2_e_b.scalar_mul(eta_minus_s).integrate(ETA, S, BETA)
    return f4, f5


def map_xs(op: MNOperator, vs: ValidatedSystem) -> KernelPair:
    """Kernel pair with <x, op x_s> = curvature form of the result."""
    blk = boundary_moments(op, vs)
    L = vs.L
    f4, f5 = _slope_inner_blocks(blk)
    beta_minus_s = PolyMatrix.monomial(BETA) - PolyMatrix.monomial(S)
    integrand = f4.scalar_mul(beta_minus_s) + f5
    f1 = integrand.integrate(BETA, S, L)
    f2 = integrand.integrate(BETA, THETA, L)

    ba_bs = blk.ba(BETA, S)
    bb_t = blk.bb(THETA)
    f3 = (
        (ba_bs.transpose() @ blk.y2).integrate(BETA, 0.0, L) @ bb_t
        + blk.y1.rename({ETA: BETA}).integrate(BETA, THETA, L)
        + blk.y2.scalar_mul(beta_minus_s).integrate(BETA, S, L) @ bb_t
    )
    return KernelPair(f1 + f3, f2 + f3)


def map_xx(op: MNOperator, vs: ValidatedSystem) -> KernelPair:
    """Kernel pair with <x, op x> = curvature form of the result."""
    blk = boundary_moments(op, vs)
    L = vs.L
    _, f5 = _slope_inner_blocks(blk)
    m_beta = blk.M.rename({S: BETA})
    n1_b_eta = blk.N1.rename({S: BETA, THETA: ETA})
    beta_minus_s = PolyMatrix.monomial(BETA) - PolyMatrix.monomial(S)
    beta_minus_t = PolyMatrix.monomial(BETA) - PolyMatrix.monomial(THETA)
    eta_minus_t = PolyMatrix.monomial(ETA) - PolyMatrix.monomial(THETA)

    g4 = m_beta.scalar_mul(beta_minus_t) + n1_b_eta.scalar_mul(eta_minus_t).integrate(
        ETA, THETA, BETA
    )
    integrand = g4.scalar_mul(beta_minus_s) + f5.scalar_mul(beta_minus_t)
    ag1 = integrand.integrate(BETA, S, L)
    ag2 = integrand.integrate(BETA, THETA, L)

    ba_bs = blk.ba(BETA, S)
    y3_bt = blk.y3.rename({ETA: THETA})
    ag3 = (
        (ba_bs.transpose() @ y3_bt).integrate(BETA, 0.0, L)
        + blk.y1.rename({ETA: BETA}).scalar_mul(beta_minus_t).integrate(BETA, THETA, L)
        + y3_bt.scalar_mul(beta_minus_s).integrate(BETA, S, L)
    )
    return KernelPair(ag1 + ag3, ag2 + ag3)


def input_coupling_kernel(op: MNOperator, vs: ValidatedSystem) -> TriangleKernel:
    """Triangle kernel V(s, eta) with <x, op (B1 w)> = int x_ss' (int V d eta) w.

    The diagonal split is inherited from the indicator in the state kernel.
    """
    blk = boundary_moments(op, vs)
    n, L = vs.n, vs.L
    spec = vs.spec
    m_eta = op.M.rename({S: ETA})
    n1_be = op.N1.rename({S: BETA, THETA: ETA})
    n2_be = op.N2.rename({S: BETA, THETA: ETA})
    beta_minus_s = PolyMatrix.monomial(BETA) - PolyMatrix.monomial(S)
    eta_minus_s = PolyMatrix.monomial(ETA) - PolyMatrix.monomial(S)

    common = (
        blk.ba(ETA, S).transpose() @ m_eta
        + (blk.ba(BETA, S).transpose() @ n1_be).integrate(BETA, ETA, L)
        + (blk.ba(BETA, S).transpose() @ n2_be).integrate(BETA, 0.0, ETA)
    )
    upper_extra = n1_be.scalar_mul(beta_minus_s).integrate(BETA, S, L)
    lower_extra = (
        m_eta.scalar_mul(eta_minus_s)
        + n1_be.scalar_mul(beta_minus_s).integrate(BETA, ETA, L)
        + n2_be.scalar_mul(beta_minus_s).integrate(BETA, S, ETA)
    )
    b1_eta = spec.B1.rename({S: ETA})
    return TriangleKernel(
        S,
        ETA,
        upper=(common + upper_extra) @ b1_eta,
        lower=(common + lower_extra) @ b1_eta,
    )


def compose_multiplier(op: MNOperator, coeff: PolyMatrix) -> MNOperator:
    """Operator data of op composed with pointwise multiplication by coeff(s)."""
    coeff_t = coeff.rename({S: THETA})
    return MNOperator(op.M @ coeff, op.N1 @ coeff_t, op.N2 @ coeff_t)


def dynamics_kernels(op: MNOperator, vs: ValidatedSystem) -> KernelPair:
    """Curvature kernels of <x, op (A0 x + A1 x_s + A2 x_ss)>."""
    spec = vs.spec
    return (
        map_xx(compose_multiplier(op, spec.A0), vs)
        + map_xs(compose_multiplier(op, spec.A1), vs)
        + map_xss(compose_multiplier(op, spec.A2), vs)
    )


def _integrated_coupling(op: MNOperator, vs: ValidatedSystem) -> PolyMatrix:
    """(int_0^L V(s, eta) d eta)^T, shape m x n in s."""
    v = input_coupling_kernel(op, vs)
    return kernel_integrate(v, ETA, vs.L).transpose()


def assemble_gain_form(
    op: MNOperator, vs: ValidatedSystem, gain_sq_id=GAIN_SQ
) -> PQRSOperator:
    """The gain-mode PQRS form whose negativity certifies an L2-gain bound.

    P is affine in the squared-gain decision variable; Q couples the input to
    the curvature; R collects the symmetrized dynamics kernels plus the output
    correlation.
    """
    op.require_self_adjoint()
    spec = vs.spec
    m, n, q, L = spec.m, spec.n, spec.q, vs.L

    d1td1 = spec.D1.T @ spec.D1
    p = PolyMatrix.from_array(d1td1 / L)
    for i in range(m):
        cell = p.cells.setdefault((i, i), {})
        zero = (0, 0, 0, 0)
        cur = cell.get(zero, AffineCoeff(0.0))
        cell[zero] = cur + AffineCoeff(0.0, {gain_sq_id: -1.0 / L})

    c_out_s = vs.output_kernel.rename({THETA: S})  # q x n in s
    q_mat = PolyMatrix.from_array(spec.D1.T) @ c_out_s + _integrated_coupling(op, vs)

    h = dynamics_kernels(op, vs)
    r1 = h.first + swap_transpose(h.second) + c_out_s.transpose() @ vs.output_kernel
    r2 = swap_transpose(r1)
    return PQRSOperator(p, q_mat, r1, r2)


def assemble_passivity_form(op: MNOperator, vs: ValidatedSystem) -> PQRSOperator:
    """The passivity-mode PQRS form whose negativity certifies <y, w> >= 0.

    The feedthrough block is stored divided by L so that the quadratic-form
    convention (factor L on P) reproduces -w'(D1 + D1')w exactly; reports
    carry the unnormalized value alongside.
    """
    op.require_self_adjoint()
    spec = vs.spec
    if spec.m != spec.q:
        raise ValueError("passivity analysis needs matching input and output dimensions")
    L = vs.L
    p = PolyMatrix.from_array(-(spec.D1 + spec.D1.T) / L)
    c_out_s = vs.output_kernel.rename({THETA: S})
    q_mat = -c_out_s + _integrated_coupling(op, vs)
    h = dynamics_kernels(op, vs)
    r1 = h.first + swap_transpose(h.second)
    r2 = swap_transpose(r1)
    return PQRSOperator(p, q_mat, r1, r2)
