"""Validation of the coupled-PDE system description and its boundary-elimination kernels.

A system couples n second-order 1-D PDE states on [0, L] through polynomial
coefficients, with 2n boundary conditions B z = 0 on the trace vector
z = [x(0), x(L), x_s(0), x_s(L)].  Eliminating z expresses the state and its
slope as integrals of the curvature x_ss against triangle kernels, which is
what all later reformulations consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polymat import (
    ETA,
    S,
    THETA,
    PolyMatrix,
    TriangleKernel,
    hcat,
    kernel_integrate,
    vcat,
)

__all__ = ["SystemSpec", "ValidatedSystem", "SystemValidationError", "validate_system", "build_kernels", "reconstruct_state"]

RANK_REL_TOL = 1e-9


class SystemValidationError(ValueError):
    pass


@dataclass
class SystemSpec:
    """Raw description of the coupled PDE system with inputs and outputs.

    Dynamics: x_t = A0(s) x + A1(s) x_s + A2(s) x_ss + B1(s) w(t)
    Output:   y(t) = C1 z(t) + integral of (Ca(s) x + Cb(s) x_s) ds
    Boundary: B z(t) = 0 with z = [x(0), x(L), x_s(0), x_s(L)].
    """

    n: int
    m: int
    q: int
    L: float
    A0: PolyMatrix
    A1: PolyMatrix
    A2: PolyMatrix
    B: np.ndarray
    B1: PolyMatrix
    C1: np.ndarray
    Ca: PolyMatrix
    Cb: PolyMatrix
    D1: np.ndarray

    def __post_init__(self):
        n, m, q = self.n, self.m, self.q
        if self.L <= 0:
            raise SystemValidationError("domain length must be positive")
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C1 = np.atleast_2d(np.asarray(self.C1, dtype=float)) if q else np.zeros((0, 4 * n))
        self.D1 = np.atleast_2d(np.asarray(self.D1, dtype=float)) if q and m else np.zeros((q, m))
        checks = [
            ("A0", self.A0.shape, (n, n)),
            ("A1", self.A1.shape, (n, n)),
            ("A2", self.A2.shape, (n, n)),
            ("B1", self.B1.shape, (n, m)),
            ("Ca", self.Ca.shape, (q, n)),
            ("Cb", self.Cb.shape, (q, n)),
            ("B", self.B.shape, (2 * n, 4 * n)),
            ("C1", self.C1.shape, (q, 4 * n)),
            ("D1", self.D1.shape, (q, m)),
        ]
        for name, got, want in checks:
            if got != want:
                raise SystemValidationError(f"{name} has shape {got}, expected {want}")
        for name, poly in (("A0", self.A0), ("A1", self.A1), ("A2", self.A2), ("B1", self.B1), ("Ca", self.Ca), ("Cb", self.Cb)):
            extra = {v.name for v in poly.variables()} - {"s"}
            if extra:
                raise SystemValidationError(f"{name} may only depend on s, found {sorted(extra)}")


@dataclass
class ValidatedSystem:
    """System plus the derived boundary and output kernels.

    boundary_coeff maps curvature to the eliminated trace components
    [x(0); x_s(0)]; state_kernel / slope_kernel reconstruct x and x_s from
    x_ss; output_kernel collapses the whole output map onto x_ss.
    """

    spec: SystemSpec
    B2inv: np.ndarray
    boundary_coeff: PolyMatrix  # 2n x n, affine in eta
    state_kernel: TriangleKernel | None = None  # (s, eta), n x n
    state_kernel_t: TriangleKernel | None = None  # (s, theta) copy
    slope_kernel_t: TriangleKernel | None = None  # (s, theta), n x n
    output_kernel: PolyMatrix | None = None  # q x n in theta

    @property
    def n(self):
        return self.spec.n

    @property
    def L(self):
        return self.spec.L


def _trace_lift(n: int, L: float) -> np.ndarray:
    """[x(0); x(L); x_s(0); x_s(L)] = lift @ [x(0); x_s(0)] for curvature-free states."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[eye, zero], [eye, L * eye], [zero, eye], [zero, eye]])


def validate_system(spec: SystemSpec, build: bool = True) -> ValidatedSystem:
    """Check boundary-condition rank, invert the trace map, and derive kernels."""
    n, L = spec.n, spec.L
    sing = np.linalg.svd(spec.B, compute_uv=False)
    rank = int(np.sum(sing > RANK_REL_TOL * (sing[0] if sing.size else 1.0)))
    if rank < 2 * n:
        raise SystemValidationError(
            f"under-determined boundary conditions: rank(B) = {rank} < {2 * n}; B = {spec.B!r}"
        )
    B2 = spec.B @ _trace_lift(n, L)
    try:
        B2inv = np.linalg.inv(B2)
    except np.linalg.LinAlgError as exc:
        raise SystemValidationError(
            f"boundary conditions incompatible with second-order reformulation; "
            f"B2 = {B2!r} is singular"
        ) from exc
    if np.linalg.cond(B2) > 1e12:
        raise SystemValidationError(
            f"boundary conditions incompatible with second-order reformulation; "
            f"B2 = {B2!r} is numerically singular"
        )
    # boundary_coeff(eta) = -B2^{-1} B [0; (L-eta)I; 0; I]
    eye = PolyMatrix.identity(n)
    lin = eye.scale(L) - eye.scalar_mul(PolyMatrix.monomial(ETA))
    stack = vcat(PolyMatrix.zeros(n, n), lin, PolyMatrix.zeros(n, n), eye)
    bc = PolyMatrix.from_array(-B2inv @ spec.B) @ stack
    vs = ValidatedSystem(spec=spec, B2inv=B2inv, boundary_coeff=bc)
    return build_kernels(vs) if build else vs


def _row_state(n: int, var) -> PolyMatrix:
    """[I  var*I], the trace-to-state row at position var."""
    eye = PolyMatrix.identity(n)
    return hcat(eye, eye.scalar_mul(PolyMatrix.monomial(var)))


def _row_slope(n: int) -> PolyMatrix:
    return hcat(PolyMatrix.zeros(n, n), PolyMatrix.identity(n))


def build_kernels(vs: ValidatedSystem) -> ValidatedSystem:
    """Fill state, slope, and output kernels derived from boundary_coeff."""
    spec = vs.spec
    n, L = spec.n, spec.L
    eye = PolyMatrix.identity(n)

    base = _row_state(n, S) @ vs.boundary_coeff  # n x n in (s, eta)
    jump = eye.scalar_mul(PolyMatrix.monomial(S) - PolyMatrix.monomial(ETA))
    vs.state_kernel = TriangleKernel(S, ETA, upper=base + jump, lower=base)
    vs.state_kernel_t = vs.state_kernel.rename({ETA: THETA})

    base2 = _row_slope(n) @ vs.boundary_coeff.rename({ETA: THETA})
    vs.slope_kernel_t = TriangleKernel(S, THETA, upper=base2 + eye, lower=base2)

    # trace of x as a kernel against x_ss: lift @ boundary_coeff + direct part
    lift = PolyMatrix.from_array(_trace_lift(n, L))
    lin = eye.scale(L) - eye.scalar_mul(PolyMatrix.monomial(THETA))
    direct = vcat(PolyMatrix.zeros(n, n), lin, PolyMatrix.zeros(n, n), eye)
    trace_kernel = lift @ vs.boundary_coeff.rename({ETA: THETA}) + direct  # 4n x n in theta

    c_boundary = PolyMatrix.from_array(spec.C1) @ trace_kernel
    integrand = vs.state_kernel_t.lmul(spec.Ca) + vs.slope_kernel_t.lmul(spec.Cb)
    c_distributed = kernel_integrate(integrand, S, L)
    vs.output_kernel = (c_boundary + c_distributed).pruned()
    return vs


def reconstruct_state(vs: ValidatedSystem, xss: PolyMatrix) -> PolyMatrix:
    """Integrate curvature against the state kernel; result satisfies B z = 0 exactly."""
    if xss.shape != (vs.n, 1):
        raise SystemValidationError(f"xss must be {vs.n} x 1, got {xss.shape}")
    integrand = vs.state_kernel.rmul(xss.rename({S: ETA}))
    return kernel_integrate(integrand, ETA, vs.L)


def boundary_trace(vs: ValidatedSystem, x: PolyMatrix) -> np.ndarray:
    """Numeric trace vector [x(0); x(L); x_s(0); x_s(L)] of a polynomial state."""
    xs = x.diff(S)
    return np.vstack(
        [
            x.eval({S: 0.0}),
            x.eval({S: vs.L}),
            xs.eval({S: 0.0}),
            xs.eval({S: vs.L}),
        ]
    )
