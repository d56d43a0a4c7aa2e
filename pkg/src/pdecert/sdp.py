"""Assembly of the certification problems as standard-form SDPs, solving, and re-verification.

The decision variables are two Gram blocks (the storage-functional block and
the negativity block) plus, in gain mode, the squared gain carried as a 1x1
PSD block.  Coefficient matching between the assembled quadratic form and the
positivity parameterization produces the linear equalities; the bundled
interior-point method solves the cone program; ``verify_certificate`` then
re-checks the returned blocks numerically, independent of the solver.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import ipm
from .lin_maps import GAIN_SQ, assemble_gain_form, assemble_passivity_form
from .operator_core import MNOperator, PQRSOperator, mn_functional, pqrs_functional
from .pde_model import ValidatedSystem, reconstruct_state
from .polymat import (
    S,
    THETA,
    AffineCoeff,
    PolyMatrix,
    compare_norm,
    poly_compare,
    swap_transpose,
)
from .positivity import PSDBlockVar, build_bases, gram_values, mn_from_gram, pqrs_from_gram

__all__ = [
    "SDPProblem",
    "Certificate",
    "VerificationReport",
    "DegreeCoverageError",
    "assemble_gain_sdp",
    "assemble_passivity_sdp",
    "solve",
    "verify_certificate",
    "dump_problem",
]

LYAP_BLOCK = "Tl"
NEG_BLOCK = "Tn"
GAIN_BLOCK = "gain_sq"

DEFAULT_EPS = 1e-4
DEFAULT_TOL = 1e-8


class DegreeCoverageError(ValueError):
    pass


@dataclass
class EqRow:
    coeffs: dict
    rhs: float


@dataclass
class SDPProblem:
    mode: str  # gain | passivity
    blocks: list  # list[PSDBlockVar]
    equalities: list  # list[EqRow]
    objective: dict  # decision id -> weight
    degrees: tuple  # (d1, d2, dneg)
    eps: float
    n: int
    m: int
    L: float
    free_vars: tuple = ()  # nonnegative scalars ride in 1x1 PSD blocks instead

    @property
    def num_decisions(self) -> int:
        return sum(b.dim * (b.dim + 1) // 2 for b in self.blocks)

    def block(self, name: str) -> PSDBlockVar:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


@dataclass
class Certificate:
    status: str  # optimal | infeasible | numerical-failure
    mode: str
    gamma: float | None
    gamma_sq: float | None
    T_lyap: np.ndarray | None
    T_neg: np.ndarray | None
    residuals: dict
    degrees: tuple
    eps: float
    iterations: int
    wall_time: float
    message: str = ""
    gamma_clamped: bool = False
    feedthrough_raw: np.ndarray | None = None  # unnormalized passivity feedthrough block


@dataclass
class VerificationReport:
    coercivity_margin: float
    coercivity_ok: bool
    negativity_margin: float
    negativity_ok: bool
    symmetry_residual: float
    symmetry_ok: bool
    matching_residual: float
    samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return self.coercivity_ok and self.negativity_ok and self.symmetry_ok


def _shifted_storage_operator(block: PSDBlockVar, basis, L: float, eps: float, n: int) -> MNOperator:
    op = mn_from_gram(block, basis, L)
    return MNOperator(op.M + PolyMatrix.identity(n, eps), op.N1, op.N2)


def _audit_degrees(neg: PQRSOperator, dneg: int | None, enforce: bool):
    """Smallest dneg whose cone image covers the assembled form's monomials."""
    q_deg = neg.Q.degree()
    r_deg = neg.R1.degree()
    required = max(q_deg - 1, math.ceil((r_deg - 1) / 2), 0)
    if dneg is None:
        return required
    if dneg >= required or not enforce:
        return dneg
    offending = []
    for i, j, mono, _ in neg.Q.monomials():
        if sum(mono) > dneg + 1:
            offending.append(f"Q[{i},{j}] s^{mono[S.index]}")
    for i, j, mono, _ in neg.R1.monomials():
        if sum(mono) > 2 * dneg + 1:
            offending.append(f"R1[{i},{j}] s^{mono[S.index]}*theta^{mono[THETA.index]}")
    listed = ", ".join(sorted(set(offending))[:12])
    raise DegreeCoverageError(
        f"increase dneg: the assembled form has monomials outside the "
        f"positivity-certificate image (need dneg >= {required}): {listed}"
    )


def _matching_rows(neg: PQRSOperator, target: PQRSOperator) -> list[EqRow]:
    rows: list[EqRow] = []

    def push(diffs, symmetric_cells=False):
        for d in diffs:
            if symmetric_cells and d.cell[0] > d.cell[1]:
                continue  # mirror of an upper-triangular row
            coeffs = dict(d.coeff.terms)
            rhs = -float(d.coeff.const)
            if not coeffs:
                if abs(rhs) > 1e-12:
                    raise DegreeCoverageError(
                        "coefficient matching produced an unsatisfiable constant row; "
                        "increase dneg"
                    )
                continue
            scale = max(abs(w) for w in coeffs.values())
            scale = max(scale, abs(rhs))
            rows.append(
                EqRow({k: w / scale for k, w in coeffs.items()}, rhs / scale)
            )

    push(poly_compare(neg.P, target.P), symmetric_cells=True)
    push(poly_compare(neg.Q, target.Q))
    push(poly_compare(neg.R1, target.R1))
    return rows


def _assemble(vs: ValidatedSystem, mode: str, d1: int, d2: int, dneg, eps: float, enforce_audit: bool) -> SDPProblem:
    spec = vs.spec
    n, m, L = spec.n, spec.m, vs.L
    basis_l = build_bases(n, d1, d2)
    t_lyap = PSDBlockVar(
        LYAP_BLOCK, (basis_l.univariate_rows, basis_l.bivariate_rows, basis_l.bivariate_rows)
    )
    op = _shifted_storage_operator(t_lyap, basis_l, L, eps, n)
    if mode == "gain":
        form = assemble_gain_form(op, vs, GAIN_SQ)
    else:
        form = assemble_passivity_form(op, vs)
    neg = -form

    dneg_final = _audit_degrees(neg, dneg, enforce_audit)
    basis_n = build_bases(n, 0, dneg_final)
    t_neg = PSDBlockVar(NEG_BLOCK, (m, basis_n.bivariate_rows, basis_n.bivariate_rows))
    target = pqrs_from_gram(t_neg, basis_n, L, m)

    rows = _matching_rows(neg, target)
    blocks = [t_lyap, t_neg]
    objective: dict = {}
    if mode == "gain":
        blocks.insert(0, PSDBlockVar(GAIN_BLOCK, (1, 0, 0)))
        objective = {GAIN_SQ: 1.0}
    return SDPProblem(
        mode=mode,
        blocks=blocks,
        equalities=rows,
        objective=objective,
        degrees=(d1, d2, dneg_final),
        eps=eps,
        n=n,
        m=m,
        L=L,
    )


def assemble_gain_sdp(
    vs: ValidatedSystem,
    d1: int = 2,
    d2: int = 2,
    dneg: int | None = None,
    eps: float = DEFAULT_EPS,
    enforce_audit: bool = True,
) -> SDPProblem:
    """Gain-bound problem: minimize the squared gain subject to both cone memberships."""
    return _assemble(vs, "gain", d1, d2, dneg, eps, enforce_audit)


def assemble_passivity_sdp(
    vs: ValidatedSystem,
    d1: int = 2,
    d2: int = 2,
    dneg: int | None = None,
    eps: float = DEFAULT_EPS,
    enforce_audit: bool = True,
) -> SDPProblem:
    """Passivity feasibility problem (requires matching input/output dimensions)."""
    if vs.spec.m != vs.spec.q:
        raise ValueError("passivity analysis needs m == q")
    return _assemble(vs, "passivity", d1, d2, dneg, eps, enforce_audit)


def _to_ipm_inputs(prob: SDPProblem):
    index = {b.name: k for k, b in enumerate(prob.blocks)}
    dims = [b.dim for b in prob.blocks]

    def entries(coeffs):
        ent = []
        for (name, i, j), w in coeffs.items():
            ent.append((index[name], i, j, float(w)))
        return ent

    constraints = [entries(r.coeffs) for r in prob.equalities]
    b = [r.rhs for r in prob.equalities]
    objective = entries(prob.objective)
    return dims, constraints, b, objective, index


def _trace_entries(dims, weight):
    ent = []
    for k, d in enumerate(dims):
        ent.extend((k, i, i, weight) for i in range(d))
    return ent


def _package(prob, res, gamma, gamma_sq, index, t0, clamped=False, extra=None):
    optimal = res.status == "optimal"
    t_lyap = res.X[index[LYAP_BLOCK]] if optimal else None
    t_neg = res.X[index[NEG_BLOCK]] if optimal else None
    residuals = {
        "primal": res.rel_primal,
        "dual": res.rel_dual,
        "gap": res.rel_gap,
        "ray_mineig": res.ray_mineig,
    }
    if extra:
        residuals.update(extra)
    if optimal:
        residuals["min_eig_lyap"] = float(np.linalg.eigvalsh(t_lyap)[0]) if t_lyap.size else 0.0
        residuals["min_eig_neg"] = float(np.linalg.eigvalsh(t_neg)[0]) if t_neg.size else 0.0
    return Certificate(
        status=res.status,
        mode=prob.mode,
        gamma=gamma if optimal else None,
        gamma_sq=gamma_sq if optimal else None,
        T_lyap=t_lyap,
        T_neg=t_neg,
        residuals=residuals,
        degrees=prob.degrees,
        eps=prob.eps,
        iterations=res.iterations,
        wall_time=time.time() - t0,
        message=res.message,
        gamma_clamped=clamped,
    )


def solve(
    prob: SDPProblem,
    tol: float = DEFAULT_TOL,
    maxiter: int = 150,
    verbose: bool = False,
    backoffs=(0.01, 0.03, 0.10),
) -> Certificate:
    """Solve with the bundled interior-point backend and package the certificate.

    Passivity problems are pure feasibility runs with a small trace objective.
    Gain problems run in two phases: minimizing the squared gain locates its
    value (the dual objective is a certified lower bound), but the minimizer
    itself often sits outside the Gram cone's razor-thin interior, so the
    certificate is extracted from a second feasibility solve at a slightly
    backed-off gain.  The back-off actually used is reported in the
    certificate residuals.
    """
    t0 = time.time()
    dims, constraints, b, objective, index = _to_ipm_inputs(prob)

    if prob.mode == "passivity":
        obj = objective + _trace_entries(dims, 1e-6)
        res = ipm.solve_sdp(dims, constraints, b, obj, tol=tol, maxiter=maxiter, verbose=verbose)
        return _package(prob, res, None, None, index, t0)

    # phase 1: minimize the squared gain (tiny trace term bounds the iterates)
    obj = objective + _trace_entries(dims, 1e-7)
    res1 = ipm.solve_sdp(
        dims, constraints, b, obj, tol=tol, maxiter=min(maxiter, 60), verbose=verbose
    )
    gi = index[GAIN_BLOCK]
    if res1.status == "infeasible":
        return _package(prob, res1, None, None, index, t0)
    if res1.status == "optimal":
        gamma_sq = float(res1.X[gi][0, 0])
        clamped = gamma_sq < 0
        gamma_sq = max(gamma_sq, 0.0)
        return _package(prob, res1, math.sqrt(gamma_sq), gamma_sq, index, t0, clamped)

    # phase 2: fix the gain slightly above the dual bound and certify feasibility;
    # proven-infeasible trials raise the lower bracket, then bisection tightens.
    estimates = [res1.dual_bound, float(res1.X[gi][0, 0]), res1.dobj]
    gamma_sq_est = max([e for e in estimates if e == e and e > 0.0], default=0.0)
    cons = constraints + [[(gi, 0, 0, 1.0)]]
    obj2 = _trace_entries(dims, 1e-6)

    def try_gain(gamma_sq_fix):
        bb = list(b) + [gamma_sq_fix]
        return ipm.solve_sdp(
            dims, cons, bb, obj2, tol=tol, maxiter=min(maxiter, 50), verbose=verbose,
            feasibility_stop=True,
        )

    lo = gamma_sq_est  # highest value proven or presumed too tight (dual bound start)
    hi = None
    feasible = None
    last = res1
    for backoff in backoffs:
        trial = gamma_sq_est * (1.0 + backoff) ** 2
        res2 = try_gain(trial)
        last = res2
        if res2.status == "optimal":
            hi, feasible = trial, res2
            break
        lo = max(lo, trial)  # infeasible or stalled: certification needs more slack
    if feasible is None:
        return _package(prob, last, None, None, index, t0,
                        extra={"gain_sq_lower_bound": res1.dual_bound})
    # bisection toward the bracket; small problems afford a tight, reproducible gain
    small = sum(d * (d + 1) // 2 for d in dims) <= 4000
    rel_target = 1.0005 if small else 1.01
    rounds = 10 if small else 2
    for _ in range(rounds):
        if hi <= lo * rel_target:
            break
        mid = math.sqrt(lo * hi)
        res2 = try_gain(mid)
        if res2.status == "optimal":
            hi, feasible = mid, res2
        else:
            lo = max(lo, mid)
    return _package(
        prob, feasible, math.sqrt(hi), hi, index, t0,
        extra={
            "gain_backoff": math.sqrt(hi / gamma_sq_est) - 1.0 if gamma_sq_est else float("nan"),
            "gain_sq_lower_bound": res1.dual_bound,
        },
    )


def _numeric_operators(vs: ValidatedSystem, cert: Certificate):
    """Rebuild the numeric storage operator and negativity form from certificate blocks."""
    d1, d2, dneg = cert.degrees
    n, m, L = vs.spec.n, vs.spec.m, vs.L
    basis_l = build_bases(n, d1, d2)
    t_lyap = PSDBlockVar(
        LYAP_BLOCK, (basis_l.univariate_rows, basis_l.bivariate_rows, basis_l.bivariate_rows)
    )
    vals = gram_values(t_lyap, cert.T_lyap)
    template = mn_from_gram(t_lyap, basis_l, L)
    storage = MNOperator(
        template.M.with_decisions(vals) + PolyMatrix.identity(n, cert.eps),
        template.N1.with_decisions(vals),
        template.N2.with_decisions(vals),
    )
    basis_n = build_bases(n, 0, dneg)
    t_neg = PSDBlockVar(NEG_BLOCK, (m, basis_n.bivariate_rows, basis_n.bivariate_rows))
    nvals = gram_values(t_neg, cert.T_neg)
    tgt = pqrs_from_gram(t_neg, basis_n, L, m)
    neg_numeric = PQRSOperator(
        tgt.P.with_decisions(nvals),
        tgt.Q.with_decisions(nvals),
        tgt.R1.with_decisions(nvals),
        tgt.R2.with_decisions(nvals),
    )
    return storage, neg_numeric


def _assembled_numeric_form(vs: ValidatedSystem, cert: Certificate, storage: MNOperator) -> PQRSOperator:
    if cert.mode == "gain":
        form = assemble_gain_form(storage, vs, GAIN_SQ)
        decisions = {GAIN_SQ: cert.gamma_sq}
        return PQRSOperator(
            form.P.with_decisions(decisions), form.Q, form.R1, form.R2
        )
    return assemble_passivity_form(storage, vs)


def verify_certificate(
    vs: ValidatedSystem, cert: Certificate, samples: int = 50, seed: int = 0
) -> VerificationReport:
    """Numeric post-check of an optimal certificate, independent of solver residuals.

    (i) the storage functional dominates eps * ||x||^2 on random admissible
    states; (ii) the certified nonnegative form stays nonnegative on random
    samples; (iii) the assembled form's upper kernel is the adjoint of the
    lower one.
    """
    if cert.status != "optimal":
        raise ValueError("only optimal certificates can be verified")
    rng = np.random.default_rng(seed)
    n, m, L = vs.spec.n, vs.spec.m, vs.L
    storage, neg_numeric = _numeric_operators(vs, cert)

    def random_poly(rows, deg):
        out = PolyMatrix.zeros(rows, 1)
        for i in range(rows):
            cell = {}
            for k in range(deg + 1):
                cell[(k, 0, 0, 0)] = AffineCoeff(rng.standard_normal())
            out.cells[(i, 0)] = cell
        return out

    worst_coercivity = np.inf
    for _ in range(samples):
        x = reconstruct_state(vs, random_poly(n, 3))
        norm_sq = (x.transpose() @ x).integrate(S, 0.0, L).eval({})[0, 0]
        val = mn_functional(storage, x, L)
        worst_coercivity = min(
            worst_coercivity, val - cert.eps * norm_sq * (1.0 - 1e-3)
        )
    coercivity_ok = worst_coercivity >= -1e-9

    t_scale = max(1.0, float(np.linalg.norm(cert.T_neg, 2)))
    worst_negativity = np.inf
    for _ in range(samples):
        w = rng.standard_normal(m)
        x2 = random_poly(n, 3)
        norm_sq = (x2.transpose() @ x2).integrate(S, 0.0, L).eval({})[0, 0]
        scale = (1.0 + float(w @ w) + norm_sq) * t_scale
        val = pqrs_functional(neg_numeric, w, x2, L)
        worst_negativity = min(worst_negativity, val / scale)
    negativity_ok = worst_negativity >= -1e-6

    assembled = _assembled_numeric_form(vs, cert, storage)
    sym_diff = compare_norm(poly_compare(assembled.R2, swap_transpose(assembled.R1)))
    sym_scale = max(1.0, assembled.R1.max_coeff_norm())
    symmetry_ok = sym_diff <= 1e-8 * sym_scale

    neg_assembled = -assembled
    match = max(
        compare_norm(poly_compare(neg_assembled.P, neg_numeric.P)),
        compare_norm(poly_compare(neg_assembled.Q, neg_numeric.Q)),
        compare_norm(poly_compare(neg_assembled.R1, neg_numeric.R1)),
    )
    match_scale = max(1.0, neg_numeric.R1.max_coeff_norm(), neg_assembled.R1.max_coeff_norm())

    return VerificationReport(
        coercivity_margin=float(worst_coercivity),
        coercivity_ok=bool(coercivity_ok),
        negativity_margin=float(worst_negativity),
        negativity_ok=bool(negativity_ok),
        symmetry_residual=float(sym_diff / sym_scale),
        symmetry_ok=bool(symmetry_ok),
        matching_residual=float(match / match_scale),
        samples=samples,
        seed=seed,
    )


def dump_problem(prob: SDPProblem, path) -> None:
    """Sparse text dump: block header, objective line, one line per equality.

    Equality lines list ``name:i:j weight`` pairs followed by ``rhs value``;
    block ids refer to the header.  Intended for debugging against external
    conic solvers.
    """
    def key(did):
        return ":".join(str(p) for p in did)

    with open(path, "w") as fh:
        fh.write(f"mode {prob.mode}\n")
        fh.write("blocks " + " ".join(f"{b.name}:{b.dim}" for b in prob.blocks) + "\n")
        fh.write(
            "objective " + " ".join(f"{key(k)} {w:.17g}" for k, w in prob.objective.items()) + "\n"
        )
        for row in prob.equalities:
            parts = [f"{key(k)} {w:.17g}" for k, w in sorted(row.coeffs.items())]
            fh.write(" ".join(parts) + f" rhs {row.rhs:.17g}\n")
