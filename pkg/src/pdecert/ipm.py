"""Reference primal-dual interior-point solver for block-diagonal semidefinite programs.

Solves   min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0 (block diagonal, PSD)

with the standard infeasible-start predictor-corrector iteration (HKM scaling).
Gram-matrix problems over monomial bases are badly scaled, so the data is
equilibrated first: a per-block diagonal congruence (Ruiz iteration on entry
magnitudes) plus row normalization.  Both transforms preserve positive
semidefiniteness and the objective value, and results are mapped back to the
original coordinates before reporting.

Sized for desk-scale certification problems (block side up to a few hundred,
a few thousand equalities); external conic solvers can be swapped in behind
the same result contract.  Primal infeasibility is reported through a Farkas
ray: a multiplier y with b'y = 1 and -A*(y) >= 0 up to roundoff.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = ["IPMResult", "solve_sdp"]


@dataclass
class IPMResult:
    status: str  # optimal | infeasible | numerical-failure
    X: list
    Z: list
    y: np.ndarray
    pobj: float
    dobj: float
    rel_primal: float
    rel_dual: float
    rel_gap: float
    iterations: int
    wall_time: float
    message: str = ""
    ray: np.ndarray | None = None
    ray_mineig: float = float("nan")
    dual_bound: float = float("nan")  # best dual objective seen at near-feasible duals


class _Blocks:
    """svec/smat bookkeeping for a fixed block pattern (sqrt(2) off-diagonal scaling)."""

    def __init__(self, dims):
        self.dims = list(dims)
        self.iu = [np.triu_indices(d) for d in self.dims]
        self.scales = []
        self.offsets = []
        off = 0
        for d, (r, c) in zip(self.dims, self.iu):
            sc = np.where(r == c, 1.0, np.sqrt(2.0))
            self.scales.append(sc)
            self.offsets.append(off)
            off += len(r)
        self.total = off
        self.ntot = sum(self.dims)

    def svec(self, mats) -> np.ndarray:
        out = np.empty(self.total)
        for b, m in enumerate(mats):
            r, c = self.iu[b]
            out[self.offsets[b] : self.offsets[b] + len(r)] = m[r, c] * self.scales[b]
        return out

    def smat(self, vec) -> list:
        mats = []
        for b, d in enumerate(self.dims):
            r, c = self.iu[b]
            seg = vec[self.offsets[b] : self.offsets[b] + len(r)] / self.scales[b]
            m = np.zeros((d, d))
            m[r, c] = seg
            m[c, r] = seg
            mats.append(m)
        return mats

    def inner(self, a, b) -> float:
        return sum(float(np.sum(x * y)) for x, y in zip(a, b))

    def eye(self, scale=1.0) -> list:
        return [scale * np.eye(d) for d in self.dims]

    def norm(self, mats) -> float:
        return float(np.sqrt(sum(np.sum(m * m) for m in mats)))


def _entries_to_svec(blocks: _Blocks, entries) -> np.ndarray:
    v = np.zeros(blocks.total)
    for blk, r, c, w in entries:
        if r > c:
            r, c = c, r
        d = blocks.dims[blk]
        flat = r * d - r * (r - 1) // 2 + (c - r)  # position in triu order
        if r == c:
            v[blocks.offsets[blk] + flat] += w
        else:
            v[blocks.offsets[blk] + flat] += w / np.sqrt(2.0)
    return v


def _congruence_scales(blocks: _Blocks, col_mag: np.ndarray) -> list:
    """Per-block diagonal f (Ruiz iteration) so scaled entry magnitudes are near one."""
    factors = []
    for b, d in enumerate(blocks.dims):
        r, c = blocks.iu[b]
        seg = col_mag[blocks.offsets[b] : blocks.offsets[b] + len(r)]
        g = np.zeros((d, d))
        g[r, c] = seg
        g[c, r] = seg
        f = np.ones(d)
        for _ in range(8):
            scaled = g * f[:, None] * f[None, :]
            row_max = scaled.max(axis=1)
            row_max[row_max <= 0] = 1.0
            f = f / np.sqrt(np.sqrt(row_max))
        f = np.clip(f, 1e-5, 1e5)
        factors.append(f)
    return factors


def _chol_with_jitter(m: np.ndarray):
    jitter = 0.0
    base = max(1.0, float(np.trace(m)) / max(1, m.shape[0]))
    for _ in range(10):
        try:
            return sla.cholesky(m + jitter * np.eye(m.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-14 * base if jitter == 0.0 else jitter * 100
    raise np.linalg.LinAlgError("matrix not positive definite even with jitter")


def _max_step(mats, dmats, chols) -> float:
    """Largest alpha keeping mats + alpha * dmats PSD (Cholesky whitening)."""
    alpha = np.inf
    for m, dm, L in zip(mats, dmats, chols):
        if m.shape[0] == 0:
            continue
        w = sla.solve_triangular(L, dm, lower=True)
        w = sla.solve_triangular(L, w.T, lower=True)
        lam = sla.eigvalsh(0.5 * (w + w.T))[0]
        if lam < 0:
            alpha = min(alpha, -1.0 / lam)
    return alpha


def solve_sdp(
    block_dims,
    constraints,
    b,
    objective,
    tol: float = 1e-8,
    maxiter: int = 150,
    verbose: bool = False,
    feasibility_stop: bool = False,
) -> IPMResult:
    """Solve the block SDP; ``constraints[i]`` lists (block, row, col, weight) entry coefficients.

    A weight w on entry (r, c), r <= c, contributes w * X[r, c] to the i-th
    scalar equation (the symmetric mirror entry is implied).  ``objective``
    uses the same entry convention.
    """
    t0 = time.time()
    blocks = _Blocks(block_dims)
    m = len(constraints)
    b0 = np.asarray(b, dtype=float)

    rows = [_entries_to_svec(blocks, con) for con in constraints]
    A0 = sp.csr_matrix(np.vstack(rows)) if rows else sp.csr_matrix((0, blocks.total))
    c0 = _entries_to_svec(blocks, objective)

    # --- equilibration: diagonal congruence per block, then row normalization
    col_mag = np.abs(A0).max(axis=0).toarray().ravel() if m else np.zeros(blocks.total)
    col_mag = np.maximum(col_mag, np.abs(c0))
    factors = _congruence_scales(blocks, col_mag)
    dcol = np.empty(blocks.total)
    for bidx, f in enumerate(factors):
        r, c = blocks.iu[bidx]
        dcol[blocks.offsets[bidx] : blocks.offsets[bidx] + len(r)] = f[r] * f[c]
    Amat = A0 @ sp.diags(1.0 / dcol) if m else A0
    cvec = c0 / dcol
    if m:
        dense = np.abs(Amat).max(axis=1).toarray().ravel()
        row_scale = np.where(dense > 0, dense, 1.0)
        Amat = sp.diags(1.0 / row_scale) @ Amat
        bvec = b0 / row_scale
    else:
        row_scale = np.ones(0)
        bvec = b0.copy()
    C = blocks.smat(cvec)

    def A_of(mats) -> np.ndarray:
        return Amat @ blocks.svec(mats)

    def At_of(y) -> list:
        return blocks.smat(Amat.T @ y)

    def unscale_primal(mats) -> list:
        return [mb / np.outer(f, f) for mb, f in zip(mats, factors)]

    def unscale_dual(mats) -> list:
        return [mb * np.outer(f, f) for mb, f in zip(mats, factors)]

    Adense = Amat.toarray() if m and m * blocks.total <= 4e7 else None
    # precompute batched dense constraint tensors per block (chunked by memory)
    batch_idx, batch_A3, batch_slice = [], [], []
    for bidx, d in enumerate(blocks.dims):
        sl = slice(blocks.offsets[bidx], blocks.offsets[bidx] + d * (d + 1) // 2)
        batch_slice.append(sl)
        if d == 0 or m == 0:
            batch_idx.append(None)
            batch_A3.append(None)
            continue
        Acols = Amat[:, sl]
        rows_touch = np.unique(Acols.nonzero()[0])
        if rows_touch.size == 0:
            batch_idx.append(None)
            batch_A3.append(None)
            continue
        r, c = blocks.iu[bidx]
        sc = blocks.scales[bidx]
        chunk = max(1, int(4e7 // (d * d)))
        idx_list, a3_list = [], []
        for start in range(0, rows_touch.size, chunk):
            idx = rows_touch[start : start + chunk]
            seg = Acols[idx].toarray() / sc
            A3 = np.zeros((idx.size, d, d))
            A3[:, r, c] = seg
            A3[:, c, r] = seg
            idx_list.append(idx)
            a3_list.append(A3)
        batch_idx.append(idx_list)
        batch_A3.append(a3_list)
    norm_b = np.linalg.norm(bvec)
    norm_c = blocks.norm(C)
    tau_p = max(10.0, 10.0 * (np.max(np.abs(bvec)) if m else 1.0))
    tau_d = max(10.0, norm_c)
    X = blocks.eye(tau_p)
    Z = blocks.eye(tau_d)
    y = np.zeros(m)

    def finish(status, message, it, ray=None, ray_mineig=float("nan"), state=None):
        Xf, yf, Zf = state if state is not None else (X, y, Z)
        Xo = unscale_primal(Xf)
        Zo = unscale_dual(Zf)
        yo = yf / row_scale if m else yf
        rp = b0 - (A0 @ blocks.svec(Xo) if m else np.zeros(0))
        AtYo = blocks.smat(A0.T @ yo) if m else blocks.eye(0.0)
        C_orig = blocks.smat(c0)
        Rd = [cb - zb - atb for cb, zb, atb in zip(C_orig, Zo, AtYo)]
        pobj = blocks.inner(C_orig, Xo)
        dobj = float(b0 @ yo) if m else 0.0
        rel_p = np.linalg.norm(rp) / (1.0 + np.linalg.norm(b0))
        rel_d = blocks.norm(Rd) / (1.0 + blocks.norm(C_orig))
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return IPMResult(
            status, Xo, Zo, yo, pobj, dobj, rel_p, rel_d, rel_gap, it,
            time.time() - t0, message, ray=ray, ray_mineig=ray_mineig,
            dual_bound=best_dual,
        )

    message = ""
    it = 0
    best_state = None
    best_score = np.inf
    best_dual = float("nan")
    for it in range(1, maxiter + 1):
        Rp = bvec - A_of(X)
        AtY = At_of(y)
        Rd = [cb - zb - atb for cb, zb, atb in zip(C, Z, AtY)]
        gap = blocks.inner(X, Z)
        mu = gap / max(1, blocks.ntot)
        pobj = blocks.inner(C, X)
        dobj = float(bvec @ y)
        rel_p = np.linalg.norm(Rp) / (1.0 + norm_b)
        rel_d = blocks.norm(Rd) / (1.0 + norm_c)
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        comp = gap / (1.0 + abs(pobj) + abs(dobj))
        if verbose:
            print(
                f"  it {it:3d}  mu {mu:9.2e}  rp {rel_p:9.2e}  rd {rel_d:9.2e}  "
                f"gap {rel_gap:9.2e}  pobj {pobj:+.6e}  dobj {dobj:+.6e}"
            )
        if rel_d <= max(1e-7, 100.0 * tol) and not (best_dual == best_dual and best_dual >= dobj):
            best_dual = dobj
        score = max(rel_p, rel_d, min(rel_gap, comp))
        if score < best_score:
            best_score = score
            best_state = ([xb.copy() for xb in X], y.copy(), [zb.copy() for zb in Z])
        if rel_p <= tol and rel_d <= tol and max(rel_gap, comp) <= tol:
            return finish("optimal", message, it)
        if feasibility_stop and rel_p <= tol and it >= 5:
            return finish("optimal", "primal feasible point extracted", it)

        # Farkas ray test: y/(b'y) with -A*(y) (almost) PSD proves primal infeasibility
        if it >= 3 and dobj > 0.1 * max(1.0, norm_b):
            yr = y / dobj
            ray = At_of(yr)
            mineig = min((sla.eigvalsh(-r)[0] if r.shape[0] else 0.0) for r in ray)
            scale = max(1.0, blocks.norm(ray))
            if mineig >= -1e-8 * scale:
                return finish("infeasible", "dual improving ray found", it, ray=yr / row_scale, ray_mineig=mineig)

        try:
            Lz = [_chol_with_jitter(zb) for zb in Z]
            Zinv = []
            for Lb in Lz:
                inv = sla.cho_solve((Lb, True), np.eye(Lb.shape[0]))
                Zinv.append(0.5 * (inv + inv.T))
            Lx = [_chol_with_jitter(xb) for xb in X]

            # Schur complement M[i, j] = <A_i, sym(X A_j Z^{-1})>, formed blockwise
            # with batched matmuls over precomputed constraint tensors.
            Wmat = np.zeros((m, blocks.total))
            for bidx, d in enumerate(blocks.dims):
                if d == 0 or batch_idx[bidx] is None:
                    continue
                sl = batch_slice[bidx]
                r, c = blocks.iu[bidx]
                sc = blocks.scales[bidx]
                for idx, A3 in zip(batch_idx[bidx], batch_A3[bidx]):
                    W3 = X[bidx][None, :, :] @ A3 @ Zinv[bidx][None, :, :]
                    W3 = 0.5 * (W3 + np.transpose(W3, (0, 2, 1)))
                    Wmat[np.ix_(idx, np.arange(sl.start, sl.stop))] = W3[:, r, c] * sc
            M = Adense @ Wmat.T if Adense is not None else Amat @ Wmat.T
            M = np.asarray(M.todense()) if sp.issparse(M) else np.asarray(M)
            M = 0.5 * (M + M.T)
            diag = np.diag(M)
            floor = 1e-14 * max(1.0, float(diag.max()) if m else 1.0)
            dj = np.sqrt(np.maximum(diag, floor))
            Mj = M / np.outer(dj, dj)
            Lm = _chol_with_jitter(Mj + 1e-14 * np.eye(m))
            M_ext = M.astype(np.longdouble)

            def schur_solve(rhs):
                # double-precision factor plus extended-precision refinement
                x = sla.cho_solve((Lm, True), rhs / dj) / dj
                rhs_ext = rhs.astype(np.longdouble)
                rnorm0 = np.linalg.norm(rhs) + 1e-300
                for _ in range(5):
                    r = np.asarray(rhs_ext - M_ext @ x.astype(np.longdouble), dtype=np.float64)
                    if np.linalg.norm(r) <= 1e-14 * rnorm0:
                        break
                    x = x + sla.cho_solve((Lm, True), r / dj) / dj
                return x

            XRdZ = []
            for xb, rb, zb in zip(X, Rd, Zinv):
                t = xb @ rb @ zb
                XRdZ.append(0.5 * (t + t.T))
            a_zinv = A_of(Zinv)
            a_xrdz = A_of(XRdZ)

            def newton(sigma_mu, corr=None):
                rhs = bvec + a_xrdz - sigma_mu * a_zinv
                if corr is not None:
                    rhs = rhs + A_of(corr)
                dy = schur_solve(rhs)
                dZ = [rb - atb for rb, atb in zip(Rd, At_of(dy))]
                dX = []
                for k, (xb, dzb, zinvb) in enumerate(zip(X, dZ, Zinv)):
                    raw = sigma_mu * zinvb - xb - xb @ dzb @ zinvb
                    if corr is not None:
                        raw = raw - corr[k]
                    dX.append(0.5 * (raw + raw.T))
                return dX, dy, dZ

            dX, dy, dZ = newton(0.0)
            ap = min(1.0, 0.98 * _max_step(X, dX, Lx))
            ad = min(1.0, 0.98 * _max_step(Z, dZ, Lz))
            Xa = [xb + ap * dxb for xb, dxb in zip(X, dX)]
            Za = [zb + ad * dzb for zb, dzb in zip(Z, dZ)]
            mu_aff = blocks.inner(Xa, Za) / max(1, blocks.ntot)
            sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.1, 1e-8))

            corr = []
            for dxb, dzb, zinvb in zip(dX, dZ, Zinv):
                t = dxb @ dzb @ zinvb
                corr.append(0.5 * (t + t.T))
            dX, dy, dZ = newton(sigma * mu, corr)
            ap = min(1.0, 0.98 * _max_step(X, dX, Lx))
            ad = min(1.0, 0.98 * _max_step(Z, dZ, Lz))
            direction_err = np.linalg.norm(A_of(dX) - Rp)
            budget = 0.3 * np.linalg.norm(Rp) + 1e-10 * (1.0 + norm_b)
            if ap * direction_err > budget:
                ap = min(ap, budget / direction_err)
        except np.linalg.LinAlgError as exc:
            message = f"linear algebra failure: {exc}"
            break

        if ap < 1e-10 and ad < 1e-10:
            message = "step length collapsed"
            break
        X = [xb + ap * dxb for xb, dxb in zip(X, dX)]
        y = y + ad * dy
        Z = [zb + ad * dzb for zb, dzb in zip(Z, dZ)]
    else:
        message = "iteration limit reached"

    return finish("numerical-failure", message, it, state=best_state)
