"""Exact algebra for matrix-valued polynomials in the spatial variables s, theta, beta, eta.

Coefficients are affine expressions in named decision scalars, so every object
built on top of this module (kernels, operator data, matching constraints)
stays linear in the semidefinite-program unknowns.  All operations are pure;
values are immutable by convention and safe to share across threads.

Coefficients are double-precision floats by default.  Passing
``fractions.Fraction`` constants keeps all arithmetic exact (integration
divides by integers), which the test suite uses to pin symbolic identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Number
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

__all__ = [
    "Variable",
    "S",
    "THETA",
    "BETA",
    "ETA",
    "AffineCoeff",
    "PolyMatrix",
    "TriangleKernel",
    "CoeffDiff",
    "PolymatError",
    "DimensionMismatch",
    "AffineDegreeError",
    "UnassignedSymbolError",
    "poly_arith",
    "poly_integrate",
    "kernel_integrate",
    "poly_compare",
    "poly_eval",
    "hcat",
    "vcat",
    "swap_transpose",
]

VAR_NAMES = ("s", "theta", "beta", "eta")
NVARS = len(VAR_NAMES)
ZERO_MONO = (0,) * NVARS

PRUNE_REL_TOL = 1e-14


class PolymatError(Exception):
    pass


class DimensionMismatch(PolymatError):
    pass


class AffineDegreeError(PolymatError):
    """Raised when a product would be quadratic in the decision variables."""


class UnassignedSymbolError(PolymatError):
    pass


@dataclass(frozen=True, order=True)
class Variable:
    """One of the four spatial coordinates, in the fixed global order."""

    name: str

    def __post_init__(self):
        if self.name not in VAR_NAMES:
            raise PolymatError(f"unknown variable {self.name!r}; allowed: {VAR_NAMES}")

    @property
    def index(self) -> int:
        return VAR_NAMES.index(self.name)


S = Variable("s")
THETA = Variable("theta")
BETA = Variable("beta")
ETA = Variable("eta")

Mono = tuple  # exponent vector of length NVARS, global variable order
DecisionId = tuple  # hashable id, e.g. ("Tl", i, j) or ("gain_sq", 0, 0)


class AffineCoeff:
    """constant + sum(weight * decision variable); weights never stored at zero."""

    __slots__ = ("const", "terms")

    def __init__(self, const=0.0, terms: Mapping[DecisionId, float] | None = None):
        self.const = const
        self.terms = dict(terms) if terms else {}

    def copy(self) -> "AffineCoeff":
        return AffineCoeff(self.const, self.terms)

    @property
    def is_numeric(self) -> bool:
        return not self.terms

    def __add__(self, other: "AffineCoeff") -> "AffineCoeff":
        terms = dict(self.terms)
        for k, w in other.terms.items():
            nw = terms.get(k, 0) + w
            if nw == 0:
                terms.pop(k, None)
            else:
                terms[k] = nw
        return AffineCoeff(self.const + other.const, terms)

    def __sub__(self, other: "AffineCoeff") -> "AffineCoeff":
        return self + other.scale(-1)

    def __neg__(self) -> "AffineCoeff":
        return self.scale(-1)

    def scale(self, c) -> "AffineCoeff":
        if c == 0:
            return AffineCoeff(0 * self.const)
        return AffineCoeff(self.const * c, {k: w * c for k, w in self.terms.items()})

    def div(self, c) -> "AffineCoeff":
        return AffineCoeff(self.const / c, {k: w / c for k, w in self.terms.items()})

    def mul(self, other: "AffineCoeff") -> "AffineCoeff":
        if self.terms and other.terms:
            raise AffineDegreeError(
                "product of two decision-dependent coefficients is not affine"
            )
        if other.terms:
            return other.mul(self)
        return self.scale(other.const)

    def evaluate(self, decisions: Mapping[DecisionId, float] | None = None) -> float:
        val = float(self.const)
        for k, w in self.terms.items():
            if decisions is None or k not in decisions:
                raise UnassignedSymbolError(f"decision variable {k!r} unassigned")
            val += float(w) * float(decisions[k])
        return val

    def norm(self) -> float:
        return abs(float(self.const)) + sum(abs(float(w)) for w in self.terms.values())

    def is_exact_zero(self) -> bool:
        return self.const == 0 and not self.terms

    def __repr__(self):
        return f"AffineCoeff({self.const!r}, {self.terms!r})"


Cell = dict  # Mono -> AffineCoeff
BoundLike = Union[Number, Variable, "PolyMatrix"]


def _as_coeff(value) -> AffineCoeff:
    if isinstance(value, AffineCoeff):
        return value
    return AffineCoeff(value)


def _cell_add(dst: Cell, src: Cell, sign=1) -> None:
    for mono, coeff in src.items():
        add = coeff if sign == 1 else coeff.scale(sign)
        cur = dst.get(mono)
        dst[mono] = add if cur is None else cur + add


def _cell_is_zero(cell: Cell) -> bool:
    return all(c.is_exact_zero() for c in cell.values())


class PolyMatrix:
    """Sparse matrix of polynomials; cells map exponent vectors to affine coefficients."""

    __slots__ = ("rows", "cols", "cells")

    def __init__(self, rows: int, cols: int, cells: dict | None = None):
        if rows < 0 or cols < 0:
            raise DimensionMismatch("negative matrix dimension")
        self.rows = rows
        self.cols = cols
        self.cells = cells if cells is not None else {}

    # -- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "PolyMatrix":
        return cls(rows, cols)

    @classmethod
    def identity(cls, n: int, value=1.0) -> "PolyMatrix":
        cells = {(i, i): {ZERO_MONO: AffineCoeff(value)} for i in range(n)}
        return cls(n, n, cells)

    @classmethod
    def from_array(cls, arr) -> "PolyMatrix":
        a = np.atleast_2d(np.asarray(arr))
        out = cls(a.shape[0], a.shape[1])
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                v = a[i, j]
                if v != 0:
                    out.cells[(i, j)] = {ZERO_MONO: AffineCoeff(float(v))}
        return out

    @classmethod
    def constant(cls, value) -> "PolyMatrix":
        out = cls(1, 1)
        if not (isinstance(value, Number) and value == 0):
            out.cells[(0, 0)] = {ZERO_MONO: _as_coeff(value)}
        return out

    @classmethod
    def monomial(cls, var: Variable, power: int = 1, coeff=1.0) -> "PolyMatrix":
        mono = tuple(power if k == var.index else 0 for k in range(NVARS))
        return cls(1, 1, {(0, 0): {mono: _as_coeff(coeff)}})

    @classmethod
    def decision(cls, did: DecisionId, weight=1.0) -> "PolyMatrix":
        return cls(1, 1, {(0, 0): {ZERO_MONO: AffineCoeff(0.0, {did: weight})}})

    # -- bookkeeping --------------------------------------------------------

    @property
    def shape(self):
        return (self.rows, self.cols)

    def is_zero(self) -> bool:
        return all(_cell_is_zero(c) for c in self.cells.values())

    def max_coeff_norm(self) -> float:
        best = 0.0
        for cell in self.cells.values():
            for coeff in cell.values():
                n = coeff.norm()
                if n > best:
                    best = n
        return best

    def variables(self) -> set:
        out = set()
        for cell in self.cells.values():
            for mono in cell:
                for k, e in enumerate(mono):
                    if e:
                        out.add(Variable(VAR_NAMES[k]))
        return out

    def degree(self, var: Variable | None = None) -> int:
        """Max exponent of ``var`` (total degree when var is None); zero matrix -> 0."""
        best = 0
        for cell in self.cells.values():
            for mono, coeff in cell.items():
                if coeff.is_exact_zero():
                    continue
                d = sum(mono) if var is None else mono[var.index]
                if d > best:
                    best = d
        return best

    def monomials(self) -> Iterator[tuple]:
        """Yield (row, col, mono, coeff) over all stored non-zero coefficients."""
        for (i, j), cell in self.cells.items():
            for mono, coeff in cell.items():
                if not coeff.is_exact_zero():
                    yield i, j, mono, coeff

    def is_numeric(self) -> bool:
        return all(c.is_numeric for _, _, _, c in self.monomials())

    def copy(self) -> "PolyMatrix":
        return PolyMatrix(
            self.rows,
            self.cols,
            {ij: {m: c.copy() for m, c in cell.items()} for ij, cell in self.cells.items()},
        )

    def pruned(self) -> "PolyMatrix":
        """Drop float coefficients below 1e-14 times the largest coefficient magnitude."""
        thr = PRUNE_REL_TOL * self.max_coeff_norm()
        cells = {}
        for ij, cell in self.cells.items():
            new_cell = {}
            for mono, coeff in cell.items():
                const = coeff.const
                if isinstance(const, float) and abs(const) < thr:
                    const = 0.0
                terms = {
                    k: w
                    for k, w in coeff.terms.items()
                    if not (isinstance(w, float) and abs(w) < thr) and w != 0
                }
                if const == 0 and not terms:
                    continue
                new_cell[mono] = AffineCoeff(const, terms)
            if new_cell:
                cells[ij] = new_cell
        return PolyMatrix(self.rows, self.cols, cells)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        self._check_same_shape(other)
        cells = {ij: dict(cell) for ij, cell in self.cells.items()}
        for ij, cell in other.cells.items():
            dst = cells.setdefault(ij, {})
            _cell_add(dst, cell)
        return PolyMatrix(self.rows, self.cols, cells).pruned()

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        return self + other.scale(-1)

    def __neg__(self) -> "PolyMatrix":
        return self.scale(-1)

    def scale(self, c) -> "PolyMatrix":
        if c == 0:
            return PolyMatrix(self.rows, self.cols)
        cells = {
            ij: {m: coeff.scale(c) for m, coeff in cell.items()}
            for ij, cell in self.cells.items()
        }
        return PolyMatrix(self.rows, self.cols, cells)

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise DimensionMismatch(
                f"matmul shapes {self.shape} x {other.shape} incompatible"
            )
        by_row: dict[int, list] = {}
        for (k, j), cell in other.cells.items():
            by_row.setdefault(k, []).append((j, cell))
        out: dict = {}
        for (i, k), acell in self.cells.items():
            for j, bcell in by_row.get(k, ()):
                dst = out.setdefault((i, j), {})
                for ma, ca in acell.items():
                    for mb, cb in bcell.items():
                        mono = tuple(ea + eb for ea, eb in zip(ma, mb))
                        prod = ca.mul(cb)
                        cur = dst.get(mono)
                        dst[mono] = prod if cur is None else cur + prod
        return PolyMatrix(self.rows, other.cols, out).pruned()

    def scalar_mul(self, scalar: "PolyMatrix") -> "PolyMatrix":
        """Multiply every entry by a 1x1 polynomial."""
        if scalar.shape != (1, 1):
            raise DimensionMismatch("scalar_mul needs a 1x1 polynomial")
        scell = scalar.cells.get((0, 0), {})
        out: dict = {}
        for ij, cell in self.cells.items():
            dst = out.setdefault(ij, {})
            for ma, ca in cell.items():
                for mb, cb in scell.items():
                    mono = tuple(ea + eb for ea, eb in zip(ma, mb))
                    prod = ca.mul(cb)
                    cur = dst.get(mono)
                    dst[mono] = prod if cur is None else cur + prod
        return PolyMatrix(self.rows, self.cols, out).pruned()

    def transpose(self) -> "PolyMatrix":
        cells = {(j, i): {m: c.copy() for m, c in cell.items()} for (i, j), cell in self.cells.items()}
        return PolyMatrix(self.cols, self.rows, cells)

    @property
    def T(self) -> "PolyMatrix":
        return self.transpose()

    # -- variable manipulation ----------------------------------------------

    def rename(self, mapping: Mapping[Variable, Variable]) -> "PolyMatrix":
        """Simultaneously rename variables (swaps allowed); collisions are an error."""
        sigma = list(range(NVARS))
        for src, dst in mapping.items():
            sigma[src.index] = dst.index
        cells = {}
        for ij, cell in self.cells.items():
            new_cell = {}
            for mono, coeff in cell.items():
                new = [0] * NVARS
                for k, e in enumerate(mono):
                    if e:
                        t = sigma[k]
                        if new[t]:
                            raise PolymatError(
                                f"rename collision: two variables map onto {VAR_NAMES[t]}"
                            )
                        new[t] = e
                nm = tuple(new)
                if nm in new_cell:
                    new_cell[nm] = new_cell[nm] + coeff
                else:
                    new_cell[nm] = coeff.copy()
            cells[ij] = new_cell
        return PolyMatrix(self.rows, self.cols, cells)

    def with_decisions(self, decisions: Mapping[DecisionId, float]) -> "PolyMatrix":
        """Substitute numeric values for every decision variable."""
        cells = {}
        for ij, cell in self.cells.items():
            new_cell = {}
            for mono, coeff in cell.items():
                new_cell[mono] = AffineCoeff(coeff.evaluate(decisions))
            cells[ij] = new_cell
        return PolyMatrix(self.rows, self.cols, cells).pruned()

    def diff(self, var: Variable) -> "PolyMatrix":
        k = var.index
        cells = {}
        for ij, cell in self.cells.items():
            new_cell = {}
            for mono, coeff in cell.items():
                e = mono[k]
                if e == 0:
                    continue
                nm = tuple(x - 1 if idx == k else x for idx, x in enumerate(mono))
                scaled = coeff.scale(e)
                if nm in new_cell:
                    new_cell[nm] = new_cell[nm] + scaled
                else:
                    new_cell[nm] = scaled
            if new_cell:
                cells[ij] = new_cell
        return PolyMatrix(self.rows, self.cols, cells)

    def _bound_cell(self, bound: BoundLike, var: Variable) -> Cell:
        if isinstance(bound, Variable):
            if bound == var:
                raise PolymatError("integration bound references the integration variable")
            mono = tuple(1 if k == bound.index else 0 for k in range(NVARS))
            return {mono: AffineCoeff(1)}
        if isinstance(bound, PolyMatrix):
            if bound.shape != (1, 1):
                raise DimensionMismatch("polynomial bound must be 1x1")
            cell = bound.cells.get((0, 0), {})
            for mono, coeff in cell.items():
                if mono[var.index]:
                    raise PolymatError(
                        "integration bound references the integration variable"
                    )
                if not coeff.is_numeric:
                    raise PolymatError("integration bound must be numeric")
            return {m: c.copy() for m, c in cell.items()}
        if isinstance(bound, Number):
            return {ZERO_MONO: AffineCoeff(bound)} if bound != 0 else {}
        raise PolymatError(f"unsupported integration bound {bound!r}")

    def substitute(self, var: Variable, bound: BoundLike) -> "PolyMatrix":
        """Replace ``var`` by a numeric polynomial in the remaining variables."""
        bcell = self._bound_cell(bound, var)
        k = var.index
        max_pow = 0
        for cell in self.cells.values():
            for mono in cell:
                if mono[k] > max_pow:
                    max_pow = mono[k]
        powers: list[Cell] = [{ZERO_MONO: AffineCoeff(1)}]
        for _ in range(max_pow):
            prev = powers[-1]
            nxt: Cell = {}
            for ma, ca in prev.items():
                for mb, cb in bcell.items():
                    mono = tuple(ea + eb for ea, eb in zip(ma, mb))
                    prod = ca.mul(cb)
                    cur = nxt.get(mono)
                    nxt[mono] = prod if cur is None else cur + prod
            powers.append(nxt)
        cells: dict = {}
        for ij, cell in self.cells.items():
            dst = cells.setdefault(ij, {})
            for mono, coeff in cell.items():
                e = mono[k]
                base = tuple(0 if idx == k else x for idx, x in enumerate(mono))
                for mb, cb in powers[e].items():
                    nm = tuple(ea + eb for ea, eb in zip(base, mb))
                    prod = coeff.mul(cb)
                    cur = dst.get(nm)
                    dst[nm] = prod if cur is None else cur + prod
        return PolyMatrix(self.rows, self.cols, cells).pruned()

    def integrate(self, var: Variable, lower: BoundLike, upper: BoundLike) -> "PolyMatrix":
        """Definite integral over ``var``; bounds are numeric polynomials in the other variables."""
        k = var.index
        anti_cells: dict = {}
        for ij, cell in self.cells.items():
            new_cell = {}
            for mono, coeff in cell.items():
                e = mono[k] + 1
                nm = tuple(x + 1 if idx == k else x for idx, x in enumerate(mono))
                new_cell[nm] = coeff.div(e)
            anti_cells[ij] = new_cell
        anti = PolyMatrix(self.rows, self.cols, anti_cells)
        return (anti.substitute(var, upper) - anti.substitute(var, lower)).pruned()

    # -- evaluation ---------------------------------------------------------

    def eval(
        self,
        point: Mapping[Variable, float] | None = None,
        decisions: Mapping[DecisionId, float] | None = None,
    ) -> np.ndarray:
        assign = [None] * NVARS
        if point:
            for v, val in point.items():
                assign[v.index] = float(val)
        out = np.zeros((self.rows, self.cols))
        for (i, j), cell in self.cells.items():
            acc = 0.0
            for mono, coeff in cell.items():
                term = coeff.evaluate(decisions)
                for k, e in enumerate(mono):
                    if e:
                        if assign[k] is None:
                            raise UnassignedSymbolError(
                                f"variable {VAR_NAMES[k]!r} unassigned"
                            )
                        term *= assign[k] ** e
                acc += term
            out[i, j] = acc
        return out

    def _check_same_shape(self, other: "PolyMatrix") -> None:
        if self.shape != other.shape:
            raise DimensionMismatch(f"shape mismatch {self.shape} vs {other.shape}")

    def __repr__(self):
        return f"PolyMatrix({self.rows}x{self.cols}, {len(self.cells)} cells)"


def hcat(*mats: PolyMatrix) -> PolyMatrix:
    rows = mats[0].rows
    if any(m.rows != rows for m in mats):
        raise DimensionMismatch("hcat row mismatch")
    out = PolyMatrix(rows, sum(m.cols for m in mats))
    off = 0
    for m in mats:
        for (i, j), cell in m.cells.items():
            out.cells[(i, j + off)] = {mo: c.copy() for mo, c in cell.items()}
        off += m.cols
    return out


def vcat(*mats: PolyMatrix) -> PolyMatrix:
    cols = mats[0].cols
    if any(m.cols != cols for m in mats):
        raise DimensionMismatch("vcat column mismatch")
    out = PolyMatrix(sum(m.rows for m in mats), cols)
    off = 0
    for m in mats:
        for (i, j), cell in m.cells.items():
            out.cells[(i + off, j)] = {mo: c.copy() for mo, c in cell.items()}
        off += m.rows
    return out


def swap_transpose(p: PolyMatrix, a: Variable = S, b: Variable = THETA) -> PolyMatrix:
    """Return p(b, a) transposed: the adjoint partner of a two-variable kernel."""
    return p.rename({a: b, b: a}).transpose()


@dataclass
class TriangleKernel:
    """Bivariate kernel with separate polynomial branches on either side of the diagonal.

    ``upper`` is valid where first >= second, ``lower`` where first < second.
    Branches need not agree on the diagonal (indicator jumps are the point).
    """

    first: Variable
    second: Variable
    upper: PolyMatrix
    lower: PolyMatrix

    def __post_init__(self):
        if self.upper.shape != self.lower.shape:
            raise DimensionMismatch("triangle kernel branches differ in shape")
        if self.first == self.second:
            raise PolymatError("triangle kernel needs two distinct variables")

    @property
    def shape(self):
        return self.upper.shape

    def __add__(self, other: "TriangleKernel") -> "TriangleKernel":
        if (self.first, self.second) != (other.first, other.second):
            raise PolymatError("triangle kernels use different variable pairs")
        return TriangleKernel(
            self.first, self.second, self.upper + other.upper, self.lower + other.lower
        )

    def scale(self, c) -> "TriangleKernel":
        return TriangleKernel(self.first, self.second, self.upper.scale(c), self.lower.scale(c))

    def lmul(self, m: PolyMatrix) -> "TriangleKernel":
        return TriangleKernel(self.first, self.second, m @ self.upper, m @ self.lower)

    def rmul(self, m: PolyMatrix) -> "TriangleKernel":
        return TriangleKernel(self.first, self.second, self.upper @ m, self.lower @ m)

    def rename(self, mapping: Mapping[Variable, Variable]) -> "TriangleKernel":
        return TriangleKernel(
            mapping.get(self.first, self.first),
            mapping.get(self.second, self.second),
            self.upper.rename(mapping),
            self.lower.rename(mapping),
        )

    def swap_transpose(self) -> "TriangleKernel":
        """K'(a, b) := K(b, a)^T on each region."""
        swap = {self.first: self.second, self.second: self.first}
        return TriangleKernel(
            self.first,
            self.second,
            self.lower.rename(swap).transpose(),
            self.upper.rename(swap).transpose(),
        )

    def eval(self, point: Mapping[Variable, float], decisions=None) -> np.ndarray:
        a = point[self.first]
        b = point[self.second]
        branch = self.upper if a >= b else self.lower
        return branch.eval(point, decisions)


def kernel_integrate(
    k: TriangleKernel,
    var: Variable,
    length: float,
    region: str = "full",
) -> PolyMatrix:
    """Integrate one variable of a triangle kernel over [0, length].

    ``region`` selects "left" (var below the other variable), "right"
    (var above it), or "full" (their sum); the split at the diagonal picks
    the branch that is valid on each part, so no indicator survives.
    """
    if var == k.second:
        other = k.first
        below, above = k.upper, k.lower  # var <= other lies in the upper region
    elif var == k.first:
        other = k.second
        below, above = k.lower, k.upper
    else:
        raise PolymatError(f"{var} is not a variable of this kernel")
    parts = []
    if region in ("full", "left", "left-of-diagonal"):
        parts.append(below.integrate(var, 0.0, other))
    if region in ("full", "right", "right-of-diagonal"):
        parts.append(above.integrate(var, other, length))
    if not parts:
        raise PolymatError(f"unknown region {region!r}")
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


@dataclass(frozen=True)
class CoeffDiff:
    """One per-monomial discrepancy record produced by poly_compare."""

    cell: tuple
    mono: Mono
    coeff: AffineCoeff


def poly_compare(a: PolyMatrix, b: PolyMatrix) -> list[CoeffDiff]:
    """Per-monomial affine differences a - b; empty iff the matrices agree.

    Float dust below the standard relative tolerance (against the larger of
    the two operands) is discarded so exact agreement survives roundoff.
    """
    a._check_same_shape(b)
    thr = PRUNE_REL_TOL * max(a.max_coeff_norm(), b.max_coeff_norm())
    diffs: list[CoeffDiff] = []
    keys = set(a.cells) | set(b.cells)
    for ij in sorted(keys):
        ca = a.cells.get(ij, {})
        cb = b.cells.get(ij, {})
        for mono in sorted(set(ca) | set(cb)):
            d = ca.get(mono, AffineCoeff(0.0)) - cb.get(mono, AffineCoeff(0.0))
            const = d.const
            if isinstance(const, float) and abs(const) <= thr:
                const = 0.0
            terms = {
                k: w
                for k, w in d.terms.items()
                if not (isinstance(w, float) and abs(w) <= thr)
            }
            if const == 0 and not terms:
                continue
            diffs.append(CoeffDiff(ij, mono, AffineCoeff(const, terms)))
    return diffs


def compare_norm(diffs: Iterable[CoeffDiff]) -> float:
    return max((d.coeff.norm() for d in diffs), default=0.0)


def poly_arith(a: PolyMatrix, b: PolyMatrix | None, kind: str, factor=None) -> PolyMatrix:
    """Named dispatcher over the basic matrix operations."""
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a @ b
    if kind == "transpose":
        return a.transpose()
    if kind == "scale":
        return a.scale(factor)
    raise PolymatError(f"unknown arithmetic kind {kind!r}")


def poly_integrate(p: PolyMatrix, var: Variable, lower: BoundLike, upper: BoundLike) -> PolyMatrix:
    return p.integrate(var, lower, upper)


def poly_eval(p: PolyMatrix, point=None, decisions=None) -> np.ndarray:
    return p.eval(point, decisions)
