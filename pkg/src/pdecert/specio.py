"""JSON system descriptions: parsing, validation with pointer-style errors, serialization.

A system file carries the dimensions, the domain length, numeric boundary
and feedthrough matrices, and each polynomial coefficient matrix as a list
of numeric matrices by ascending power of s.  Matrix entries may be numbers
or expressions in named parameters and ``pi`` (e.g. ``"0.98*pi^2"``);
parameters default from the file's ``params`` block and can be overridden.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .pde_model import SystemSpec
from .polymat import NVARS, S, AffineCoeff, PolyMatrix

__all__ = ["SpecFormatError", "parse_spec", "parse_spec_dict", "serialize_spec", "eval_expression", "parse_param_overrides"]

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[()+\-*/^]))")


class SpecFormatError(ValueError):
    pass


def eval_expression(expr, params=None):
    """Evaluate a restricted arithmetic expression: numbers, pi, parameters, + - * / ^ ()."""
    if isinstance(expr, (int, float)):
        return float(expr)
    names = {"pi": math.pi}
    if params:
        names.update(params)
    tokens = []
    pos = 0
    text = str(expr)
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            if text[pos:].strip():
                raise SpecFormatError(f"cannot parse expression {expr!r} at {text[pos:]!r}")
            break
        num, name, op = mt.groups()
        if num:
            tokens.append(("num", float(num)))
        elif name:
            if name not in names:
                raise SpecFormatError(f"unknown parameter {name!r} in expression {expr!r}")
            tokens.append(("num", float(names[name])))
        else:
            tokens.append(("op", "^" if op == "**" else op))
        pos = mt.end()
    it = iter(range(len(tokens)))
    idx = [0]

    def peek():
        return tokens[idx[0]] if idx[0] < len(tokens) else (None, None)

    def advance():
        tok = tokens[idx[0]]
        idx[0] += 1
        return tok

    def atom():
        kind, val = peek()
        if kind == "num":
            advance()
            return val
        if kind == "op" and val == "(":
            advance()
            v = expr_sum()
            k2, v2 = peek()
            if not (k2 == "op" and v2 == ")"):
                raise SpecFormatError(f"unbalanced parentheses in {expr!r}")
            advance()
            return v
        if kind == "op" and val == "-":
            advance()
            return -atom()
        if kind == "op" and val == "+":
            advance()
            return atom()
        raise SpecFormatError(f"malformed expression {expr!r}")

    def power():
        base = atom()
        kind, val = peek()
        if kind == "op" and val == "^":
            advance()
            return base ** power()
        return base

    def term():
        v = power()
        while True:
            kind, val = peek()
            if kind == "op" and val in "*/":
                advance()
                rhs = power()
                v = v * rhs if val == "*" else v / rhs
            else:
                return v

    def expr_sum():
        v = term()
        while True:
            kind, val = peek()
            if kind == "op" and val in "+-":
                advance()
                rhs = term()
                v = v + rhs if val == "+" else v - rhs
            else:
                return v

    out = expr_sum()
    if idx[0] != len(tokens):
        raise SpecFormatError(f"trailing tokens in expression {expr!r}")
    return float(out)


def parse_param_overrides(pairs, base=None):
    """Fold NAME=EXPR strings into a parameter dictionary."""
    params = dict(base or {})
    for pair in pairs or ():
        if "=" not in pair:
            raise SpecFormatError(f"parameter override {pair!r} is not NAME=VALUE")
        name, value = pair.split("=", 1)
        params[name.strip()] = eval_expression(value.strip(), params)
    return params


def _numeric_matrix(node, rows, cols, params, path):
    if node is None:
        return np.zeros((rows, cols))
    if not isinstance(node, list):
        raise SpecFormatError(f"{path}: expected a matrix (list of rows)")
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols))
    if len(node) != rows:
        raise SpecFormatError(f"{path}: expected {rows} rows, found {len(node)}")
    out = np.zeros((rows, cols))
    for i, row in enumerate(node):
        if not isinstance(row, list) or len(row) != cols:
            raise SpecFormatError(f"{path}/{i}: expected {cols} entries")
        for j, entry in enumerate(row):
            try:
                out[i, j] = eval_expression(entry, params)
            except SpecFormatError as exc:
                raise SpecFormatError(f"{path}/{i}/{j}: {exc}") from exc
    return out


def _poly_matrix(node, rows, cols, params, path):
    """List of numeric matrices by ascending power of s -> PolyMatrix."""
    if node is None or node == []:
        return PolyMatrix.zeros(rows, cols)
    if not isinstance(node, list):
        raise SpecFormatError(f"{path}: expected a list of matrices by power of s")
    out = PolyMatrix.zeros(rows, cols)
    for k, mat in enumerate(node):
        m = _numeric_matrix(mat, rows, cols, params, f"{path}/{k}")
        mono = tuple(k if v == 0 else 0 for v in range(NVARS))
        for i in range(rows):
            for j in range(cols):
                if m[i, j] != 0:
                    cell = out.cells.setdefault((i, j), {})
                    cell[mono] = AffineCoeff(float(m[i, j]))
    return out


def parse_spec_dict(doc: dict, param_overrides=None) -> SystemSpec:
    if not isinstance(doc, dict):
        raise SpecFormatError("/: document must be a JSON object")
    for field in ("n", "m", "q", "L"):
        if field not in doc:
            raise SpecFormatError(f"/{field}: missing required field")
    try:
        n, m, q = int(doc["n"]), int(doc["m"]), int(doc["q"])
    except (TypeError, ValueError) as exc:
        raise SpecFormatError(f"/n,/m,/q: dimensions must be integers ({exc})")
    raw_params = doc.get("params", {})
    params = {}
    for name, value in raw_params.items():
        params[name] = eval_expression(value, params)
    params = parse_param_overrides(param_overrides, params)
    L = eval_expression(doc["L"], params)
    if L <= 0:
        raise SpecFormatError("/L: domain length must be positive")
    spec = SystemSpec(
        n=n,
        m=m,
        q=q,
        L=L,
        A0=_poly_matrix(doc.get("A0"), n, n, params, "/A0"),
        A1=_poly_matrix(doc.get("A1"), n, n, params, "/A1"),
        A2=_poly_matrix(doc.get("A2"), n, n, params, "/A2"),
        B=_numeric_matrix(doc.get("B"), 2 * n, 4 * n, params, "/B"),
        B1=_poly_matrix(doc.get("B1"), n, m, params, "/B1"),
        C1=_numeric_matrix(doc.get("C1"), q, 4 * n, params, "/C1"),
        Ca=_poly_matrix(doc.get("Ca"), q, n, params, "/Ca"),
        Cb=_poly_matrix(doc.get("Cb"), q, n, params, "/Cb"),
        D1=_numeric_matrix(doc.get("D1"), q, m, params, "/D1"),
    )
    return spec


def parse_spec(path, param_overrides=None) -> SystemSpec:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{p}: not valid JSON ({exc})") from exc
    try:
        return parse_spec_dict(doc, param_overrides)
    except (SpecFormatError, ValueError) as exc:
        raise SpecFormatError(f"{p}: {exc}") from exc


def _poly_to_lists(p: PolyMatrix, rows, cols):
    if p.is_zero():
        return []
    deg = p.degree(S)
    mats = [np.zeros((rows, cols)) for _ in range(deg + 1)]
    for i, j, mono, coeff in p.monomials():
        k = mono[S.index]
        mats[k][i, j] = float(coeff.const)
    while mats and not mats[-1].any():
        mats.pop()
    return [m.tolist() for m in mats]


def serialize_spec(spec: SystemSpec) -> dict:
    """Inverse of parse_spec_dict (parameters already substituted)."""
    return {
        "n": spec.n,
        "m": spec.m,
        "q": spec.q,
        "L": spec.L,
        "A0": _poly_to_lists(spec.A0, spec.n, spec.n),
        "A1": _poly_to_lists(spec.A1, spec.n, spec.n),
        "A2": _poly_to_lists(spec.A2, spec.n, spec.n),
        "B": spec.B.tolist(),
        "B1": _poly_to_lists(spec.B1, spec.n, spec.m),
        "C1": spec.C1.tolist(),
        "Ca": _poly_to_lists(spec.Ca, spec.q, spec.n),
        "Cb": _poly_to_lists(spec.Cb, spec.q, spec.n),
        "D1": spec.D1.tolist(),
    }
