import numpy as np
import pytest

from pdecert.polymat import NVARS, AffineCoeff, PolyMatrix, Variable


def rand_poly(rng, rows, cols, variables, deg, scale=1.0):
    """Dense random polynomial matrix with float coefficients."""
    out = PolyMatrix(rows, cols)
    idx = [v.index for v in variables]
    monos = [()]

    def expand(prefix, remaining):
        if not remaining:
            monos.append(tuple(prefix))
            return
        for e in range(deg + 1):
            expand(prefix + [e], remaining[1:])

    monos = []
    expand([], list(idx))
    for i in range(rows):
        for j in range(cols):
            cell = {}
            for exps in monos:
                if sum(exps) > deg:
                    continue
                mono = [0] * NVARS
                for k, e in zip(idx, exps):
                    mono[k] = e
                cell[tuple(mono)] = AffineCoeff(scale * rng.standard_normal())
            out.cells[(i, j)] = cell
    return out


def assert_poly_close(a, b, tol=1e-9):
    from pdecert.polymat import compare_norm, poly_compare

    norm = compare_norm(poly_compare(a, b))
    scale = max(a.max_coeff_norm(), b.max_coeff_norm(), 1.0)
    assert norm <= tol * scale, f"polynomials differ: diff norm {norm:g} (scale {scale:g})"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
