"""Bundled benchmark systems and the chain family used for runtime scaling."""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from .pde_model import SystemSpec
from .polymat import PolyMatrix
from .specio import parse_spec_dict

__all__ = ["benchmark_names", "load_benchmark", "benchmark_document", "chain_spec", "BENCHMARKS"]

BENCHMARKS = {
    "diffusion-dirichlet": "diffusion_dirichlet.json",
    "diffusion-mixed": "diffusion_mixed.json",
    "coupled-triangular": "coupled_triangular.json",
    "spatial-coeff": "spatial_coeff.json",
    "collocated-heat": "collocated_heat.json",
}


def benchmark_names():
    return sorted(BENCHMARKS)


def benchmark_document(name: str) -> dict:
    try:
        fname = BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; available: {benchmark_names()}")
    data = resources.files("pdecert.benchmarks").joinpath(fname).read_text()
    return json.loads(data)


def load_benchmark(name: str, param_overrides=None) -> SystemSpec:
    return parse_spec_dict(benchmark_document(name), param_overrides)


def chain_spec(i: int, lam: float | None = None, L: float = 1.0) -> SystemSpec:
    """Chain of i coupled states: state k is driven by the curvatures of states 1..k.

    All states share the same reaction coefficient and the same scalar
    disturbance; each output channel integrates one state.  Used to measure
    how certification cost scales with the number of coupled equations.
    """
    if i < 1:
        raise ValueError("chain size must be >= 1")
    lam = 0.5 * math.pi**2 if lam is None else lam
    n = i
    a2 = PolyMatrix.from_array(np.tril(np.ones((n, n))))
    b = np.zeros((2 * n, 4 * n))
    b[:n, :n] = np.eye(n)
    b[n:, n : 2 * n] = np.eye(n)
    return SystemSpec(
        n=n,
        m=1,
        q=n,
        L=L,
        A0=PolyMatrix.identity(n, lam),
        A1=PolyMatrix.zeros(n, n),
        A2=a2,
        B=b,
        B1=PolyMatrix.from_array(np.ones((n, 1))),
        C1=np.zeros((n, 4 * n)),
        Ca=PolyMatrix.identity(n),
        Cb=PolyMatrix.zeros(n, n),
        D1=np.zeros((n, 1)),
    )
