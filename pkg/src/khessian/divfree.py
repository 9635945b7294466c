"""Divergence structure of Hessian operators on cubic polynomials.

For F = S_k the rows of (dF/dA_ij)(D^2 u) are divergence free; for
M_2(A) = det(trace(A) I - A) they are not.  Everything here is evaluated by
finite differences with Richardson extrapolation: the quantities involved are
polynomials of low degree, so the extrapolated differences are exact up to
rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations
from math import factorial

import numpy as np

from .symfun import s_k

MAX_VARS = 3


@dataclass
class CubicField:
    """u(x) = c0 + g.x + x^T H x / 2 + T[x, x, x] / 6 with symmetric H and T."""

    c0: float
    g: np.ndarray
    H: np.ndarray
    T: np.ndarray = field(default=None)

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        n = self.g.size
        if not 1 <= n <= MAX_VARS:
            raise ValueError(f"number of variables must be 1..{MAX_VARS}")
        self.H = np.asarray(self.H, dtype=float).reshape(n, n)
        self.T = np.zeros((n, n, n)) if self.T is None else np.asarray(self.T, dtype=float).reshape(n, n, n)

    @property
    def n(self) -> int:
        return self.g.size

    @classmethod
    def from_monomials(cls, n: int, terms: dict) -> "CubicField":
        """Build from {exponent tuple: coefficient}, e.g. {(3, 0, 0): 1, (0, 2, 0): 1}."""
        g, H, T = np.zeros(n), np.zeros((n, n)), np.zeros((n, n, n))
        c0 = 0.0
        for expo, coef in terms.items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != n or min(expo) < 0:
                raise ValueError(f"bad exponent {expo}")
            deg = sum(expo)
            if deg > 3:
                raise ValueError("polynomial degree exceeds 3")
            idx = [i for i, e in enumerate(expo) for _ in range(e)]
            # fill the symmetric derivative tensor of the monomial
            mult = _multi_factorial(expo)
            if deg == 0:
                c0 += coef
            elif deg == 1:
                g[idx[0]] += coef
            elif deg == 2:
                for p in set(permutations(idx)):
                    H[p] += coef * mult
            else:
                for p in set(permutations(idx)):
                    T[p] += coef * mult
        return cls(c0, g, H, T)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "CubicField":
        H = rng.normal(size=(n, n))
        T = np.zeros((n, n, n))
        for idx in combinations_with_replacement(range(n), 3):
            v = rng.normal()
            for p in set(permutations(idx)):
                T[p] = v
        return cls(rng.normal(), rng.normal(size=n), H + H.T, T)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.c0 + self.g @ x + x @ self.H @ x / 2 + np.einsum("ijl,i,j,l", self.T, x, x, x) / 6)

    def hessian(self, x) -> np.ndarray:
        return self.H + np.einsum("ijl,l->ij", self.T, np.asarray(x, dtype=float))


def _multi_factorial(expo) -> float:
    return float(np.prod([factorial(e) for e in expo]))


def m2(A) -> float:
    """M_2(A) = det(trace(A) I - A)."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.det(np.trace(A) * np.eye(A.shape[0]) - A))


def _operator(name, k: int | None):
    if callable(name):
        return name
    if name == "S_k":
        if k is None:
            raise ValueError("operator S_k needs k")
        return lambda A: s_k(A, k, method="minors")
    if name == "M2":
        return m2
    raise ValueError(f"unknown operator {name!r}")


def _richardson(fun, h: float) -> float:
    """Central difference of a scalar function of one variable at 0, Richardson-extrapolated."""
    d1 = (fun(h) - fun(-h)) / (2 * h)
    d2 = (fun(h / 2) - fun(-h / 2)) / h
    return (4 * d2 - d1) / 3


def matrix_gradient(F, A, i: int, j: int, h: float) -> float:
    """dF/dA_ij with A_ij perturbed on its own (entries treated as independent)."""
    E = np.zeros_like(A)
    E[i, j] = 1.0
    return _richardson(lambda t: F(A + t * E), h)


@dataclass
class DivergenceDefect:
    operator: str
    row: int
    values: np.ndarray


def divergence_defect(u: CubicField, operator, i: int, k: int | None = None, x=None) -> float:
    """sum_j D_j P^{ij}(D^2 u) at x (default the origin), P = dF/dA.

    ``operator`` is "S_k", "M2", or any callable F on symmetric matrices.
    """
    n = u.n
    if not 0 <= i < n:
        raise ValueError(f"row {i} outside 0..{n - 1}")
    if operator == "S_k" and not (k is not None and 1 <= k <= n):
        raise ValueError(f"k={k} outside 1..{n}")
    F = _operator(operator, k)
    x = np.zeros(n) if x is None else np.asarray(x, dtype=float)
    scale = 1.0 + np.max(np.abs(u.hessian(x))) + np.max(np.abs(u.T), initial=0.0)
    hA, hx = 1e-2 * scale, 1e-2
    total = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        total += _richardson(lambda t: matrix_gradient(F, u.hessian(x + t * e), i, j, hA), hx)
    return total


def divergence_defects(u: CubicField, operator, i: int, k: int | None = None, points=None) -> DivergenceDefect:
    """Defect values at several sample points (rows of ``points``)."""
    pts = np.zeros((1, u.n)) if points is None else np.atleast_2d(points)
    vals = np.array([divergence_defect(u, operator, i, k, p) for p in pts])
    return DivergenceDefect(operator, i, vals)


__all__ = ["CubicField", "DivergenceDefect", "divergence_defect", "divergence_defects", "m2", "matrix_gradient"]
