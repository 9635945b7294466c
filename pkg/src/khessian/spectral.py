"""First eigenvalues of linear operators -a_ij D_ij and the optimal coefficient field.

For a k-admissible w the field

    A(x) = (1/k) S_k(D^2 w)^(-(k-1)/k) S_k^{ij}(D^2 w)

lies in V_k with rho_k^*(A) = (1/n) C(n,k)^(1/k), and a_ij D_ij w = S_k(D^2 w)^(1/k).
Applied to a k-Hessian eigenfunction this makes w an eigenfunction of the
linear operator with the same eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .dualcone import c_nk, rho_star
from .pde.grid import Grid2D, GridFunction, grid_s_k

MARGIN_STRIDE = 8


class SpectralError(RuntimeError):
    pass


@dataclass
class CoefficientField:
    """Symmetric 2x2 coefficients (a11, a12, a22) at the interior nodes of a grid."""

    grid: Grid2D
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    k: int = 2

    def __post_init__(self):
        N = self.grid.n_interior
        for name in ("a11", "a12", "a22"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (N,)).copy()
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            setattr(self, name, arr)
        if not np.all((self.a11 > 0) & (self.a11 * self.a22 - self.a12**2 > 0)):
            raise ValueError("coefficient field must be positive definite at interior nodes")

    @classmethod
    def constant(cls, grid: Grid2D, A, k: int = 2) -> "CoefficientField":
        A = np.asarray(A, dtype=float)
        return cls(grid, A[0, 0], A[0, 1], A[1, 1], k)

    def matrices(self, idx=slice(None)) -> np.ndarray:
        a, c, b = self.a11[idx], self.a12[idx], self.a22[idx]
        return np.stack([np.stack([a, c], -1), np.stack([c, b], -1)], -2)

    def scaled(self, s) -> "CoefficientField":
        return CoefficientField(self.grid, s * self.a11, s * self.a12, s * self.a22, self.k)

    @cached_property
    def margin(self) -> float:
        """min over sampled nodes of rho_k^*(A(x)) - (1/n) C(n,k)^(1/k); >= 0 means V_k."""
        idx = np.arange(0, self.grid.n_interior, MARGIN_STRIDE)
        vals = [rho_star(M, self.k).rho_star for M in self.matrices(idx)]
        return float(min(vals) - c_nk(2, self.k))

    def operator(self) -> sp.csr_matrix:
        """Discrete -a_ij D_ij (Shortley-Weller second differences, 4-point mixed stencil)."""
        g = self.grid
        L = sp.diags(self.a11) @ g.Dxx + 2.0 * sp.diags(self.a12) @ g.Dxy + sp.diags(self.a22) @ g.Dyy
        return (-L).tocsr()

    def apply(self, u: GridFunction) -> np.ndarray:
        """a_ij D_ij u at interior nodes."""
        a, c, b = u.hessian()
        return self.a11 * a + 2.0 * self.a12 * c + self.a22 * b

    def to_text(self) -> str:
        g = self.grid
        rows = [f"{ix} {iy} {a:.17g} {c:.17g} {b:.17g}"
                for ix, iy, a, c, b in zip(g.ix, g.iy, self.a11, self.a12, self.a22)]
        return "\n".join(rows) + "\n"

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, grid: Grid2D, path, k: int = 2) -> "CoefficientField":
        data = np.loadtxt(path, ndmin=2)
        ix, iy = data[:, 0].astype(int), data[:, 1].astype(int)
        idx = grid.index[iy, ix]
        if np.any(idx < 0) or len(idx) != grid.n_interior:
            raise ValueError("field rows do not match the grid's interior nodes")
        a11, a12, a22 = (np.empty(grid.n_interior) for _ in range(3))
        a11[idx], a12[idx], a22[idx] = data[:, 2], data[:, 3], data[:, 4]
        return cls(grid, a11, a12, a22, k)


@dataclass
class LinearEigenResult:
    lambda1: float
    eigenvector: GridFunction
    iterations: int
    residual: float


def linear_first_eigenvalue(A: CoefficientField, *, rtol: float = 1e-10, max_iter: int = 500) -> LinearEigenResult:
    """Smallest eigenvalue of -a_ij D_ij by inverse power iteration on the sparse LU."""
    L = A.operator()
    try:
        lu = splu(L.tocsc())
    except RuntimeError as exc:
        raise SpectralError(f"factorization failed: {exc}") from exc
    v = np.ones(L.shape[0])
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        v = lu.solve(v)
        v /= np.max(np.abs(v))
        Lv = L @ v
        lam = float(v @ Lv / (v @ v))
        if abs(lam - lam_old) <= rtol * abs(lam):
            break
        lam_old = lam
    else:
        raise SpectralError(f"inverse iteration did not converge in {max_iter} steps")
    if lam <= 0.0:
        raise SpectralError(f"negative first eigenvalue {lam}: indefinite discretization")
    v *= np.sign(v.sum())
    if np.any(v <= 0.0):
        raise SpectralError("first eigenvector is not positive at interior nodes")
    residual = float(np.max(np.abs(L @ v - lam * v)) / lam)
    return LinearEigenResult(lam, GridFunction.from_interior(A.grid, v), it, residual)


def field_from_hessian(grid: Grid2D, a, b, c, k: int) -> CoefficientField:
    """(1/k) S_k^(-(k-1)/k) S_k^{ij} for the Hessians [[a, c], [c, b]] at interior nodes."""
    if k == 1:
        one = np.ones(grid.n_interior)
        return CoefficientField(grid, one, 0.0 * one, one, 1)
    if k != 2:
        raise ValueError("two-dimensional fields support k in {1, 2}")
    S = grid_s_k(a, b, c, 2)
    if np.any(S <= 0.0) or np.any(a + b <= 0.0):
        raise SpectralError("S_k(D^2 w) must be positive at every interior node")
    pre = 0.5 * S**-0.5
    # gradient of det on 2x2 matrices is the cofactor matrix
    return CoefficientField(grid, pre * b, -pre * c, pre * a, 2)


def random_v_k_field(grid: Grid2D, k: int, rng: np.random.Generator) -> CoefficientField:
    """A V_k field: the optimal field of a random convex cubic, scaled by a smooth s(x) >= 1."""
    x, y = grid.xy
    Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    H = (Q * rng.uniform(0.7, 3.5, size=2)) @ Q.T
    t = rng.normal(scale=0.05, size=4)
    a = H[0, 0] + t[0] * x + t[1] * y
    c = H[0, 1] + t[1] * x + t[2] * y
    b = H[1, 1] + t[2] * x + t[3] * y
    s = 1.0 + rng.uniform(0.0, 0.5) * (1.0 + np.sin(rng.uniform(1, 4) * x + rng.uniform(0, 6))) / 2
    return field_from_hessian(grid, a, b, c, k).scaled(s)


def optimal_field(w: GridFunction, k: int) -> CoefficientField:
    """Optimal V_k coefficients built from the discrete Hessian of w."""
    a, c, b = w.hessian()
    return field_from_hessian(w.grid, a, b, c, k)


def pointwise_operator_bound(u: GridFunction, A: CoefficientField, k: int, *, exclude: float = 0.0,
                             check_membership: bool = False) -> float:
    """min over interior nodes farther than ``exclude`` from the boundary of a_ij D_ij u - S_k(D^2 u)^(1/k)."""
    if not u.admissible(k):
        raise ValueError(f"u is not {k}-admissible")
    if check_membership and A.margin < -1e-6:
        raise ValueError("coefficient field is not in V_k at every sampled node")
    keep = u.grid.boundary_distance() > exclude
    if not np.any(keep):
        raise ValueError("exclusion margin removes every node")
    gap = A.apply(u) - np.maximum(u.s_k(k), 0.0) ** (1.0 / k)
    return float(np.min(gap[keep]))


__all__ = [
    "CoefficientField", "LinearEigenResult", "SpectralError", "field_from_hessian",
    "linear_first_eigenvalue", "optimal_field", "pointwise_operator_bound", "random_v_k_field",
]
