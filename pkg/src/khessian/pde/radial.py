"""Radially symmetric k-Hessian equations on balls B_R in R^n.

For u = u(r) the Hessian has eigenvalues u'' (once) and u'/r (n-1 times), so

    S_k(D^2 u) = C(n-1,k-1) u'' (u'/r)^(k-1) + C(n-1,k) (u'/r)^k
               = C(n-1,k-1)/k * r^(1-n) (r^(n-k) (u')^k)'.

The Dirichlet problem S_k(D^2 u) = f, u(R) = 0 is therefore solved by two
quadratures.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb, gamma, pi

import numpy as np
from scipy.integrate import cumulative_simpson

from ..symfun import sigma_all


@dataclass(frozen=True)
class RadialDomain:
    n: int
    R: float = 1.0
    M: int = 512

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension n must be at least 2")
        if self.R <= 0:
            raise ValueError("radius must be positive")
        if self.M < 64 or self.M % 2:
            raise ValueError("mesh needs an even number M >= 64 of intervals")

    @cached_property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.R, self.M + 1)

    @property
    def dr(self) -> float:
        return self.R / self.M

    @cached_property
    def sphere_area(self) -> float:
        """Surface area of the unit sphere S^(n-1)."""
        return 2.0 * pi ** (self.n / 2) / gamma(self.n / 2)

    @property
    def volume(self) -> float:
        return self.sphere_area * self.R**self.n / self.n

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite Simpson weights for integrals over the ball, dx = area r^(n-1) dr."""
        w = np.ones(self.M + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * self.dr / 3.0 * self.r ** (self.n - 1) * self.sphere_area

    @property
    def discrete_volume(self) -> float:
        return float(self.weights.sum())

    def integrate(self, g) -> float:
        return float(np.dot(self.weights, np.asarray(g, dtype=float)))

    def describe(self) -> str:
        return f"ball(n={self.n}, R={self.R:g}), M={self.M}"


@dataclass
class RadialFunction:
    """Profile u(r) on the radial mesh with its first (and optionally second) derivative."""

    domain: RadialDomain
    values: np.ndarray
    derivative: np.ndarray
    second: np.ndarray | None = field(default=None)

    def __post_init__(self):
        M1 = self.domain.M + 1
        self.values = np.asarray(self.values, dtype=float)
        self.derivative = np.asarray(self.derivative, dtype=float)
        if self.values.shape != (M1,) or self.derivative.shape != (M1,):
            raise ValueError("profile arrays must match the radial mesh")
        if self.second is None:
            self.second = np.gradient(self.derivative, self.domain.r, edge_order=2)
        else:
            self.second = np.asarray(self.second, dtype=float)

    @classmethod
    def from_callable(cls, domain: RadialDomain, u, du, d2u=None) -> "RadialFunction":
        r = domain.r
        second = None if d2u is None else np.broadcast_to(d2u(r), r.shape).astype(float)
        return cls(domain, np.broadcast_to(u(r), r.shape).astype(float),
                   np.broadcast_to(du(r), r.shape).astype(float), second)

    def __mul__(self, c: float) -> "RadialFunction":
        return RadialFunction(self.domain, c * self.values, c * self.derivative, c * self.second)

    __rmul__ = __mul__

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def hessian_eigenvalues(self) -> np.ndarray:
        """Array (M+1, n): u'' followed by n-1 copies of u'/r (u''(0) at the origin)."""
        r = self.domain.r
        tangential = np.empty_like(r)
        tangential[1:] = self.derivative[1:] / r[1:]
        tangential[0] = self.second[0]
        n = self.domain.n
        return np.column_stack([self.second] + [tangential] * (n - 1))

    def s_k(self, k: int) -> np.ndarray:
        """S_k(D^2 u) at every mesh radius."""
        return sigma_all(self.hessian_eigenvalues())[:, k]

    def admissible(self, k: int) -> bool:
        """Hessian eigenvalues in Gamma_k at every radius r < R."""
        e = sigma_all(self.hessian_eigenvalues()[:-1])
        return bool(np.all(e[:, 1 : k + 1] > 0.0))


def _as_mesh_values(domain: RadialDomain, f) -> np.ndarray:
    if isinstance(f, RadialFunction):
        return f.values
    if callable(f):
        return np.broadcast_to(np.asarray(f(domain.r), dtype=float), domain.r.shape).copy()
    return np.broadcast_to(np.asarray(f, dtype=float), domain.r.shape).copy()


def solve_radial(domain: RadialDomain, k: int, f) -> RadialFunction:
    """Radial k-admissible solution of S_k(D^2 u) = f in B_R, u = 0 on the sphere.

    ``f`` is a nonnegative array on the mesh, a callable of r, or a constant.
    u' = [ k/C(n-1,k-1) r^(k-n) int_0^r s^(n-1) f ]^(1/k) and u = -int_r^R u',
    both by composite Simpson.  The second derivative is obtained by
    differentiating the first formula exactly.
    """
    n = domain.n
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside 1..{n}")
    fv = _as_mesh_values(domain, f)
    if np.any(fv < 0.0) or not np.all(np.isfinite(fv)):
        raise ValueError("right-hand side must be finite and nonnegative")
    r = domain.r
    c = k / comb(n - 1, k - 1)
    # the Simpson panel on [0, r_1] misjudges s^(n-1) f for large n; use the
    # exact integral of s^(n-1) times the linear interpolant of f there
    pieces = np.diff(cumulative_simpson(r ** (n - 1) * fv, x=r, initial=0.0))
    pieces[0] = r[1] ** n * (fv[0] / n + (fv[1] - fv[0]) / (n + 1))
    mass = np.maximum(np.concatenate([[0.0], np.cumsum(pieces)]), 0.0)
    q = np.zeros_like(r)
    q[1:] = c * r[1:] ** (k - n) * mass[1:]
    du = q ** (1.0 / k)

    d2u = np.zeros_like(r)
    d2u[0] = (fv[0] / comb(n, k)) ** (1.0 / k)
    pos = q[1:] > 0.0
    rr, qq, mm, ff = r[1:][pos], q[1:][pos], mass[1:][pos], fv[1:][pos]
    dq = c * ((k - n) * rr ** (k - n - 1) * mm + rr ** (k - 1) * ff)
    d2u[1:][pos] = qq ** (1.0 / k - 1.0) * dq / k

    U = cumulative_simpson(du, x=r, initial=0.0)
    u = U - U[-1]
    return RadialFunction(domain, u, du, d2u)


def radial_rayleigh_quotient(u: RadialFunction, k: int) -> float:
    """R_k(u) with the ball integrals done by Simpson in r."""
    num = u.domain.integrate(np.abs(u.values) * u.s_k(k))
    den = u.domain.integrate(np.abs(u.values) ** (k + 1))
    if den <= 0.0:
        raise ZeroDivisionError("Rayleigh quotient of the zero function")
    return num / den


def quadratic_bowl(domain: RadialDomain) -> RadialFunction:
    """(|x|^2 - R^2) / 2, whose Hessian is the identity."""
    r = domain.r
    return RadialFunction(domain, 0.5 * (r**2 - domain.R**2), r, np.ones_like(r))
