"""Dirichlet solvers for S_k(D^2 u) = f: exact radial reduction and 2-D finite differences."""
from __future__ import annotations

from .grid import Grid2D, GridFunction, NewtonInfo, SolverError, grid_rayleigh_quotient, solve_grid
from .radial import RadialDomain, RadialFunction, radial_rayleigh_quotient, solve_radial
from .radial import quadratic_bowl as _radial_bowl


def quadratic_bowl(domain):
    """(|x|^2 - R^2) / 2 on a ball or disk: zero on the boundary, Hessian the identity."""
    if isinstance(domain, RadialDomain):
        return _radial_bowl(domain)
    if isinstance(domain, Grid2D) and domain.shape == "disk":
        R = domain.size
        return GridFunction.from_callable(domain, lambda x, y: 0.5 * (x * x + y * y - R * R))
    raise ValueError("the quadratic bowl needs a ball or disk domain")


def rayleigh_quotient(u, k: int) -> float:
    """R_k(u) = int |u| S_k(D^2 u) / int |u|^(k+1) for a radial or grid field."""
    if isinstance(u, RadialFunction):
        return radial_rayleigh_quotient(u, k)
    if isinstance(u, GridFunction):
        return grid_rayleigh_quotient(u, k)
    raise TypeError(f"unsupported field type {type(u).__name__}")


__all__ = [
    "Grid2D", "GridFunction", "NewtonInfo", "RadialDomain", "RadialFunction", "SolverError",
    "quadratic_bowl", "rayleigh_quotient", "solve_grid", "solve_radial",
]
