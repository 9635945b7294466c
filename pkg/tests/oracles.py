"""Independent reference values used by the test-suite."""
from __future__ import annotations

from math import comb

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import j0


def bessel_j0_root_squared(lo: float = 2.0, hi: float = 3.0, tol: float = 1e-14) -> float:
    """Square of the first zero of J_0, located by plain bisection."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if j0(lo) * j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return (0.5 * (lo + hi)) ** 2


def _shoot(lam: float, n: int, k: int, R: float) -> float:
    """u(R) for the radial eigen-ODE started at u(0) = -1, u'(0) = 0."""
    a = lam / comb(n, k) ** (1.0 / k)
    r0 = 1e-6 * R
    y0 = [-1.0 + 0.5 * a * r0**2, a * r0]

    def rhs(r, y):
        u, du = y
        t = du / r
        num = lam**k * abs(u) ** k - comb(n - 1, k) * t**k
        return [du, num / (comb(n - 1, k - 1) * t ** (k - 1))]

    hit_zero = lambda r, y: y[0]
    hit_zero.terminal, hit_zero.direction = True, 1
    sol = solve_ivp(rhs, (r0, R), y0, method="DOP853", rtol=1e-12, atol=1e-14, events=hit_zero)
    return 1.0 if sol.status == 1 else float(sol.y[0, -1])


def shooting_eigenvalue(n: int, k: int, R: float = 1.0, lo: float = 0.1, hi: float = 50.0) -> float:
    """Radial k-Hessian eigenvalue on B_R by bisection on the sign of u(R)."""
    assert _shoot(lo, n, k, R) < 0 < _shoot(hi, n, k, R)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _shoot(mid, n, k, R) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rho_star_grid_search(lam, k: int, points: int = 201, zooms: int = 6) -> float:
    """rho_k^* for n = 3 by zooming grid search over sphere directions in Gamma_k.

    Each direction d is scaled radially onto sigma_k = C(3,k); the objective
    is lam . mu / 3.
    """
    lam = np.asarray(lam, dtype=float)
    assert lam.size == 3
    c = comb(3, k)

    def objective(theta, phi):
        d = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], -1)
        e1 = d.sum(-1)
        e2 = d[..., 0] * d[..., 1] + d[..., 0] * d[..., 2] + d[..., 1] * d[..., 2]
        e3 = d.prod(-1)
        e = [e1, e2, e3]
        ok = np.all([ej > 0 for ej in e[:k]], axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = d @ lam * (c / e[k - 1]) ** (1.0 / k) / 3
        return np.where(ok, val, np.inf)

    t_lo, t_hi, p_lo, p_hi = 0.0, np.pi, 0.0, 2 * np.pi
    best = np.inf
    for _ in range(zooms):
        T, P = np.meshgrid(np.linspace(t_lo, t_hi, points), np.linspace(p_lo, p_hi, points), indexing="ij")
        vals = objective(T, P)
        i = np.unravel_index(np.argmin(vals), vals.shape)
        best = min(best, float(vals[i]))
        dt, dp = 4 * (t_hi - t_lo) / (points - 1), 4 * (p_hi - p_lo) / (points - 1)
        t_lo, t_hi = T[i] - dt, T[i] + dt
        p_lo, p_hi = P[i] - dp, P[i] + dp
    return best
