"""Dual Garding cone, the radius functional rho_k^*, and the classes V_k.

rho_k^*(lam) = inf { lam . mu / n : mu in Gamma_k, sigma_k(mu) >= C(n,k) }.

By homogeneity the infimum is taken on the level set sigma_k(mu) = C(n,k).
For k >= 2 the problem is convex in mu (sigma_k^(1/k) is concave on
Gamma_k), and we solve the equivalent barrier form

    min_mu  lam . mu - (1/k) log sigma_k(mu),   mu in Gamma_k

with damped Newton steps run in parallel from several starts.  A minimiser
is rescaled radially onto the level set.  If lam is outside Gamma_k^* the
barrier objective is unbounded below and the iterates reach lam . mu < 0,
which is a certificate of non-membership.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .symfun import (ConeError, as_symmetric, eigenvalues, in_gamma_k, in_gamma_k_vec, s_k, sigma_all, sigma_gradient,
                     sigma_hessian)

N_STARTS = 32
N_DIRECTIONS = 4096


class DualConeConvergenceError(RuntimeError):
    """No start converged: lam is on or extremely close to the boundary of Gamma_k^*."""


@dataclass(frozen=True)
class DualConeReport:
    k: int
    rho_star: float
    minimizer_mu: np.ndarray
    in_dual: bool
    in_V_k: bool


def c_nk(n: int, k: int) -> float:
    """Threshold (1/n) C(n,k)^(1/k) defining V_k."""
    return comb(n, k) ** (1.0 / k) / n


@lru_cache(maxsize=16)
def _sphere_directions(n: int, count: int = N_DIRECTIONS) -> np.ndarray:
    sampler = qmc.Sobol(d=n, scramble=True, seed=12345)
    u = sampler.random(count)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _starts(n: int, n_starts: int, rng: np.random.Generator) -> np.ndarray:
    pts = rng.dirichlet(np.full(n, 2.0), size=n_starts) * n
    return np.vstack([np.ones(n), pts])


def _barrier_newton(lam: np.ndarray, k: int, mu0: np.ndarray, max_iter: int = 200, tol: float = 1e-13):
    """Batched damped Newton for lam.mu - (1/k) log sigma_k(mu) on Gamma_k.

    Returns (mu, converged mask, negative-certificate flag).
    """
    mu = mu0.copy()
    S = mu.shape[0]
    active = np.ones(S, dtype=bool)
    converged = np.zeros(S, dtype=bool)
    certificate = False

    def value(m):
        e = sigma_all(m)
        ok = np.all(e[..., 1 : k + 1] > 0.0, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = m @ lam - np.log(np.where(ok, e[..., k], 1.0)) / k
        return np.where(ok, v, np.inf)

    f = value(mu)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        m = mu[idx]
        sk = sigma_all(m)[..., k]
        g = sigma_gradient(m, k)
        H = sigma_hessian(m, k)
        grad = lam - g / (k * sk[:, None])
        hess = -(H / sk[:, None, None] - g[:, :, None] * g[:, None, :] / sk[:, None, None] ** 2) / k
        try:
            step = -np.linalg.solve(hess, grad[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -grad
        dec = -np.einsum("si,si->s", grad, step)
        bad = ~(dec > 0)
        step[bad] = -grad[bad]
        dec[bad] = np.einsum("si,si->s", grad[bad], grad[bad])
        done = dec / 2 < tol
        converged[idx[done]] = True
        active[idx[done]] = False
        t = np.ones(idx.size)
        fm = f[idx]
        accepted = np.zeros(idx.size, dtype=bool)
        for _ls in range(60):
            trial = m + t[:, None] * step
            ft = value(trial)
            ok = (ft <= fm - 0.25 * t * dec) & ~accepted & ~done
            mu[idx[ok]] = trial[ok]
            f[idx[ok]] = ft[ok]
            accepted |= ok
            if np.all(accepted | done):
                break
            t = np.where(accepted, t, t / 2)
        stuck = ~accepted & ~done
        active[idx[stuck]] = False
        if np.any(mu[idx] @ lam < 0.0):
            certificate = True
            break
        # unbounded descent: iterates escaping to infinity
        if np.any(np.linalg.norm(mu[idx], axis=1) > 1e12):
            certificate = True
            break
    return mu, converged, certificate


def _rho_vec(lam: np.ndarray, k: int, n_starts: int, seed: int):
    n = lam.size
    c = comb(n, k)
    if k == 1:
        t = lam.mean()
        parallel = np.linalg.norm(lam - t) <= 1e-12 * max(1.0, np.abs(lam).max())
        if parallel and t >= 0:
            return float(t), np.ones(n), True
        return -np.inf, np.ones(n), False

    dirs = _sphere_directions(n)
    inside = in_gamma_k_vec(dirs, k)
    if np.any(dirs[inside] @ lam < 0.0):
        worst = dirs[inside][np.argmin(dirs[inside] @ lam)]
        return -np.inf, worst, False

    rng = np.random.default_rng(seed)
    mu, conv, certificate = _barrier_newton(lam, k, _starts(n, n_starts, rng))
    if certificate:
        return -np.inf, mu[np.argmin(mu @ lam)], False
    if not np.any(conv):
        raise DualConeConvergenceError("rho_star: no start converged")
    mu = mu[conv]
    sk = sigma_all(mu)[..., k]
    mu = mu * (c / sk[:, None]) ** (1.0 / k)
    vals = mu @ lam / n
    best = int(np.argmin(vals))
    return float(vals[best]), mu[best], True


def rho_star_vec(lam, k: int, n_starts: int = N_STARTS, seed: int = 0) -> tuple[float, np.ndarray, bool]:
    """rho_k^* of an eigenvalue vector: (value, minimiser on the level set, in_dual)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside 1..{n}")
    return _rho_vec(lam, k, n_starts, seed)


def rho_star(A, k: int, n_starts: int = N_STARTS, seed: int = 0) -> DualConeReport:
    """rho_k^*(A) with its minimiser and the Gamma_k^* / V_k classification."""
    A = as_symmetric(A)
    n = A.shape[-1]
    lam = eigenvalues(A)
    value, mu, in_dual = rho_star_vec(lam, k, n_starts, seed)
    in_vk = bool(in_dual and lam[0] > 0.0 and value >= c_nk(n, k))
    return DualConeReport(k=k, rho_star=value, minimizer_mu=mu, in_dual=in_dual, in_V_k=in_vk)


def in_V_k(A, k: int, **kwargs) -> bool:
    """A positive definite, in Gamma_k^*, and rho_k^*(A) >= (1/n) C(n,k)^(1/k)."""
    return rho_star(A, k, **kwargs).in_V_k


def kuo_trudinger_gap(A, B, k: int, **kwargs) -> float:
    """(1/n) C(n,k)^(1/k) trace(AB) - S_k(B)^(1/k) rho_k^*(A); nonnegative."""
    A = as_symmetric(A)
    B = as_symmetric(B)
    n = A.shape[-1]
    if not in_gamma_k(B, k).inside:
        raise ConeError(f"B is not in Gamma_{k}")
    rep = rho_star(A, k, **kwargs)
    if not rep.in_dual:
        raise ConeError(f"A is not in the dual cone Gamma_{k}^*")
    return float(c_nk(n, k) * np.trace(A @ B) - s_k(B, k) ** (1.0 / k) * rep.rho_star)
