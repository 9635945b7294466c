"""Relative eigenvalues of the hyperbolic polynomials P_k = S_k and Garding's inequality.

For A in Gamma_k the polynomial t -> S_k(tA + X) factors as

    S_k(tA + X) = S_k(A) * prod_i (t + lam_i)

with real lam_i = lam_{k,i}(A, X).  Sign convention: lam_i(A, A) = 1 and,
for k = n, the lam_i are the eigenvalues of X A^{-1}.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .symfun import ConeError, as_symmetric, in_gamma_k, s_k, s_k_gradient, sigma_all, sigma_gradient

IMAG_RTOL = 1e-8
# roots split by rounding from an m-fold root sit within ~eps^(1/m) of each other
CLUSTER_RTOL = 1e-4


class HyperbolicityError(ArithmeticError):
    """Computed roots of S_k(tA + X) carry a non-negligible imaginary part."""


class EdgeConventionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RelativeSpectrum:
    k: int
    roots: np.ndarray  # lam_{k,i}(A, X), ascending
    imag_residual: float  # companion imaginary part, or the last Newton step after polishing

    def __iter__(self):
        return iter(self.roots)


@dataclass(frozen=True)
class GardingDefect:
    k: int
    arithmetic_side: float
    geometric_side: float
    quantitative_term: float

    @property
    def defect(self) -> float:
        """arithmetic - geometric - quantitative/k, nonnegative by Garding."""
        return self.arithmetic_side - self.geometric_side - self.quantitative_term / self.k


def directional_derivative(A, X, k: int) -> float:
    """p'_X(A) = d/dt S_k(A + tX) at t = 0 = sum_ij S_k^{ij}(A) X_ij."""
    A = as_symmetric(A)
    X = as_symmetric(X)
    return float(np.sum(s_k_gradient(A, k) * X))


def _project_real(z: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """Drop imaginary parts; average clusters that rounding split off the real axis."""
    imag = float(np.max(np.abs(z.imag), initial=0.0))
    z = z.copy()
    for i in np.argsort(-np.abs(z.imag)):
        if abs(z[i].imag) <= tol:
            break
        near = np.abs(z - z[i]) <= 2.5 * abs(z[i].imag) + tol
        z[near] = np.mean(z[near].real)
    return np.sort(z.real), imag


def relative_eigenvalues(A, X, k: int) -> RelativeSpectrum:
    """The k real numbers lam_{k,i}(A, X), sorted ascending.

    The coefficients of t -> S_k(tA + Y), with Y = X - m A centred on the mean
    m of the lam_i, are recovered from k+1 evaluations at Chebyshev nodes
    scaled by |Y|_F / |A|_F; the roots come from the companion matrix.
    """
    A = as_symmetric(A)
    X = as_symmetric(X)
    if A.shape != X.shape:
        raise ValueError("A and X must have the same shape")
    flag = in_gamma_k(A, k)
    if not flag.inside:
        raise ConeError(f"A is not in Gamma_{k} (margin {flag.margin:.3e})")
    sa = s_k(A, k)
    shift = directional_derivative(A, X, k) / (k * sa)
    Y = X - shift * A
    spread = float(np.linalg.norm(Y) / np.linalg.norm(A))
    if spread <= 1e-12 * max(1.0, abs(shift)):
        return RelativeSpectrum(k=k, roots=np.full(k, shift), imag_residual=0.0)

    j = np.arange(k + 1)
    nodes = np.cos((2 * j + 1) * np.pi / (2 * (k + 1)))
    mats = (spread * nodes)[:, None, None] * A + Y
    vals = np.asarray(s_k(mats, k)) / sa
    V = np.vander(nodes, k + 1, increasing=True)
    coef = np.linalg.solve(V, vals)
    # exact values: leading coefficient spread^k, next one zero after centring
    coef[k] = spread**k
    if k >= 1:
        coef[k - 1] = 0.0
    z = np.roots(coef[::-1] / spread**k) if k > 1 else np.array([-coef[0] / coef[1]], dtype=complex)
    zscale = max(1.0, float(np.max(np.abs(z), initial=0.0)))
    tol = IMAG_RTOL * zscale
    zr, imag = _project_real(np.asarray(z, dtype=complex), tol)
    lam = np.sort(shift - spread * zr)
    target = s_k(X, k) / sa
    if imag <= tol and _product_ok(lam, target):
        return RelativeSpectrum(k=k, roots=lam, imag_residual=imag * spread)
    # coefficient roots are unreliable when the lam_i spread over many scales;
    # polish them against direct evaluations of S_k(tA + X)
    polished, ok = _aberth(A, X, k, sa, lam)
    if ok:
        # real roots by construction; report the last Newton correction instead
        g, dg = _g_and_slope(A, X, k, -polished)
        return RelativeSpectrum(k=k, roots=polished, imag_residual=float(np.max(np.abs(g / dg))))
    if imag > CLUSTER_RTOL * zscale:
        raise HyperbolicityError(
            f"imaginary residual {imag * spread:.3e} and root refinement failed; loss of hyperbolicity"
        )
    return RelativeSpectrum(k=k, roots=lam, imag_residual=imag * spread)


def _product_ok(lam: np.ndarray, target: float, rtol: float = 1e-11) -> bool:
    scale = float(np.prod(np.abs(lam) + 1e-3 * np.mean(np.abs(lam)) + 1e-300))
    return abs(float(np.prod(lam)) - target) <= rtol * max(scale, abs(target))


def _g_and_slope(A: np.ndarray, X: np.ndarray, k: int, t: np.ndarray):
    """S_k(tA + X) and its t-derivative for a vector of real t (one batched eigh)."""
    w, Q = np.linalg.eigh(t[:, None, None] * A + X)
    g = sigma_all(w)[:, k]
    qaq = np.einsum("sji,jl,sli->si", Q, A, Q)
    return g, np.sum(sigma_gradient(w, k) * qaq, axis=1)


def _aberth(A, X, k: int, sa: float, lam0: np.ndarray, max_iter: int = 100):
    """Real Aberth-Ehrlich iteration for the roots t = -lam_i of S_k(tA + X)."""
    t = -np.asarray(lam0, dtype=float)
    width = max(float(np.ptp(t)), float(np.max(np.abs(t))), 1.0)
    # separate coincident starts so the repulsion term is defined
    order = np.argsort(t)
    t[order] += 1e-6 * width * np.arange(k)
    for _ in range(max_iter):
        g, dg = _g_and_slope(A, X, k, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            N = g / dg
            diff = t[:, None] - t[None, :]
            np.fill_diagonal(diff, np.inf)
            rep = np.sum(1.0 / diff, axis=1)
            step = N / (1.0 - N * rep)
        if not np.all(np.isfinite(step)):
            return np.sort(-t), False
        t = t - step
        if np.max(np.abs(step)) <= 4e-16 * width:
            break
    lam = np.sort(-t)
    return lam, _product_ok(lam, s_k(X, k) / sa, rtol=1e-9)


def garding_defect(A, X, k: int) -> GardingDefect:
    """Both sides of the quantitative Garding inequality for A, X in Gamma_k."""
    A = as_symmetric(A)
    X = as_symmetric(X)
    for name, M in (("A", A), ("X", X)):
        flag = in_gamma_k(M, k)
        if not flag.inside:
            raise ConeError(f"{name} is not in Gamma_{k}")
    pa = s_k(A, k)
    ratio = s_k(X, k) / pa
    geometric = ratio ** (1.0 / k)
    arithmetic = directional_derivative(A, X, k) / (k * pa)
    lam = relative_eigenvalues(A, X, k).roots
    quantitative = float(np.sum((np.sqrt(np.maximum(lam, 0.0)) - np.sqrt(geometric)) ** 2))
    return GardingDefect(k, arithmetic, geometric, quantitative)


def edge_distance(X, k: int) -> float:
    """Distance from X to the edge of P_k.

    For k >= 2 the edge is {0} and the distance is |X|_F.  For k = 1 the edge
    is the traceless hyperplane; |trace X| is returned and an
    EdgeConventionWarning is issued.
    """
    X = as_symmetric(X)
    n = X.shape[-1]
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside 1..{n}")
    if k == 1:
        warnings.warn("k=1: edge is the traceless hyperplane, returning |trace X|", EdgeConventionWarning)
        return float(abs(np.trace(X)))
    return float(np.linalg.norm(X))


def frobenius_from_identity_spectrum(lam, n: int, k: int) -> float:
    """|X|_F^2 recovered from lam_{k,i}(I, X) via sigma_1^2 - 2 sigma_2.

    Expanding P_k(tI + X) = sum_i C(n-i, k-i) t^(k-i) sigma_i(lam(X)) gives
    sigma_1, sigma_2 of lam(X) from the elementary symmetric functions of the
    relative eigenvalues.  Requires k >= 2.
    """
    if k < 2:
        raise ValueError("needs k >= 2")
    e = sigma_all(np.asarray(lam, dtype=float))
    top = comb(n, k)
    s1 = top * e[1] / comb(n - 1, k - 1)
    s2 = top * e[2] / comb(n - 2, k - 2)
    return float(s1 * s1 - 2.0 * s2)
