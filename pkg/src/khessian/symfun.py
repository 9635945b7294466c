"""Elementary symmetric functions of eigenvalues and the matrix functions S_k.

Matrices are plain ``numpy`` arrays of shape ``(..., n, n)``; most routines
broadcast over leading axes so that a whole grid of 2x2 Hessians can be
handled in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

MAX_DIM = 8


class ConeError(ValueError):
    """Raised when an argument is required to lie in a Garding cone and does not."""


def as_symmetric(A, *, atol: float = 1e-12) -> np.ndarray:
    """Validate a (batch of) symmetric matrices and return a float copy.

    The returned array is exactly symmetric: the upper triangle is mirrored
    into the lower one so that each off-diagonal pair has a single value.
    """
    A = np.array(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    n = A.shape[-1]
    if n < 1 or n > MAX_DIM:
        raise ValueError(f"matrix dimension {n} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    At = np.swapaxes(A, -1, -2)
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A - At), initial=0.0) > atol * scale:
        raise ValueError("matrix is not symmetric")
    iu = np.triu_indices(n, 1)
    A[..., iu[1], iu[0]] = A[..., iu[0], iu[1]]
    return A


def _check_k(k: int, n: int, lo: int = 0) -> int:
    k = int(k)
    if k < lo or k > n:
        raise ValueError(f"k={k} outside {lo}..{n}")
    return k


def sigma_all(lam) -> np.ndarray:
    """All elementary symmetric functions sigma_0..sigma_n of the last axis.

    Uses the product recurrence e_j <- e_j + x * e_{j-1}, which only adds
    terms of the expanded product and avoids the cancellation of the
    Newton-Girard power-sum identities.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = lam[..., i]
        for j in range(i + 1, 0, -1):
            e[..., j] = e[..., j] + x * e[..., j - 1]
    return e


def sigma(lam, k: int):
    """k-th elementary symmetric function sigma_k of the entries of ``lam``.

    ``lam`` may carry leading batch axes; sigma_0 is 1.
    """
    lam = np.asarray(lam, dtype=float)
    k = _check_k(k, lam.shape[-1])
    out = sigma_all(lam)[..., k]
    return float(out) if out.ndim == 0 else out


def sigma_deleted(lam, k: int, drop=()) -> np.ndarray:
    """sigma_k of ``lam`` with the entries in ``drop`` removed (last axis)."""
    lam = np.asarray(lam, dtype=float)
    keep = [i for i in range(lam.shape[-1]) if i not in set(drop)]
    if k < 0 or k > len(keep):
        return np.zeros(lam.shape[:-1])
    return sigma_all(lam[..., keep])[..., k]


@lru_cache(maxsize=64)
def _deletion_index(n: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays selecting lam with every r-subset removed, and the subsets."""
    subsets = np.array(list(combinations(range(n), r)), dtype=int).reshape(-1, r)
    keep = np.array([[i for i in range(n) if i not in sub] for sub in subsets], dtype=int)
    return keep.reshape(len(subsets), n - r), subsets


def sigma_gradient(lam, k: int) -> np.ndarray:
    """d sigma_k / d lam_i = sigma_{k-1}(lam | i), shape like ``lam``."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if k < 1:
        return np.zeros_like(lam)
    keep, _ = _deletion_index(n, 1)
    return sigma_all(lam[..., keep])[..., k - 1]


def sigma_hessian(lam, k: int) -> np.ndarray:
    """Second derivatives sigma_{k-2}(lam | i, j) off the diagonal, zero on it."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    H = np.zeros(lam.shape + (n,))
    if k < 2 or n < 2:
        return H
    keep, pairs = _deletion_index(n, 2)
    vals = sigma_all(lam[..., keep])[..., k - 2]
    H[..., pairs[:, 0], pairs[:, 1]] = vals
    H[..., pairs[:, 1], pairs[:, 0]] = vals
    return H


def eigenvalues(A) -> np.ndarray:
    """Ascending eigenvalues of symmetric matrices (LAPACK symmetric QR)."""
    return np.linalg.eigvalsh(np.asarray(A, dtype=float))


def _s_k_minors(A: np.ndarray, k: int):
    n = A.shape[-1]
    total = np.zeros(A.shape[:-2])
    for idx in combinations(range(n), k):
        sub = A[..., idx, :][..., :, idx]
        total = total + np.linalg.det(sub)
    return total


def s_k(A, k: int, method: str = "eig"):
    """S_k(A): sum of the k x k principal minors of a symmetric matrix.

    ``method="eig"`` evaluates sigma_k on the eigenvalues, ``method="minors"``
    sums determinants of principal submatrices. Both broadcast over leading
    axes. k = 0 returns 1.
    """
    A = np.asarray(A, dtype=float)
    k = _check_k(k, A.shape[-1])
    if method == "eig":
        out = sigma(eigenvalues(A), k)
    elif method == "minors":
        out = np.ones(A.shape[:-2]) if k == 0 else _s_k_minors(A, k)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def s_k_gradient(A, k: int) -> np.ndarray:
    """The matrix (S_k^{ij}(A)) of partial derivatives dS_k/dA_ij.

    Computed in the eigenbasis: if A = Q diag(lam) Q^T then the gradient is
    Q diag(sigma_{k-1}(lam | i)) Q^T.
    """
    A = np.asarray(A, dtype=float)
    k = _check_k(k, A.shape[-1], lo=1)
    lam, Q = np.linalg.eigh(A)
    g = sigma_gradient(lam, k)
    return np.einsum("...ij,...j,...kj->...ik", Q, g, Q)


def s_k_gradient_poly(A, k: int) -> np.ndarray:
    """Gradient of S_k from sum_j (-1)^j S_{k-1-j}(A) A^j (Cayley-Hamilton form).

    Independent of the eigen-decomposition; used as a cross-check.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    k = _check_k(k, n, lo=1)
    out = np.zeros_like(A)
    power = np.broadcast_to(np.eye(n), A.shape).copy()
    for j in range(k):
        coef = s_k(A, k - 1 - j, method="minors")
        out = out + (-1) ** j * np.asarray(coef)[..., None, None] * power
        power = power @ A
    return out


@dataclass(frozen=True)
class ConeFlag:
    k: int
    inside: bool
    margin: float


def in_gamma_k(A, k: int) -> ConeFlag:
    """Membership of lam(A) in the Garding cone Gamma_k (strict, zero tolerance)."""
    A = as_symmetric(A)
    n = A.shape[-1]
    k = _check_k(k, n, lo=1)
    e = sigma_all(eigenvalues(A))
    margin = float(np.min(e[1 : k + 1]))
    return ConeFlag(k=k, inside=margin > 0.0, margin=margin)


def in_gamma_k_vec(lam, k: int) -> np.ndarray:
    """Vectorised cone test on eigenvalue vectors (last axis)."""
    e = sigma_all(lam)
    return np.all(e[..., 1 : k + 1] > 0.0, axis=-1)


def maclaurin_ratio(lam, k: int) -> float:
    """(sigma_k/C(n,k))^(1/k) - (sigma_{k+1}/C(n,k+1))^(1/(k+1)); >= 0 on Gamma_{k+1}."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    k = _check_k(k, n - 1, lo=1)
    e = sigma_all(lam)
    if not np.all(e[1 : k + 2] > 0.0):
        raise ConeError(f"lambda is not in Gamma_{k + 1}")
    return float((e[k] / comb(n, k)) ** (1.0 / k) - (e[k + 1] / comb(n, k + 1)) ** (1.0 / (k + 1)))
