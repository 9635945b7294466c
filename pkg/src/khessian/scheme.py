"""Non-degenerate inverse iteration for the k-Hessian eigenvalue, plus its diagnostics.

    S_k(D^2 u_{m+1}) = R_k(u_m) |u_m|^k + a_m  in Omega,  u_{m+1} = 0 on the boundary,

with a summable positive sequence a_m (default (m+1)^-2).  R_k(u_m)^(1/k)
decreases to the eigenvalue lambda(k; Omega).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from math import isfinite
from typing import Callable, Union

import numpy as np

from .hyperpoly import relative_eigenvalues
from .pde import Grid2D, GridFunction, RadialDomain, RadialFunction, rayleigh_quotient, solve_grid, solve_radial
from .pde.radial import quadratic_bowl

log = logging.getLogger(__name__)

Field = Union[GridFunction, RadialFunction]
Domain = Union[Grid2D, RadialDomain]

CSV_HEADER = "m,R_k,Rk_root,norm_k1,pair_integral,monok_slack,nibp_res,seconds"


class SchemeError(RuntimeError):
    pass


class AdmissibilityError(ValueError):
    pass


# -- field helpers -----------------------------------------------------------------------

def _values(u: Field) -> np.ndarray:
    """Values at the quadrature nodes (interior nodes for grids, all radii for balls)."""
    return u.interior if isinstance(u, GridFunction) else u.values


def _domain(u: Field) -> Domain:
    return u.grid if isinstance(u, GridFunction) else u.domain


def _integrate(u: Field, g) -> float:
    return _domain(u).integrate(g)


def _interior_mask(u: Field) -> np.ndarray:
    if isinstance(u, GridFunction):
        return np.ones(u.grid.n_interior, dtype=bool)
    mask = np.ones(u.domain.M + 1, dtype=bool)
    mask[-1] = False
    return mask


def _dimension(domain: Domain) -> int:
    return 2 if isinstance(domain, Grid2D) else domain.n


def _s_k_checked(u: Field, k: int, name: str) -> np.ndarray:
    if isinstance(u, RadialFunction):
        ok = u.admissible(k)
    else:
        ok = u.admissible(k)
    if not ok:
        raise AdmissibilityError(f"{name} is not {k}-admissible at some interior node")
    s = u.s_k(k)
    s = s.copy()
    s[~_interior_mask(u)] = np.maximum(s[~_interior_mask(u)], 0.0)
    return s


def lp_norm(u: Field, p: float) -> float:
    return _integrate(u, np.abs(_values(u)) ** p) ** (1.0 / p)


def solve(domain: Domain, k: int, f, warm_start=None) -> Field:
    if isinstance(domain, RadialDomain):
        return solve_radial(domain, k, f)
    return solve_grid(domain, k, f, warm_start=warm_start)


# -- a_m rules ------------------------------------------------------------------------

def make_am_rule(rule, k: int, n: int) -> Callable[[int], float]:
    """Resolve an a_m rule: 'inverse-square', 'zero', 'power:p' (p > 1), 'geometric:q' (0<q<1), or a callable."""
    if callable(rule):
        return rule
    name, _, arg = str(rule).partition(":")
    if name == "inverse-square":
        return lambda m: (m + 1.0) ** -2
    if name == "zero":
        if k != n:
            raise ValueError("a_m = 0 is only allowed when k = n")
        return lambda m: 0.0
    if name == "power":
        p = float(arg)
        if p <= 1:
            raise ValueError("power rule needs exponent > 1 for summability")
        return lambda m: (m + 1.0) ** -p
    if name == "geometric":
        q = float(arg)
        if not 0 < q < 1:
            raise ValueError("geometric rule needs ratio in (0, 1)")
        return lambda m: q**m
    raise ValueError(f"unknown a_m rule {rule!r}")


# -- configuration and records -------------------------------------------------------------

@dataclass
class SchemeConfig:
    k: int
    domain: Domain
    u0: Field | None = None
    max_iter: int = 200
    stop_tol: float = 1e-6
    am_rule: object = "inverse-square"
    w_ref: Field | None = None
    patience: int = 3
    record_nibp: bool = True
    record_time: bool = False

    def __post_init__(self):
        n = _dimension(self.domain)
        if not 1 <= self.k <= n:
            raise ValueError(f"k={self.k} outside 1..{n}")
        if isinstance(self.domain, Grid2D) and self.k not in (1, 2):
            raise ValueError("grid mode supports k in {1, 2}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        self.am = make_am_rule(self.am_rule, self.k, n)


@dataclass
class TraceRow:
    m: int
    R_k: float
    Rk_root: float
    norm_k1: float
    pair_integral: float = float("nan")
    monok_slack: float = float("nan")
    nibp_res: float = float("nan")
    seconds: float = 0.0

    def csv(self) -> str:
        vals = [self.R_k, self.Rk_root, self.norm_k1, self.pair_integral, self.monok_slack, self.nibp_res, self.seconds]
        return ",".join([str(self.m)] + [f"{v:.17g}" for v in vals])


@dataclass
class IterationTrace:
    k: int
    rows: list[TraceRow] = field(default_factory=list)
    iterates: list[Field] = field(default_factory=list)
    a_m: list[float] = field(default_factory=list)
    max_overshoot: float = 0.0

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv() for r in self.rows]) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


@dataclass
class EigenReport:
    k: int
    lambda_estimate: float
    eigenfunction: Field
    iterations: int
    stop_reason: str
    rate_bound: np.ndarray
    rate_gap: np.ndarray
    domain: str
    self_referential: bool = True
    outside_theory: bool = False
    dropped_volume: float = 0.0
    max_overshoot: float = 0.0
    seconds: float = 0.0

    def to_text(self) -> str:
        items = {
            "k": self.k,
            "domain": self.domain,
            "lambda_estimate": f"{self.lambda_estimate:.17g}",
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "self_referential_w": str(self.self_referential).lower(),
            "outside_theory": str(self.outside_theory).lower(),
            "dropped_volume": f"{self.dropped_volume:.6g}",
            "max_overshoot": f"{self.max_overshoot:.6g}",
            "rate_bound_violation": f"{float(np.max(self.rate_gap - self.rate_bound, initial=-np.inf)):.6g}",
        }
        return "".join(f"{key}={val}\n" for key, val in items.items())


# -- the scheme ------------------------------------------------------------------------

def default_start(domain: Domain, k: int) -> Field:
    """Solution of S_k(D^2 u0) = 1 with zero boundary data."""
    return solve(domain, k, 1.0)


def run_scheme(config: SchemeConfig) -> tuple[IterationTrace, EigenReport]:
    """Iterate the scheme until R_k^(1/k) settles or ``max_iter`` steps are taken."""
    k, domain = config.k, config.domain
    t_start = time.perf_counter()
    u = config.u0 if config.u0 is not None else default_start(domain, k)
    if not u.admissible(k):
        raise AdmissibilityError("u0 must be k-admissible")
    if np.any(_values(u)[_interior_mask(u)] > 0.0) and np.max(_values(u)) > 1e-12 * u.sup_norm:
        raise AdmissibilityError("u0 must be nonpositive")
    vol_term = _domain(u).discrete_volume ** (k / (k + 1.0))

    trace = IterationTrace(k=k)
    R = rayleigh_quotient(u, k)
    norm = lp_norm(u, k + 1)
    trace.rows.append(TraceRow(0, R, R ** (1.0 / k), norm))
    trace.iterates.append(u)
    stop_reason, calm = "max_iter", 0
    for m in range(config.max_iter):
        a = float(config.am(m))
        if a < 0 or not isfinite(a):
            raise ValueError(f"a_{m} = {a} is not a nonnegative number")
        vals = _values(u)
        overshoot = float(np.max(vals, initial=0.0))
        if overshoot > 0.0:
            trace.max_overshoot = max(trace.max_overshoot, overshoot)
            log.debug("clamping positive overshoot %.3e at step %d", overshoot, m)
        rhs = R * np.maximum(-vals, 0.0) ** k + a
        t0 = time.perf_counter()
        try:
            u_next = solve(domain, k, rhs, warm_start=u)
        except Exception as exc:
            raise SchemeError(f"inner solve failed at step {m}: {exc}") from exc
        R_next = rayleigh_quotient(u_next, k)
        if not isfinite(R_next) or R_next <= 0.0 or R_next > 1e12 * trace.rows[0].R_k:
            raise SchemeError(f"Rayleigh quotient blew up at step {m + 1}: {R_next}")
        norm_next = lp_norm(u_next, k + 1)
        row = TraceRow(m + 1, R_next, R_next ** (1.0 / k), norm_next)
        row.monok_slack = R * norm**k + vol_term * a - R_next * norm_next**k
        if config.record_nibp:
            row.nibp_res = nibp_residual(u_next, u, k)
        if config.w_ref is not None:
            row.pair_integral = pair_integral(u_next, config.w_ref, k)
        if config.record_time:
            row.seconds = time.perf_counter() - t0
        trace.rows.append(row)
        trace.iterates.append(u_next)
        trace.a_m.append(a)
        calm = calm + 1 if abs(row.Rk_root - trace.rows[-2].Rk_root) < config.stop_tol else 0
        u, R, norm = u_next, R_next, norm_next
        if calm >= config.patience:
            stop_reason = "converged"
            break

    lam = R ** (1.0 / k)
    w = u * (1.0 / u.sup_norm)
    self_ref = config.w_ref is None
    w_ref = w if self_ref else config.w_ref
    pairs = np.array([pair_integral(v, w_ref, k) for v in trace.iterates])
    if self_ref:
        for row, p in zip(trace.rows, pairs):
            row.pair_integral = p
    # rate bound: R_k^(1/k)(u_m) - lambda <= lambda (P_{m+1} - P_m) / P_1, m >= 1
    roots = trace.column("Rk_root")
    if len(pairs) > 2:
        bound = lam * (pairs[2:] - pairs[1:-1]) / pairs[1]
        gap = roots[1:-1] - lam
    else:
        bound = gap = np.zeros(0)
    d = _domain(u)
    report = EigenReport(
        k=k,
        lambda_estimate=lam,
        eigenfunction=w,
        iterations=len(trace.rows) - 1,
        stop_reason=stop_reason,
        rate_bound=bound,
        rate_gap=gap,
        domain=d.describe(),
        self_referential=self_ref,
        outside_theory=bool(getattr(d, "outside_theory", False) and k >= 2),
        dropped_volume=float(getattr(d, "dropped_volume", 0.0)),
        max_overshoot=trace.max_overshoot,
        seconds=time.perf_counter() - t_start,
    )
    return trace, report


def pair_integral(u: Field, w: Field, k: int) -> float:
    """int |u| |w|^k."""
    return _integrate(u, np.abs(_values(u)) * np.abs(_values(w)) ** k)


# -- integration-by-parts inequalities ---------------------------------------------------------

def _pair(u: Field, v: Field, k: int):
    if type(u) is not type(v) or _domain(u) is not _domain(v) and _domain(u) != _domain(v):
        raise ValueError("fields must live on the same domain")
    return _s_k_checked(u, k, "u"), _s_k_checked(v, k, "v"), np.abs(_values(u)), np.abs(_values(v))


def power_nibp_residual(u: Field, v: Field, k: int, l: int = 1) -> float:
    """int |v| S_k(u)^l - int |u| S_k(u)^((kl-1)/k) S_k(v)^(1/k); nonnegative."""
    if l < 1:
        raise ValueError("l must be a positive integer")
    su, sv, au, av = _pair(u, v, k)
    lhs = _integrate(u, av * su**l)
    rhs = _integrate(u, au * su ** ((k * l - 1.0) / k) * sv ** (1.0 / k))
    return lhs - rhs


def nibp_residual(u: Field, v: Field, k: int) -> float:
    """int |v| S_k(u) - int |u| S_k(u)^((k-1)/k) S_k(v)^(1/k); nonnegative."""
    return power_nibp_residual(u, v, k, 1)


def schwarz_residual(u: Field, v: Field, k: int, l: int = 1) -> float:
    """(int |u| S_k(u)^l)^(kl/(kl+1)) (int |v| S_k(v)^l)^(1/(kl+1)) - int |v| S_k(u)^l."""
    if l < 1:
        raise ValueError("l must be a positive integer")
    su, sv, au, av = _pair(u, v, k)
    kl = k * l
    uu = _integrate(u, au * su**l)
    vv = _integrate(u, av * sv**l)
    vu = _integrate(u, av * su**l)
    return uu ** (kl / (kl + 1.0)) * vv ** (1.0 / (kl + 1.0)) - vu


def reverse_aleksandrov_residual(u: Field, w_ref: Field, lam: float) -> float:
    """lam int |u| |w|^n - int (det D^2 u)^(1/n) |w|^n for convex u (k = n)."""
    n = _dimension(_domain(u))
    su = _s_k_checked(u, n, "u")
    aw = np.abs(_values(w_ref)) ** n
    return lam * _integrate(u, np.abs(_values(u)) * aw) - _integrate(u, su ** (1.0 / n) * aw)


# -- W^{2,1} diagnostic --------------------------------------------------------------------------

def _hessians(u: Field) -> np.ndarray:
    if isinstance(u, GridFunction):
        a, c, b = u.hessian()
        return np.stack([np.stack([a, c], -1), np.stack([c, b], -1)], -2)
    eig = u.hessian_eigenvalues()
    return np.einsum("...i,ij->...ij", eig, np.eye(eig.shape[-1]))


def _subset_mask(domain: Domain, subset) -> np.ndarray:
    if isinstance(domain, Grid2D):
        x, y = domain.xy
        dist = domain.boundary_distance()
        if callable(subset):
            mask = np.asarray(subset(x, y), dtype=bool)
        else:
            mask = np.hypot(x, y) <= float(subset)
        margin = 4 * domain.h
    else:
        r = domain.r
        dist = domain.R - r
        mask = subset(r) if callable(subset) else r <= float(subset)
        margin = 4 * domain.dr
    if not np.any(mask):
        raise ValueError("compact subset contains no nodes")
    if np.min(dist[mask]) < margin:
        raise ValueError("compact subset must stay at least 4 mesh widths from the boundary")
    return mask


def w21_diagnostic(w_ref: Field, u_next: Field, u_limit: Field, k: int, compact_subset) -> float:
    """sum_i int_K | lam_{k,i}(D^2 w, D^2 u_next) - |u_limit|/|w| | dx over a compact K.

    ``compact_subset`` is a radius (ball/disk about the origin) or a mask
    callable on node coordinates.
    """
    if k < 2:
        raise ValueError("the diagnostic needs k >= 2")
    domain = _domain(w_ref)
    mask = _subset_mask(domain, compact_subset)
    HW, HU = _hessians(w_ref)[mask], _hessians(u_next)[mask]
    ratio = np.abs(_values(u_limit)[mask]) / np.abs(_values(w_ref)[mask])
    weights = (domain.weights)[mask]
    total = 0.0
    for A, X, rho, wt in zip(HW, HU, ratio, weights):
        try:
            lam = relative_eigenvalues(A, X, k).roots
        except ValueError as exc:
            raise AdmissibilityError(f"w_ref Hessian not in Gamma_{k}: {exc}") from exc
        total += wt * float(np.sum(np.abs(lam - rho)))
    return total


__all__ = [
    "AdmissibilityError", "EigenReport", "IterationTrace", "SchemeConfig", "SchemeError", "TraceRow",
    "default_start", "make_am_rule", "nibp_residual", "pair_integral", "power_nibp_residual",
    "quadratic_bowl", "reverse_aleksandrov_residual", "run_scheme", "schwarz_residual", "w21_diagnostic",
]
