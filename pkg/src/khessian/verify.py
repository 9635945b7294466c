"""Seeded invariant suites across all modules, used by ``khessian --mode verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import divfree, dualcone, hyperpoly, symfun
from .pde import Grid2D, GridFunction, RadialDomain, solve_grid, solve_radial
from .scheme import SchemeConfig, run_scheme
from .spectral import CoefficientField, linear_first_eigenvalue


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<32s} {self.detail}"


# -- random samplers shared with the test-suite ----------------------------------------------

def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def random_cone_vector(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalue vector in Gamma_k by rejection from shifted normals."""
    while True:
        lam = rng.normal(size=n) + rng.uniform(0.0, 2.0)
        if symfun.in_gamma_k_vec(lam, k):
            return lam


def random_cone_matrix(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    Q = random_orthogonal(n, rng)
    return (Q * random_cone_vector(n, k, rng)) @ Q.T


def random_dual_matrix(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """A matrix in Gamma_k^*: the gradient of sigma_k at a point of Gamma_k, rotated.

    For k = 1 the dual cone is the ray of positive multiples of I.
    """
    if k == 1:
        return np.eye(n) * rng.uniform(0.5, 2.0)
    Q = random_orthogonal(n, rng)
    return (Q * symfun.sigma_gradient(random_cone_vector(n, k, rng), k)) @ Q.T


def random_spd(n: int, rng: np.random.Generator) -> np.ndarray:
    Q = random_orthogonal(n, rng)
    return (Q * rng.uniform(0.2, 3.0, size=n)) @ Q.T


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    B = rng.normal(size=(n, n))
    return (B + B.T) / 2


# -- suites ---------------------------------------------------------------------------------

def check_symfun(rng, samples: int = 200) -> list[CheckResult]:
    err_minor = err_grad = 0.0
    for _ in range(samples):
        n = int(rng.integers(1, 7))
        A = random_symmetric(n, rng)
        k = int(rng.integers(1, n + 1))
        scale = max(1.0, np.linalg.norm(A)) ** k
        err_minor = max(err_minor, abs(symfun.s_k(A, k) - symfun.s_k(A, k, "minors")) / scale)
        g1, g2 = symfun.s_k_gradient(A, k), symfun.s_k_gradient_poly(A, k)
        err_grad = max(err_grad, np.max(np.abs(g1 - g2)) / scale)
    worst_mac = np.inf
    for _ in range(samples):
        n = int(rng.integers(2, 7))
        lam = random_cone_vector(n, n, rng)
        worst_mac = min(worst_mac, min(symfun.maclaurin_ratio(lam, k) for k in range(1, n)))
    return [
        CheckResult("symfun.eig_vs_minors", err_minor < 1e-9, f"max rel err {err_minor:.2e}"),
        CheckResult("symfun.gradient_forms", err_grad < 1e-9, f"max rel err {err_grad:.2e}"),
        CheckResult("symfun.maclaurin", worst_mac >= -1e-12, f"min gap {worst_mac:.2e}"),
    ]


def check_hyperpoly(rng, samples: int = 300) -> list[CheckResult]:
    prod = summ = shift = 0.0
    qgar = np.inf
    for _ in range(samples):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, n + 1))
        A, X = random_cone_matrix(n, k, rng), random_cone_matrix(n, k, rng)
        lam = hyperpoly.relative_eigenvalues(A, X, k).roots
        sa = symfun.s_k(A, k)
        scale = 1.0 + np.max(np.abs(lam))
        prod = max(prod, abs(np.prod(lam) - symfun.s_k(X, k) / sa) / scale**k)
        summ = max(summ, abs(lam.sum() - hyperpoly.directional_derivative(A, X, k) / sa) / (k * scale))
        s = rng.normal()
        lam_s = hyperpoly.relative_eigenvalues(A, X + s * A, k).roots
        shift = max(shift, np.max(np.abs(lam_s - lam - s)) / (scale + abs(s)))
        d = hyperpoly.garding_defect(A, X, k)
        qgar = min(qgar, d.defect / (1.0 + d.arithmetic_side))
    return [
        CheckResult("hyperpoly.product", prod < 1e-9, f"max rel err {prod:.2e}"),
        CheckResult("hyperpoly.sum", summ < 1e-9, f"max rel err {summ:.2e}"),
        CheckResult("hyperpoly.shift", shift < 1e-9, f"max rel err {shift:.2e}"),
        CheckResult("hyperpoly.garding", qgar >= -1e-12, f"min defect {qgar:.2e}"),
    ]


def check_dualcone(rng, samples: int = 40) -> list[CheckResult]:
    geo = ident = 0.0
    nest_fail = 0
    kt = np.inf
    for n in range(2, 6):
        ident = max(ident, max(abs(dualcone.rho_star(np.eye(n), k).rho_star - 1.0) for k in range(1, n + 1)))
    for _ in range(samples):
        n = int(rng.integers(2, 6))
        lam = rng.uniform(0.2, 3.0, size=n)
        geo = max(geo, abs(dualcone.rho_star_vec(lam, n)[0] - np.prod(lam) ** (1.0 / n)))
        A = random_spd(n, rng)
        flags = [dualcone.in_V_k(A, k) for k in range(1, n + 1)]
        nest_fail += sum(1 for a, b in zip(flags, flags[1:]) if a and not b)
        k = int(rng.integers(1, n + 1))
        B = random_cone_matrix(n, k, rng)
        A = random_dual_matrix(n, k, rng)
        kt = min(kt, dualcone.kuo_trudinger_gap(A, B, k) / (1.0 + np.linalg.norm(A) * np.linalg.norm(B)))
    return [
        CheckResult("dualcone.k_equals_n", geo < 1e-6, f"max err {geo:.2e}"),
        CheckResult("dualcone.identity", ident < 1e-6, f"max err {ident:.2e}"),
        CheckResult("dualcone.V_k_nesting", nest_fail == 0, f"{nest_fail} violations"),
        CheckResult("dualcone.kuo_trudinger", kt >= -1e-9, f"min gap {kt:.2e}"),
    ]


def check_divfree(rng, samples: int = 50) -> list[CheckResult]:
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 4))
        u = divfree.CubicField.random(n, rng)
        x = rng.normal(size=n)
        scale = 1.0 + np.max(np.abs(u.hessian(x))) ** (n - 1) * (1.0 + np.max(np.abs(u.T)))
        for k in range(1, n + 1):
            for i in range(n):
                worst = max(worst, abs(divfree.divergence_defect(u, "S_k", i, k, x)) / scale)
    u = divfree.CubicField.from_monomials(3, {(3, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): 1})
    m2 = divfree.divergence_defect(u, "M2", 0)
    return [
        CheckResult("divfree.S_k_rows", worst < 1e-6, f"max defect {worst:.2e}"),
        CheckResult("divfree.M2_example", abs(m2 - 48.0) < 1e-4, f"value {m2:.8f}"),
    ]


def check_pde(rng) -> list[CheckResult]:
    n = int(rng.integers(2, 5))
    k = int(rng.integers(1, n + 1))
    dom = RadialDomain(n, 1.0, 256)
    f = 1.0 + 0.5 * np.cos(3 * dom.r)
    u = solve_radial(dom, k, f)
    rad = float(np.max(np.abs(u.s_k(k) - f)))
    g = Grid2D("disk", 1.0, 1.0 / 32)
    q = GridFunction.from_callable(g, lambda x, y: 0.5 * (x**2 + y**2 - 1.0))
    v = solve_grid(g, 2, 1.0)
    grid = float(np.max(np.abs(v.values - q.values)))
    return [
        CheckResult("pde.radial_solve", rad < 1e-8, f"(n,k)=({n},{k}) max residual {rad:.2e}"),
        CheckResult("pde.grid_quadratic", grid < 1e-9, f"max error {grid:.2e}"),
    ]


def check_scheme(rng) -> list[CheckResult]:
    n, k = [(3, 2), (3, 3), (4, 2)][int(rng.integers(0, 3))]
    trace, report = run_scheme(SchemeConfig(k=k, domain=RadialDomain(n, 1.0, 512)))
    roots = trace.column("Rk_root")
    rise = float(np.max(np.diff(roots[1:]), initial=-np.inf))
    slack = float(np.min(trace.column("monok_slack")[1:]))
    return [
        CheckResult("scheme.monotone", rise <= 1e-8, f"(n,k)=({n},{k}) max rise {rise:.2e}"),
        CheckResult("scheme.converged", report.stop_reason == "converged",
                    f"{report.iterations} iterations, lambda {report.lambda_estimate:.6f}"),
        CheckResult("scheme.monok_slack", slack >= -1e-8, f"min slack {slack:.2e}"),
    ]


def check_spectral(rng) -> list[CheckResult]:
    g = Grid2D("disk", 1.0, 1.0 / 32)
    c = float(rng.uniform(0.5, 2.0))
    lam1 = linear_first_eigenvalue(CoefficientField.constant(g, np.eye(2))).lambda1
    lamc = linear_first_eigenvalue(CoefficientField.constant(g, c * np.eye(2))).lambda1
    j2 = 5.783185962946784
    return [
        CheckResult("spectral.laplacian_disk", abs(lam1 / j2 - 1) < 1e-3, f"lambda1 {lam1:.6f}"),
        CheckResult("spectral.linear_scaling", abs(lamc / (c * lam1) - 1) < 1e-9, f"c={c:.3f}"),
    ]


SUITES = {
    "symfun": check_symfun,
    "hyperpoly": check_hyperpoly,
    "dualcone": check_dualcone,
    "divfree": check_divfree,
    "pde": check_pde,
    "scheme": check_scheme,
    "spectral": check_spectral,
}


def run_all(seed: int) -> list[CheckResult]:
    """Each suite is a shard seeded independently by (seed, shard index)."""
    results = []
    for shard, (name, suite) in enumerate(SUITES.items()):
        rng = np.random.default_rng([seed, shard])
        try:
            results.extend(suite(rng))
        except Exception as exc:  # a crash is a failed check, reported rather than raised
            results.append(CheckResult(f"{name}.crashed", False, f"{type(exc).__name__}: {exc}"))
    return results
