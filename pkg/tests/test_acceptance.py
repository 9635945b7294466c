"""Acceptance criteria, one test each, each printing a single PASS/FAIL line."""
import time

import numpy as np
import pytest

from golden_runs import W21_STEPS, load, w21_values
from khessian import divfree, dualcone, hyperpoly, symfun
from khessian.pde import Grid2D, RadialDomain, quadratic_bowl, solve_radial
from khessian.scheme import (SchemeConfig, nibp_residual, pair_integral, power_nibp_residual,
                             reverse_aleksandrov_residual, run_scheme, schwarz_residual)
from khessian.spectral import linear_first_eigenvalue, optimal_field, random_v_k_field
from khessian.verify import random_cone_matrix, random_dual_matrix, random_spd
from oracles import bessel_j0_root_squared, shooting_eigenvalue


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line past pytest's capture, then assert."""
    def report(name, passed, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        assert passed, detail
    return report


def test_ac1_laplace_cross_check(verdict, disk64):
    t0 = time.perf_counter()
    _, disk = run_scheme(SchemeConfig(k=1, domain=disk64))
    t_disk = time.perf_counter() - t0
    t0 = time.perf_counter()
    _, square = run_scheme(SchemeConfig(k=1, domain=Grid2D("square", 1.0, 1 / 64)))
    t_square = time.perf_counter() - t0
    j2, pi2 = bessel_j0_root_squared(), 2 * np.pi**2
    e_disk = abs(disk.lambda_estimate / j2 - 1)
    e_square = abs(square.lambda_estimate / pi2 - 1)
    ok = e_disk < 0.01 and e_square < 0.01 and t_disk < 30 and t_square < 30
    verdict("AC1 Laplace cross-check", ok,
            f"disk {disk.lambda_estimate:.6f} vs {j2:.6f} (rel {e_disk:.1e}, {t_disk:.1f}s); "
            f"square {square.lambda_estimate:.5f} vs {pi2:.5f} (rel {e_square:.1e}, {t_square:.1f}s)")


def test_ac2_monge_ampere_cross_check(verdict, disk64):
    t0 = time.perf_counter()
    _, radial = run_scheme(SchemeConfig(k=2, domain=RadialDomain(2, 1.0, 1024)))
    _, grid = run_scheme(SchemeConfig(k=2, domain=disk64))
    elapsed = time.perf_counter() - t0
    shoot = shooting_eigenvalue(2, 2)
    e_rad = abs(radial.lambda_estimate / shoot - 1)
    e_grid = abs(grid.lambda_estimate / radial.lambda_estimate - 1)
    ok = e_rad < 0.005 and e_grid < 0.02 and elapsed < 120
    verdict("AC2 Monge-Ampere cross-check", ok,
            f"radial {radial.lambda_estimate:.7f} vs shooting {shoot:.7f} (rel {e_rad:.1e}); "
            f"grid {grid.lambda_estimate:.6f} (rel {e_grid:.1e}); {elapsed:.1f}s")


def test_ac3_general_radial_runs(verdict, radial_runs):
    details, ok = [], True
    for nk in [(3, 2), (3, 3), (4, 2)]:
        trace, report = radial_runs[nk]
        roots = trace.column("Rk_root")
        rise = float(np.max(np.diff(roots[1:])))
        scale = np.abs(np.array([r.R_k * r.norm_k1**nk[1] for r in trace.rows]))
        slack = float(np.min(trace.column("monok_slack")[1:] / np.maximum(scale[1:], 1.0)))
        good = rise <= 1e-8 and report.stop_reason == "converged" and report.iterations <= 200 and slack >= -1e-8
        ok &= good
        details.append(f"{nk}: {report.iterations} it, rise {rise:.1e}, slack {slack:.1e}")
    verdict("AC3 general (n,k) radial runs", ok, "; ".join(details))


def test_ac4_hyperbolic_polynomial_suite(verdict):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    prod = summ = shift = imag = 0.0
    qgar = np.inf
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, n + 1))
        A, X = random_cone_matrix(n, k, rng), random_cone_matrix(n, k, rng)
        rel = hyperpoly.relative_eigenvalues(A, X, k)
        lam, sa = rel.roots, symfun.s_k(A, k)
        scale = 1.0 + np.max(np.abs(lam))
        imag = max(imag, rel.imag_residual / scale)
        prod = max(prod, abs(np.prod(lam) - symfun.s_k(X, k) / sa) / scale**k)
        summ = max(summ, abs(lam.sum() - hyperpoly.directional_derivative(A, X, k) / sa) / (k * scale))
        s = rng.normal()
        lam_s = hyperpoly.relative_eigenvalues(A, X + s * A, k).roots
        shift = max(shift, np.max(np.abs(lam_s - lam - s)) / (scale + abs(s)))
        d = hyperpoly.garding_defect(A, X, k)
        qgar = min(qgar, d.defect / (1.0 + abs(d.arithmetic_side)))
    elapsed = time.perf_counter() - t0
    ok = max(prod, summ, shift, imag) < 1e-9 and qgar >= -1e-12 and elapsed < 60
    verdict("AC4 hyperbolic-polynomial suite", ok,
            f"prod {prod:.1e}, sum {summ:.1e}, shift {shift:.1e}, imag {imag:.1e}, "
            f"QGar min {qgar:.1e}; {elapsed:.1f}s")


def test_ac5_divergence_defects(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 4))
        u = divfree.CubicField.random(n, rng)
        x = rng.uniform(-1, 1, size=n)
        k = int(rng.integers(1, n + 1))
        for i in range(n):
            worst = max(worst, abs(divfree.divergence_defect(u, "S_k", i, k, x)))
    u = divfree.CubicField.from_monomials(3, {(3, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): 1})
    m2 = divfree.divergence_defect(u, "M2", 0)
    ok = worst < 1e-6 and abs(m2 - 48) < 1e-4
    verdict("AC5 divergence defects", ok, f"max S_k defect {worst:.1e}; M2 example {m2:.10f}")


def test_ac6_dual_cone_suite(verdict):
    rng = np.random.default_rng(6)
    geo = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        lam = rng.uniform(0.1, 5.0, size=n)
        geo = max(geo, abs(dualcone.rho_star_vec(lam, n)[0] - np.prod(lam) ** (1 / n)))
    ident = max(abs(dualcone.rho_star(np.eye(n), k).rho_star - 1)
                for n in range(1, 7) for k in range(1, n + 1))
    nest = 0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        A = random_spd(n, rng) * rng.uniform(0.5, 2.0)
        flags = [dualcone.in_V_k(A, k) for k in range(1, n + 1)]
        nest += sum(a and not b for a, b in zip(flags, flags[1:]))
    kt = np.inf
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n + 1))
        A, B = random_dual_matrix(n, k, rng), random_cone_matrix(n, k, rng)
        kt = min(kt, dualcone.kuo_trudinger_gap(A, B, k) / (1 + np.linalg.norm(A) * np.linalg.norm(B)))
    ok = geo < 1e-6 and ident < 1e-6 and nest == 0 and kt >= -1e-9
    verdict("AC6 dual-cone suite", ok,
            f"k=n err {geo:.1e}, identity err {ident:.1e}, nesting violations {nest}, KT min {kt:.1e}")


def test_ac7_spectral_characterization(verdict, disk_k1_run, disk_k2_long_run):
    rng = np.random.default_rng(7)
    details, ok = [], True
    for k, (_, report) in ((1, disk_k1_run), (2, disk_k2_long_run)):
        lam = report.lambda_estimate
        opt = linear_first_eigenvalue(optimal_field(report.eigenfunction, k)).lambda1
        grid = report.eigenfunction.grid
        worst = min(linear_first_eigenvalue(random_v_k_field(grid, k, rng)).lambda1 for _ in range(20))
        ok &= abs(opt / lam - 1) < 0.02 and worst >= lam * 0.98
        details.append(f"k={k}: ratio {opt / lam:.8f}, min random {worst:.4f} vs {lam:.4f}")
    verdict("AC7 spectral characterization", ok, "; ".join(details))


def _scaled(u, v, k):
    return 1.0 + abs(pair_integral(u, v, k)) + abs(pair_integral(v, u, k))


def _ibp_pairs(radial_runs):
    """(u, v, k) from scheme iterates and from manufactured radial solutions."""
    for (n, k), (trace, _) in radial_runs.items():
        its = trace.iterates
        for a, b in [(its[1], its[0]), (its[2], its[1]), (its[-1], its[1]), (its[1], its[-1])]:
            yield a, b, k
    for n in (2, 3, 4):
        d = RadialDomain(n, 1.0, 512)
        for k in range(1, n + 1):
            u = solve_radial(d, k, lambda r: 1 + r * r)
            v = solve_radial(d, k, lambda r: 2 + np.cos(4 * r))
            b = quadratic_bowl(d)
            for a, c in [(u, v), (v, u), (u, b), (b, v)]:
                yield a, c, k


def _ibp_minima(radial_runs):
    worst = {"nibp": np.inf, "power_l1": np.inf, "power_l2": np.inf, "schwarz": np.inf, "rev_aleks": np.inf}
    for u, v, k in _ibp_pairs(radial_runs):
        s = _scaled(u, v, k)
        worst["nibp"] = min(worst["nibp"], nibp_residual(u, v, k) / s)
        worst["power_l1"] = min(worst["power_l1"], power_nibp_residual(u, v, k, 1) / s)
        worst["power_l2"] = min(worst["power_l2"], power_nibp_residual(u, v, k, 2) / s)
        worst["schwarz"] = min(worst["schwarz"], schwarz_residual(u, v, k) / s)
    for (n, k), (trace, report) in radial_runs.items():
        if k == n:
            lam, w = report.lambda_estimate, report.eigenfunction
            for u in trace.iterates[1::3]:
                scale = 1.0 + lam * pair_integral(u, w, n)
                worst["rev_aleks"] = min(worst["rev_aleks"], reverse_aleksandrov_residual(u, w, lam) / scale)
    return worst


@pytest.mark.xfail(strict=True, reason="the l=2 power inequality fails on admissible pairs whose S_k(D^2 u) "
                   "is not constant; S_k^l is not divergence free (see test_divfree)")
def test_ac8_integration_by_parts(verdict, radial_runs):
    worst = _ibp_minima(radial_runs)
    detail = ", ".join(f"{key} {val:.2e}" for key, val in worst.items())
    verdict("AC8 integration-by-parts suites", min(worst.values()) >= -1e-6, f"min scaled residuals: {detail}")


def test_ac8_parts_other_than_power_l2(radial_runs):
    worst = _ibp_minima(radial_runs)
    assert all(val >= -1e-6 for key, val in worst.items() if key != "power_l2"), worst


def test_ac9_w21_diagnostic(verdict, disk_k2_long_run):
    gold = load()
    vals = w21_values(*disk_k2_long_run)
    first, last = vals[W21_STEPS[0]], vals[W21_STEPS[-1]]
    matches = all(abs(vals[m] / gold["w21"][str(m)] - 1) < 1e-6 for m in W21_STEPS)
    ok = last < first and last < gold["w21_threshold"] and matches
    verdict("AC9 W21 diagnostic", ok,
            f"m={W21_STEPS[0]}: {first:.4e}, m={W21_STEPS[-1]}: {last:.4e}, "
            f"threshold {gold['w21_threshold']:g}, golden match {matches}")
