import numpy as np
import pytest

from golden_runs import W21_STEPS, W21_THRESHOLD, load, w21_values
from khessian.pde import Grid2D, RadialDomain, quadratic_bowl, solve_radial
from khessian.scheme import (CSV_HEADER, AdmissibilityError, SchemeConfig, make_am_rule, nibp_residual,
                             pair_integral, power_nibp_residual, reverse_aleksandrov_residual, run_scheme,
                             schwarz_residual, w21_diagnostic)


def test_am_rules():
    assert make_am_rule("inverse-square", 1, 2)(3) == pytest.approx(1 / 16)
    assert make_am_rule("power:3", 2, 3)(1) == pytest.approx(1 / 8)
    assert make_am_rule("geometric:0.5", 2, 3)(2) == pytest.approx(0.25)
    assert make_am_rule("zero", 3, 3)(5) == 0.0
    for bad, k, n in [("zero", 2, 3), ("power:1", 1, 2), ("geometric:1.5", 1, 2), ("harmonic", 1, 2)]:
        with pytest.raises(ValueError):
            make_am_rule(bad, k, n)


def test_config_validation(disk64):
    with pytest.raises(ValueError):
        SchemeConfig(k=3, domain=disk64)
    with pytest.raises(ValueError):
        SchemeConfig(k=4, domain=RadialDomain(3))
    with pytest.raises(ValueError):
        SchemeConfig(k=1, domain=disk64, max_iter=0)


def test_rejects_positive_start():
    d = RadialDomain(3, 1.0, 128)
    u = solve_radial(d, 2, 1.0) * -1.0
    with pytest.raises(AdmissibilityError):
        run_scheme(SchemeConfig(k=1, domain=d, u0=u))


def test_csv_layout_and_determinism(tmp_path):
    d = RadialDomain(3, 1.0, 256)
    texts = []
    for i in range(2):
        trace, _ = run_scheme(SchemeConfig(k=2, domain=d, max_iter=6))
        trace.write_csv(tmp_path / f"t{i}.csv")
        texts.append((tmp_path / f"t{i}.csv").read_bytes())
    assert texts[0] == texts[1]
    lines = texts[0].decode().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 8
    assert all(float(x) == 0.0 for x in (line.split(",")[-1] for line in lines[1:]))


def test_radial_runs_monotone_and_bounded(radial_runs):
    for (n, k), (trace, report) in radial_runs.items():
        roots = trace.column("Rk_root")
        assert report.stop_reason == "converged", (n, k)
        assert np.all(np.diff(roots[1:]) <= 1e-8), (n, k)
        assert np.all(trace.column("monok_slack")[1:] >= -1e-8), (n, k)
        # R_k^(1/k)(u_m) stays above the limit
        assert np.all(roots[1:] >= report.lambda_estimate - 1e-6), (n, k)


def test_pair_integral_nondecreasing(radial_runs):
    for trace, report in radial_runs.values():
        pairs = trace.column("pair_integral")
        assert report.self_referential
        assert np.all(np.diff(pairs[1:]) >= -1e-10 * pairs[-1])


def test_rate_bound(radial_runs):
    for trace, report in radial_runs.values():
        assert report.rate_gap.size > 0
        assert np.all(report.rate_gap <= report.rate_bound + 1e-6)


def test_explicit_reference_not_self_referential():
    d = RadialDomain(3, 1.0, 256)
    _, base = run_scheme(SchemeConfig(k=2, domain=d))
    trace, report = run_scheme(SchemeConfig(k=2, domain=d, w_ref=base.eigenfunction, max_iter=10))
    assert not report.self_referential
    assert np.all(np.isfinite(trace.column("pair_integral")[1:]))


def test_nibp_trace_nonnegative(radial_runs):
    for trace, _ in radial_runs.values():
        assert np.all(trace.column("nibp_res")[1:] >= -1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_inequalities_vanish_on_diagonal(k):
    d = RadialDomain(3, 1.0, 256)
    u = solve_radial(d, k, lambda r: 1 + r)
    scale = abs(pair_integral(u, u, k))
    assert abs(nibp_residual(u, u, k)) < 1e-12 * scale
    assert abs(power_nibp_residual(u, u, k, 2)) < 1e-12 * scale
    assert abs(schwarz_residual(u, u, k)) < 1e-12 * scale


@pytest.mark.parametrize("k", [1, 2, 3])
def test_inequalities_on_distinct_pairs(k):
    d = RadialDomain(3, 1.0, 512)
    u = solve_radial(d, k, lambda r: 1 + r * r)
    v = solve_radial(d, k, lambda r: 2 + np.cos(3 * r))
    for a, b in ((u, v), (v, u)):
        assert nibp_residual(a, b, k) >= -1e-10
        assert power_nibp_residual(a, b, k, 2) >= -1e-10
        assert schwarz_residual(a, b, k) >= -1e-10
        # Schwarz form is invariant under positive scaling of the second argument
        s1, s2 = schwarz_residual(a, b, k), schwarz_residual(a, b * 3.0, k)
        assert s2 == pytest.approx(3.0 * s1, rel=1e-9, abs=1e-12)


def test_inequalities_validate():
    d = RadialDomain(3, 1.0, 128)
    u = solve_radial(d, 2, 1.0)
    with pytest.raises(ValueError):
        power_nibp_residual(u, u, 2, 0)
    with pytest.raises(ValueError):
        nibp_residual(u, solve_radial(RadialDomain(3, 1.0, 256), 2, 1.0), 2)
    with pytest.raises(ValueError):
        nibp_residual(u, u * -1.0, 2)


@pytest.mark.parametrize("rule", ["zero", "inverse-square"])
def test_reverse_aleksandrov(rule):
    d = RadialDomain(3, 1.0, 512)
    trace, report = run_scheme(SchemeConfig(k=3, domain=d, am_rule=rule))
    w, lam = report.eigenfunction, report.lambda_estimate
    # w solves the eigen-equation up to the last forcing term a_m
    assert abs(reverse_aleksandrov_residual(w, w, lam)) <= 1e-8 + trace.a_m[-1]
    for u in (quadratic_bowl(d), trace.iterates[5]):
        assert reverse_aleksandrov_residual(u, w, lam) >= -1e-8


def test_bowl_start():
    d = RadialDomain(2, 1.0, 512)
    _, r1 = run_scheme(SchemeConfig(k=2, domain=d))
    _, r2 = run_scheme(SchemeConfig(k=2, domain=d, u0=quadratic_bowl(d)))
    assert r1.lambda_estimate == pytest.approx(r2.lambda_estimate, rel=1e-6)


def test_w21_trivial_cases():
    d = RadialDomain(3, 1.0, 512)
    _, report = run_scheme(SchemeConfig(k=2, domain=d))
    w = report.eigenfunction
    assert w21_diagnostic(w, w, w, 2, 0.5) == pytest.approx(0.0, abs=1e-9)
    assert w21_diagnostic(w, w * 2.0, w * 2.0, 2, 0.5) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        w21_diagnostic(w, w, w, 2, 0.999)
    with pytest.raises(ValueError):
        w21_diagnostic(w, w, w, 1, 0.5)


def test_w21_golden(disk_k2_long_run):
    trace, report = disk_k2_long_run
    gold = load()
    assert report.lambda_estimate == pytest.approx(gold["disk_k2_lambda"], rel=1e-9)
    vals = w21_values(trace, report)
    for m in W21_STEPS:
        assert vals[m] == pytest.approx(gold["w21"][str(m)], rel=1e-6)
    assert vals[W21_STEPS[-1]] < W21_THRESHOLD < vals[W21_STEPS[0]]


def test_grid_report_flags():
    g = Grid2D("square", 1.0, 1 / 16)
    _, rep = run_scheme(SchemeConfig(k=2, domain=g, max_iter=5))
    assert rep.outside_theory
    assert "outside_theory=true" in rep.to_text()
    _, rep1 = run_scheme(SchemeConfig(k=1, domain=g, max_iter=5))
    assert not rep1.outside_theory


def test_power_inequality_counterexample(radial_runs):
    """With l = 2 the power form fails once S_k(D^2 u) is not constant."""
    trace, _ = radial_runs[2, 1]
    u, v = trace.iterates[1], trace.iterates[-1]
    assert nibp_residual(u, v, 1) == pytest.approx(0.0, abs=1e-10)  # k = 1 is integration by parts
    assert power_nibp_residual(u, v, 1, 2) < -1e-2 * pair_integral(u, v, 1)
