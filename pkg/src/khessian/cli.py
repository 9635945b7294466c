"""Command-line front end.

    khessian --mode scheme --domain "disk(1)" --k 2 --res 1/64 --out run1
    khessian mode=scheme domain=disk R=1 k=1 h=1/64
    khessian --config run.cfg max_iter=50

Settings are merged in the order: defaults, ``--config`` file (key=value
lines, ``#`` comments), command-line flags, positional key=value overrides.
Exit status: 0 success, 1 a verification check failed, 2 invalid
configuration, 3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .dualcone import c_nk, rho_star
from .pde import Grid2D, GridFunction, RadialDomain, SolverError
from .scheme import AdmissibilityError, SchemeConfig, SchemeError, run_scheme
from .spectral import SpectralError, linear_first_eigenvalue, optimal_field, random_v_k_field
from .verify import random_spd, run_all

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
MODES = ("scheme", "verify", "spectral-check", "dualcone")

DEFAULTS = {
    "mode": "scheme",
    "domain": "disk",
    "k": "1",
    "max_iter": "200",
    "tol": "1e-6",
    "seed": "0",
    "out": "khessian-out",
    "am_rule": "inverse-square",
    "timing": "false",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    domain: Grid2D | RadialDomain | None
    k: int
    max_iter: int
    tol: float
    seed: int
    out: Path
    am_rule: str
    timing: bool
    extra: dict


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _integer(text: str, key: str) -> int:
    value = _number(text)
    if value != int(value):
        raise ConfigError(f"{key} must be an integer, got {text!r}")
    return int(value)


def read_config_file(path) -> dict:
    settings = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        settings[key.strip().replace("-", "_")] = value.strip()
    return settings


def parse_domain(settings: dict):
    """disk(R) | square(side) | ball(n,R), or the bare name with R / side / n keys."""
    domain_text = settings.get("domain", "disk").replace(" ", "")
    m = re.fullmatch(r"(disk|square|ball)(?:\(([^)]*)\))?", domain_text)
    if not m:
        raise ConfigError(f"unknown domain {domain_text!r}")
    name, args = m.group(1), [a for a in (m.group(2) or "").split(",") if a]
    res = settings.get("res", settings.get("h"))
    if name == "ball":
        n = _integer(args[0], "n") if args else _integer(settings.get("n", "2"), "n")
        R = _number(args[1]) if len(args) > 1 else _number(settings.get("R", "1"))
        M = _integer(settings.get("M", res or "1024"), "M")
        try:
            return RadialDomain(n, R, M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    size_key = "R" if name == "disk" else "side"
    size = _number(args[0]) if args else _number(settings.get(size_key, "1"))
    h = _number(res or "1/64")
    if not 0 < h < size:
        raise ConfigError(f"grid spacing {h} must lie in (0, {size})")
    try:
        return Grid2D(name, size, h)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_config(settings: dict) -> RunConfig:
    mode = settings["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    domain = None if mode in ("verify", "dualcone") else parse_domain(settings)
    k = _integer(settings["k"], "k")
    if domain is not None:
        n = domain.n if isinstance(domain, RadialDomain) else 2
        if not 1 <= k <= n:
            raise ConfigError(f"k={k} outside 1..{n}")
        if mode == "spectral-check" and not isinstance(domain, Grid2D):
            raise ConfigError("spectral-check needs a disk or square domain")
    max_iter = _integer(settings["max_iter"], "max_iter")
    tol = _number(settings["tol"])
    if max_iter < 1 or tol < 0:
        raise ConfigError("max_iter must be positive and tol nonnegative")
    known = {"mode", "domain", "k", "max_iter", "tol", "seed", "out", "am_rule", "timing",
             "res", "h", "M", "R", "n", "side", "lam", "samples", "random_fields"}
    unknown = set(settings) - known
    if unknown:
        raise ConfigError(f"unknown setting(s): {', '.join(sorted(unknown))}")
    return RunConfig(
        mode=mode, domain=domain, k=k, max_iter=max_iter, tol=tol,
        seed=_integer(settings["seed"], "seed"), out=Path(settings["out"]),
        am_rule=settings["am_rule"], timing=settings["timing"].lower() in ("1", "true", "yes"),
        extra={key: settings[key] for key in ("lam", "samples", "random_fields") if key in settings},
    )


# -- modes ----------------------------------------------------------------------------------

def _scheme(cfg: RunConfig):
    sc = SchemeConfig(k=cfg.k, domain=cfg.domain, max_iter=cfg.max_iter, stop_tol=cfg.tol,
                      am_rule=cfg.am_rule, record_time=cfg.timing)
    return run_scheme(sc)


def _save_eigenfunction(w, path: Path) -> None:
    if isinstance(w, GridFunction):
        w.save(path)
    else:
        np.savetxt(path, np.column_stack([w.domain.r, w.values]), fmt="%.17g", header="r w")


def mode_scheme(cfg: RunConfig) -> int:
    trace, report = _scheme(cfg)
    trace.write_csv(cfg.out / "trace.csv")
    (cfg.out / "report.txt").write_text(report.to_text())
    _save_eigenfunction(report.eigenfunction, cfg.out / "eigenfunction.txt")
    sys.stdout.write(report.to_text())
    return EXIT_OK


def mode_verify(cfg: RunConfig) -> int:
    results = run_all(cfg.seed)
    table = "".join(r.line() + "\n" for r in results)
    (cfg.out / "verify.txt").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def mode_spectral(cfg: RunConfig) -> int:
    trace, report = _scheme(cfg)
    A = optimal_field(report.eigenfunction, cfg.k)
    res = linear_first_eigenvalue(A)
    A.save(cfg.out / "field.txt")
    lam = report.lambda_estimate
    ratio = res.lambda1 / lam
    rng = np.random.default_rng(cfg.seed)
    count = int(cfg.extra.get("random_fields", "20"))
    randoms = [linear_first_eigenvalue(random_v_k_field(cfg.domain, cfg.k, rng)).lambda1 for _ in range(count)]
    worst = min(randoms, default=np.inf)
    ok = abs(ratio - 1) < 0.02 and worst >= lam * 0.98
    lines = {
        "lambda_scheme": f"{lam:.12g}",
        "lambda1_optimal": f"{res.lambda1:.12g}",
        "ratio": f"{ratio:.12g}",
        "random_fields": count,
        "min_random_lambda1": f"{worst:.12g}",
        "outside_theory": str(report.outside_theory).lower(),
        "status": "pass" if ok else "fail",
    }
    text = "".join(f"{key}={val}\n" for key, val in lines.items())
    (cfg.out / "spectral.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_CHECK


def mode_dualcone(cfg: RunConfig) -> int:
    if "lam" in cfg.extra:
        mats = [np.diag([_number(v) for v in cfg.extra["lam"].split(",")])]
    else:
        rng = np.random.default_rng(cfg.seed)
        n = max(cfg.k, 3)
        mats = [random_spd(n, rng) for _ in range(int(cfg.extra.get("samples", "10")))]
    rows = ["index,n,k,rho_star,threshold,in_dual,in_V_k"]
    for i, A in enumerate(mats):
        n = A.shape[0]
        if not 1 <= cfg.k <= n:
            raise ConfigError(f"k={cfg.k} outside 1..{n}")
        rep = rho_star(A, cfg.k, seed=cfg.seed)
        rows.append(f"{i},{n},{cfg.k},{rep.rho_star:.12g},{c_nk(n, cfg.k):.12g},"
                    f"{str(rep.in_dual).lower()},{str(rep.in_V_k).lower()}")
    text = "\n".join(rows) + "\n"
    (cfg.out / "dualcone.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


RUNNERS = {"scheme": mode_scheme, "verify": mode_verify, "spectral-check": mode_spectral, "dualcone": mode_dualcone}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="khessian", description="k-Hessian eigenvalue scheme and checks.")
    p.add_argument("overrides", nargs="*", help="key=value settings (a leading 'run' is ignored)")
    p.add_argument("--config", help="file of key=value lines")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--domain", help="disk(R) | square(side) | ball(n,R)")
    p.add_argument("--k")
    p.add_argument("--res", help="grid spacing h (e.g. 1/64) or radial intervals M for balls")
    p.add_argument("--max-iter", dest="max_iter")
    p.add_argument("--tol")
    p.add_argument("--seed")
    p.add_argument("--out")
    p.add_argument("--am-rule", dest="am_rule", help="inverse-square | zero | power:p | geometric:q")
    p.add_argument("--timing", action="store_const", const="true", help="record wall time per step in the trace")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        settings = dict(DEFAULTS)
        if args.config:
            settings.update(read_config_file(args.config))
        for key in ("mode", "domain", "k", "res", "max_iter", "tol", "seed", "out", "am_rule", "timing"):
            value = getattr(args, key)
            if value is not None:
                settings[key] = value
        for item in args.overrides:
            if item == "run":
                continue
            if "=" not in item:
                raise ConfigError(f"expected key=value, got {item!r}")
            key, value = item.split("=", 1)
            settings[key.strip().replace("-", "_")] = value.strip()
        cfg = build_config(settings)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return RUNNERS[cfg.mode](cfg)
    except (SolverError, SchemeError, SpectralError, AdmissibilityError) as exc:
        print(f"khessian: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"khessian: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
