import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from khessian.pde import Grid2D, RadialDomain  # noqa: E402
from khessian.scheme import SchemeConfig, run_scheme  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def disk64():
    return Grid2D("disk", 1.0, 1 / 64)


@pytest.fixture(scope="session")
def disk_k1_run(disk64):
    return run_scheme(SchemeConfig(k=1, domain=disk64, stop_tol=1e-9))


@pytest.fixture(scope="session")
def disk_k2_long_run():
    from golden_runs import disk_k2_long_run

    return disk_k2_long_run()


@pytest.fixture(scope="session")
def radial_runs():
    """Converged radial runs for the general (n, k) suite."""
    out = {}
    for n, k in [(2, 1), (2, 2), (3, 2), (3, 3), (4, 2)]:
        out[n, k] = run_scheme(SchemeConfig(k=k, domain=RadialDomain(n, 1.0, 1024), max_iter=200))
    return out
