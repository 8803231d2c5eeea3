import numpy as np
import pytest

from kerrgap.fields_grid import build_grid, kerr_fields, kerr_newman_fields
from kerrgap.kerr_maps import KerrNewmanParams, KerrParams


@pytest.fixture(scope="session")
def grid():
    return build_grid(r_min=0.01, r_max=100.0, n_r=128, n_theta=64)


@pytest.fixture(scope="session")
def coarse_grid():
    return build_grid(r_min=0.05, r_max=20.0, n_r=48, n_theta=24)


@pytest.fixture(scope="session")
def kerr_xY(grid):
    return kerr_fields(grid, KerrParams(1.0), "xY")


@pytest.fixture(scope="session")
def kerr_Uw(grid):
    return kerr_fields(grid, KerrParams(1.0), "Uw")


@pytest.fixture(scope="session")
def kn(grid):
    return kerr_newman_fields(grid, KerrNewmanParams.from_charge(1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
