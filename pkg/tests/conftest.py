import numpy as np
import pytest

from pathfolio.paths import GridSpec, MultiPath, generate_geometric


@pytest.fixture
def grid12():
    return GridSpec(1.0, 12)


def geometric_assets(grid, sigmas, seeds=None, s0=1.0):
    seeds = seeds or [100 + i for i in range(len(sigmas))]
    return MultiPath(
        grid,
        tuple(generate_geometric(grid, seed, sigma, 0.0, s0) for seed, sigma in zip(seeds, sigmas)),
        positive=True,
    )


@pytest.fixture
def geo3(grid12):
    """Three geometric Rademacher paths, the workhorse multi-asset fixture."""
    return geometric_assets(grid12, [0.2, 0.3, 0.4])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance criteria append (label, passed, detail) here; printed after the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
