import pytest

from wedgeshock.states import solve_normal, worked_case


@pytest.fixture(scope="session")
def params():
    return worked_case()


@pytest.fixture(scope="session")
def nr(params):
    return solve_normal(params)


@pytest.fixture(scope="session")
def symmetric_run(params):
    """Converged free-boundary solve at sigma0 = 0.01, delta = 0 (about 8 s)."""
    from wedgeshock.pde_solver import solve_configuration
    return solve_configuration(params, 0.01, 0.0)


@pytest.fixture(scope="session")
def coarse_domain(params):
    from wedgeshock.pde_solver import build_domain
    return build_domain(params, 0.02, 0.0, resolution=(12, 24))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for line in RESULTS:
            terminalreporter.write_line(line)
