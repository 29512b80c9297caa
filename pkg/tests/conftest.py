import pytest

from routecorr.netgraph import builtin_network
from routecorr.routegen import enumerate_efficient_routes

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    """Collect a one-line verdict; printed in the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mesh():
    net, od = builtin_network("mesh2x2")
    return net, enumerate_efficient_routes(net, od)


@pytest.fixture(scope="session")
def braess_net():
    net, od = builtin_network("braess")
    return net, enumerate_efficient_routes(net, od)


@pytest.fixture(scope="session")
def bypass():
    net, od = builtin_network("mesh_bypass")
    return net, enumerate_efficient_routes(net, od)
