import pytest

from symintel.intelligence import build_inventory
from symintel.machine import Machine
from symintel.spaces import default_space

L, T, H = 12, 64, 2


@pytest.fixture(scope="session")
def space():
    return default_space()


@pytest.fixture(scope="session")
def machine(space):
    return Machine(space)


@pytest.fixture(scope="session")
def inventory(machine):
    return build_inventory(machine, L, T, H)


@pytest.fixture(scope="session")
def corrupted_inventory(space):
    return build_inventory(Machine(space, symmetric=False), L, T, H)


@pytest.fixture(scope="session")
def permutable_inventory(space):
    return build_inventory(Machine(space, permutable=True), L, T, H)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
