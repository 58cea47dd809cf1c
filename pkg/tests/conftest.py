import pytest

from flashtb.fixtures import fixture
from flashtb.transfers import TransferSet, trans_ultra


@pytest.fixture(scope="session")
def fig1():
    return fixture("fig1-net")


@pytest.fixture(scope="session")
def fig2():
    return fixture("fig2-net")


@pytest.fixture(scope="session")
def fig3():
    return fixture("fig3-net")


@pytest.fixture(scope="session")
def fig2_tu(fig2):
    return TransferSet(fig2, trans_ultra(fig2))


@pytest.fixture(scope="session")
def fig1_tu(fig1):
    return TransferSet(fig1, trans_ultra(fig1))



ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
