import pytest

from prosumer_storage.config import load_battery, load_tariff


@pytest.fixture(scope="session")
def c1():
    return load_tariff("c1")


@pytest.fixture(scope="session")
def c1_flat():
    return load_tariff("c1", flat_c1=True)


@pytest.fixture(scope="session")
def c2():
    return load_tariff("c2")


@pytest.fixture(scope="session")
def c3():
    return load_tariff("c3")


@pytest.fixture(scope="session")
def pw1():
    return load_battery("powerwall1")


@pytest.fixture(scope="session")
def pw2():
    return load_battery("powerwall2")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
