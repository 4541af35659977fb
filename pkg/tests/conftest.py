import time

import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: criterion-level acceptance test")


def pytest_runtest_logreport(report):
    # One PASS/FAIL line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"[{outcome}] {name}")

from intentnet.fixtures import topo5_document
from intentnet.southbound import Controller
from intentnet.switchsim import SwitchFleet
from intentnet.topo import parse_topology


@pytest.fixture(scope="session")
def topo5_doc() -> str:
    return topo5_document()


@pytest.fixture()
def topo5(topo5_doc):
    return parse_topology(topo5_doc)


def wait_for(predicate, timeout=5.0, interval=0.01, message="condition not met"):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return
        time.sleep(interval)
    raise AssertionError(message)


def wait_ready(controller: Controller, expected: int, timeout=5.0):
    wait_for(
        lambda: len(controller.ready_dpids()) >= expected,
        timeout=timeout,
        message=f"only {len(controller.ready_dpids())} of {expected} switches became ready",
    )


@pytest.fixture()
def live_network(topo5):
    """A controller plus all five TOPO5 switches connected over loopback."""
    controller = Controller(port=0, echo_interval=60.0)
    controller.start()
    fleet = SwitchFleet(topo5, "127.0.0.1", controller.port)
    fleet.start()
    wait_ready(controller, len(topo5.switches))
    yield controller, fleet, topo5
    fleet.stop()
    controller.stop()
