"""
conftest.py

Pytest configuration shared by every test: slow-test gating, soft assertions, test log capture and
xdist worker logging.
"""

import logging

import pytest

from utils.soft_assert import SoftAssertContextManager


# Pytest Configuration
def pytest_addoption(parser):
    """Add custom command-line options"""
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="Also run tests marked slow (full PEPS optimizations, large ED sectors)")


@pytest.hookimpl
def pytest_configure(config):
    """
    Configure pytest before test collection and execution.

    Library loggers are kept at INFO so per-sweep progress shows up in captured logs without debug noise.
    """
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    for name in ('peps', 'fock', 'dynamics', 'experiments', 'cli', 'lattice'):
        logging.getLogger(name).setLevel(logging.INFO)


def pytest_collection_modifyitems(config, items):
    """
    Skip tests marked `slow` unless --run-slow is given.
    """
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# Test logging helper
@pytest.fixture
def test_logger(request):
    """
    Fixture to add logs to test results.

    Args:
        request: The pytest request object

    Returns:
        callable: A function that adds messages to the test logs
    """

    def _log_message(message: str):
        if not hasattr(request.node, "test_logs"):
            request.node.test_logs = []
        request.node.test_logs.append(message)
        logging.getLogger(request.node.name).info(message)

    return _log_message


@pytest.fixture
def soft_assert(request) -> SoftAssertContextManager:
    """
    Provides a soft assertion mechanism that collects failures without stopping test execution.

    Creates a SoftAssertContextManager and attaches it to the test item, so that
    `pytest_runtest_makereport` can fail the test with every collected violation at once.

    Args:
        request: The pytest request object

    Returns:
        SoftAssertContextManager: Soft assertion context for collecting multiple failures
    """
    context = SoftAssertContextManager()
    request.node._soft_assert = context  # Attach to the pytest item for later access
    return context


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """
    Turn a passing test with collected soft-assertion failures into a failure listing all of them.
    """
    outcome = yield
    report = outcome.get_result()
    context = getattr(item, "_soft_assert", None)
    if report.when == "call" and report.passed and context is not None and context.has_failures():
        report.outcome = "failed"
        report.longrepr = "Soft assertion failures:\n" + "\n".join(f"  {failure}"
                                                                   for failure in context.get_failures())


@pytest.hookimpl(tryfirst=True, optionalhook=True)
def pytest_configure_node(node):
    """
    Logs when a worker node is configured in distributed testing mode.

    Args:
        node: The worker node being configured
    """
    node.log.info(f"Worker {node.gateway.id} is configured and starting")


@pytest.hookimpl(tryfirst=True, optionalhook=True)
def pytest_testnodedown(node, error):
    """
    Logs the status of a worker node when it completes testing.

    Args:
        node: The worker node that has finished
        error: Error information if the node failed, None otherwise
    """
    if error:
        node.log.error(f"Worker {node.gateway.id} failed: {error}")
    else:
        node.log.info(f"Worker {node.gateway.id} finished successfully")
