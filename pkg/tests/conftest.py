import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running checks (minutes)")
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance gate, one test per criterion")
