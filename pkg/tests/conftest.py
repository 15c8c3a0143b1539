import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mpa360.projection import ErpFormat, PerspectiveFormat  # noqa: E402


@pytest.fixture
def erp64():
    return ErpFormat(64, 32)


@pytest.fixture
def persp64(erp64):
    return PerspectiveFormat(erp64.default_focal_length)


@pytest.fixture
def erp256():
    return ErpFormat(256, 128)


@pytest.fixture
def persp256(erp256):
    return PerspectiveFormat(erp256.default_focal_length)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
