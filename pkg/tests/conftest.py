import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nonexpansive import default_catalog


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def paper(catalog):
    return catalog.lookup("paper_example")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
