import os
import sys

import pytest

from rgbdsde.timegrid import SEED_ENV


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    # a stray override in the caller's shell would silently change every seeded test
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.fixture
def tmp_out(tmp_path):
    return os.fspath(tmp_path)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
