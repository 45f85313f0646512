import re
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ntn_bandit import preset  # noqa: E402
from ntn_bandit.network import SnapshotFactory  # noqa: E402

# filled by test_acceptance, reported at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def order(key):
        num, suffix = re.match(r"(\d+)(\w*)", key).groups()
        return int(num), suffix

    for key in sorted(ACCEPTANCE, key=order):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture(scope="session")
def desk_cfg():
    return preset("desk")


@pytest.fixture(scope="session")
def desk_factory(desk_cfg):
    return SnapshotFactory(desk_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
