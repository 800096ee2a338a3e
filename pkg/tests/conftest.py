import sys
from pathlib import Path

import numpy as np
import pytest

from besovmhd import FourierGrid, build_partition, load_constants

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
CONSTANTS = CONFIGS / "constants.json"

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def constants2():
    return load_constants(CONSTANTS, 2)


@pytest.fixture(scope="session")
def constants3():
    return load_constants(CONSTANTS, 3)


@pytest.fixture(scope="session")
def grid2():
    return FourierGrid(2, 16)


@pytest.fixture(scope="session")
def grid3():
    return FourierGrid(3, 8)


@pytest.fixture(scope="session")
def part2(grid2):
    return build_partition(grid2)


@pytest.fixture(scope="session")
def part3(grid3):
    return build_partition(grid3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
