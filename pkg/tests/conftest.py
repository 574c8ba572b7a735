import sys
from pathlib import Path

import numpy as np
import pytest

from csecoc.data import Dataset, UCI_DATASETS, load_named

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


def point_masses(positions, per_class=1, dim=1) -> Dataset:
    """Classes whose samples all sit on a single point."""
    rows, labels = [], []
    for c, pos in enumerate(positions):
        p = np.atleast_1d(np.asarray(pos, dtype=float))
        if p.size == 1 and dim > 1:
            p = np.concatenate([p, np.zeros(dim - 1)])
        rows += [p] * per_class
        labels += [c] * per_class
    return Dataset(np.array(rows), np.array(labels), tuple(f"c{i}" for i in range(len(positions))), "points")


def available(name: str) -> bool:
    return (DATA_DIR / UCI_DATASETS[name].filename).exists()


@pytest.fixture(scope="session")
def iris():
    return load_named("iris", DATA_DIR)


@pytest.fixture(scope="session")
def wine():
    return load_named("wine", DATA_DIR)


@pytest.fixture(scope="session")
def vehicle():
    return load_named("vehicle", DATA_DIR)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.SUMMARY:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance.SUMMARY):
            terminalreporter.write_line(acceptance.SUMMARY[n])
