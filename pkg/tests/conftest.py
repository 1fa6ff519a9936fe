from __future__ import annotations

import random

import pytest

from instances import signed_circuit, write_points

ACCEPTANCE_LINES: list = []


@pytest.fixture
def points_files(tmp_path):
    return write_points(tmp_path)


@pytest.fixture
def signed():
    return signed_circuit()


@pytest.fixture
def rng():
    return random.Random(7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
