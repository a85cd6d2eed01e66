import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctrlvqe.cli import fixture_path  # noqa: E402
from ctrlvqe.model import default_device, load_device, load_problem  # noqa: E402


@pytest.fixture
def device2():
    return default_device(2)


@pytest.fixture
def fixture_problem():
    """The bundled two-qubit synthetic problem (random Hermitian, seed 5)."""
    return load_problem(fixture_path("problem_2q"))


@pytest.fixture
def fixture_device():
    return load_device(fixture_path("device_2q"))
