from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from spherevg.dynamics import PhysicalParams
from spherevg.geometry import Scene

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    path = FIXTURES / name
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    return path.read_text(encoding="utf-8")


def worked_scene() -> Scene:
    th = math.pi / 3
    return Scene(1.0, (2.0, 0.0, 0.0), (3.0 * math.cos(th), 3.0 * math.sin(th), 0.0))


@pytest.fixture
def worked():
    return worked_scene()


@pytest.fixture
def unit_params():
    return PhysicalParams(1.0, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def oracle_values():
    return load_fixture("oracle_values.json")
