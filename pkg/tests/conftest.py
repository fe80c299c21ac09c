import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from expproof.config import LimeConfig
from expproof.model import synthesize_model

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def mlp14():
    return synthesize_model({"kind": "mlp", "sizes": [14, 16, 16, 2]}, seed=7)


@pytest.fixture(scope="session")
def forest14():
    return synthesize_model({"kind": "forest", "n_features": 14, "n_trees": 5, "max_depth": 4}, seed=7)


@pytest.fixture
def cfg():
    return LimeConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import CRITERIA

    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, name, detail in sorted(CRITERIA):
        terminalreporter.write_line(f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {name}: {detail}")
