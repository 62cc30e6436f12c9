import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from config import default_config, parse_filter_roster  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="exécute les contrôles statistiques longs")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: contrôle statistique long (--run-slow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="nécessite --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_s1():
    return default_config("S1", master_seed=7, K=15, mc=3, filters=parse_filter_roster("pf:200,tl-pf:200"))


@pytest.fixture
def small_s2():
    return default_config("S2", master_seed=7, K=15, mc=3, filters=parse_filter_roster("pf:200,tl-pf:200"))