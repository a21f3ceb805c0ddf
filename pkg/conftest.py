import os

import pytest
from dotenv import load_dotenv

load_dotenv()


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: large-N runs, enabled with PINNING_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("PINNING_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set PINNING_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def special_half():
    from app.models.state import InterArrivalLaw

    return InterArrivalLaw.special(0.5)


@pytest.fixture
def policy():
    from app.models.state import PrecisionPolicy

    return PrecisionPolicy(base_bits=192, per_degree_bits=1.5)
