import sys
from pathlib import Path

import pytest
from hypothesis import settings

from tumorstrip import REFERENCE_PARAMS, make_state

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return REFERENCE_PARAMS


@pytest.fixture(scope="session")
def state():
    return make_state(REFERENCE_PARAMS)
