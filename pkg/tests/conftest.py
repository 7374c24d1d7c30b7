import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

os.environ.setdefault("OPENTI_OFFLINE", "1")

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR


@pytest.fixture
def workspace(tmp_path):
    return str(tmp_path)
