"""
Shared test setup: src/ on the path, single-worker sampling, no log files
"""

import os
import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
sys.path.insert(0, str(SRC))

os.environ["DISCLAB_THREADS"] = "1"

from utils.config_loader import get_config, reset_config  # noqa: E402
from utils.logger import get_logger  # noqa: E402

TEST_OVERRIDES = {
    "logging.log_to_file": False,
    "sampling.progress": False,
    "sampling.max_workers": 1,
}


def _apply_overrides():
    config = get_config()
    for key, value in TEST_OVERRIDES.items():
        config.set(key, value)
    return config


# The logger reads its settings once; configure it before any module logs
_apply_overrides()
get_logger(__name__)


@pytest.fixture(autouse=True)
def lab_config(monkeypatch):
    """Fresh config for every test with the test overrides applied"""
    monkeypatch.setenv("DISCLAB_THREADS", "1")
    monkeypatch.delenv("DISCLAB_CONFIG_DIR", raising=False)
    reset_config()
    config = _apply_overrides()
    yield config
    reset_config()


@pytest.fixture
def unit_ball_2d():
    from geometry.convex_body import ball
    return ball(2, 1.0, center=[0.5, 0.5])


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240611)
