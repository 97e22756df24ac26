import numpy as np
import pytest

import config


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setattr(config, "SPARSEKERN_QUIET", True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
