import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _single_thread():
    # keep runs deterministic and timings honest on shared hardware
    torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
