import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
