# tests/conftest.py
import numpy as np
import pytest

from av_cokriging.config import FitConfig
from av_cokriging.dataset import Dataset
from av_cokriging.kriging import fit_mle
from av_cokriging.multifidelity import fit_multifidelity
from av_cokriging.scenarios import bounds_1d, design_1d, g


@pytest.fixture(scope="session")
def data_1d():
    return design_1d()


@pytest.fixture(scope="session")
def model_1d(data_1d):
    """Three-level co-Kriging fit of the 1D benchmark."""
    return fit_multifidelity(data_1d, FitConfig())


@pytest.fixture(scope="session")
def exact_model_1d(data_1d):
    return fit_multifidelity(data_1d, FitConfig(nugget=0.0))


@pytest.fixture(scope="session")
def g_model_21():
    """Kriging on 21 evaluations of g over [-5, 5]."""
    x = np.linspace(-5.0, 5.0, 21)
    return fit_mle(Dataset(x.reshape(-1, 1), g(x)), FitConfig(), bounds=bounds_1d())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
