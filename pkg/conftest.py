import os
import warnings
import numpy as np
import pytest

from noisecascade.chainmodel import default_grid, paramp_chain
from noisecascade.errors import NoiseBudgetWarning

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def table1_chain():
    """The four-stage paramp chain with the measured efficiencies, 18 dB gain."""
    return paramp_chain(0.80, 0.80, 0.61, 18.0, t_h=13.4, t_ex=1.9,
                        cold_bath_k=0.03)


@pytest.fixture
def coarse_grid():
    return default_grid(step=100e6)


@pytest.fixture
def random_chains():
    """Randomized paramp chains spanning the validated parameter ranges."""
    rng = np.random.default_rng(2024)
    chains = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseBudgetWarning)
        for _ in range(100):
            eta_1c, eta_1h, eta_2 = rng.uniform(0.5, 1.0, size=3)
            chains.append(paramp_chain(eta_1c, eta_1h, eta_2,
                                       gain_db=rng.uniform(10, 40),
                                       t_h=rng.uniform(2, 20),
                                       t_ex=rng.uniform(0, 5),
                                       freqs=default_grid(step=250e6)))
    return chains
