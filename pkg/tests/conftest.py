import numpy as np
import pytest

from irsofdm.scenario import SystemConfig, LinkGeometry
from irsofdm.channel import sample_taps, to_frequency
from irsofdm.optimizer import initialize


def pytest_addoption(parser):
    parser.addoption(
        '--run-slow', action='store_true', default=False,
        help='Run the full-scale Monte Carlo checks',
    )

def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-slow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --run-slow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng(faker):
    return np.random.default_rng(faker.pyint(min_value=0, max_value=0xffffffff))

@pytest.fixture
def small_config():
    return SystemConfig(
        n_subcarriers=8, n_tx=4, n_users=2, n_irs=4, n_taps=4, cp_len=4,
    )

@pytest.fixture
def geometry():
    return LinkGeometry()

@pytest.fixture
def config_factory(faker):
    def build(num, **kwargs):
        for _ in range(num):
            n_tx = faker.pyint(min_value=1, max_value=4)
            n_taps = faker.pyint(min_value=1, max_value=4)
            kw = dict(
                n_subcarriers=faker.pyint(min_value=n_taps, max_value=8),
                n_tx=n_tx,
                n_users=faker.pyint(min_value=1, max_value=n_tx),
                n_irs=faker.pyint(min_value=1, max_value=5),
                n_taps=n_taps,
                cp_len=n_taps,
            )
            kw.update(kwargs)
            yield SystemConfig(**kw)
    return build

@pytest.fixture
def channels(small_config, geometry, rng):
    taps = sample_taps(small_config, geometry, rng)
    return taps, to_frequency(taps, small_config.n_subcarriers)

@pytest.fixture
def freq_channels(channels):
    return channels[1]

@pytest.fixture
def init_state(small_config, freq_channels, rng):
    return initialize(small_config, freq_channels, rng)
