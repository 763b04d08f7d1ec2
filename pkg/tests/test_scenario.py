import math

import numpy as np
import pytest

from irsofdm.common import DomainError, ConfigError
from irsofdm.config import OutOfRangeError
from irsofdm.scenario import (
    SystemConfig, LinkGeometry, link_gain, sample_user_distances,
    dbm_to_watts, watts_to_dbm,
)


def test_defaults():
    config = SystemConfig()
    assert (config.n_subcarriers, config.n_taps, config.cp_len) == (64, 16, 16)
    assert (config.n_tx, config.n_users, config.n_irs) == (8, 3, 64)
    assert config.noise_power == pytest.approx(1e-10)
    assert config.noise_power_dbm == pytest.approx(-70)
    assert config.tx_power == 1
    assert config.quant_bits is None

def test_dbm_conversion(faker):
    assert dbm_to_watts(-70) == pytest.approx(1e-10)
    assert dbm_to_watts(30) == pytest.approx(1)
    for _ in range(20):
        dbm = faker.pyfloat(min_value=-120, max_value=40)
        assert watts_to_dbm(dbm_to_watts(dbm)) == pytest.approx(dbm)
    with pytest.raises(DomainError):
        watts_to_dbm(0)

def test_from_dict_noise():
    config = SystemConfig.from_dict({'noise_power_dbm': -80})
    assert config.noise_power == pytest.approx(1e-11)
    config = SystemConfig.from_dict({'noise_power': 2e-10, 'noise_power_dbm': -80})
    assert config.noise_power == 2e-10
    assert SystemConfig.from_dict({}) == SystemConfig()

@pytest.mark.parametrize('kwargs', [
    dict(n_irs=0),
    dict(n_taps=17),
    dict(cp_len=65),
    dict(n_users=9),
    dict(noise_power=0.),
    dict(tx_power=-1.),
    dict(quant_bits=0),
])
def test_config_invariants(kwargs):
    with pytest.raises(ConfigError):
        SystemConfig(**kwargs)

def test_geometry_invariants():
    with pytest.raises(ConfigError):
        LinkGeometry(d_bs_irs=.5)
    with pytest.raises(ConfigError):
        LinkGeometry(exp_bs_user=0)
    with pytest.raises(ConfigError):
        LinkGeometry(d_bs_user=(40.,))
    for d in (0, .5, .99):
        with pytest.raises(ConfigError):
            LinkGeometry(d_irs_user=d)
    with pytest.raises(OutOfRangeError):
        LinkGeometry.from_dict({'d_irs_user': .5})
    geometry = LinkGeometry(d_irs_user=1)
    assert geometry.link_gains([50.]).irs_user == pytest.approx(1e-3)
    geometry = LinkGeometry(d_bs_user=[47, 53])
    assert geometry.d_bs_user == (47., 53.)
    assert geometry.user_distance_range == (47., 53.)

def test_link_gain_examples():
    assert link_gain(1, 2.8, 30) == pytest.approx(1e-3)
    assert link_gain(50, 2.8, 30) == pytest.approx(10 ** -3 * 50 ** -2.8)
    assert link_gain(50, 2.8, 30) == pytest.approx(1.745e-8, rel=1e-2)
    assert link_gain(3, 2.5, 30) == pytest.approx(6.415e-5, rel=1e-3)
    db = 10 * math.log10(link_gain(50, 2.8, 30))
    assert db == pytest.approx(-77.57, abs=.01)

    with pytest.raises(DomainError):
        link_gain(.99, 2.8, 30)

def test_link_gain_monotone(faker):
    for _ in range(50):
        d = faker.pyfloat(min_value=1.01, max_value=500)
        exp = faker.pyfloat(min_value=.5, max_value=5)
        g = link_gain(d, exp, 30)
        assert link_gain(d * 1.1, exp, 30) < g
        assert link_gain(d, exp + .1, 30) < g

def test_user_distances(rng):
    geometry = LinkGeometry(d_bs_irs=50, d_irs_user=3)
    d = sample_user_distances(geometry, 3, rng)
    assert d.shape == (3,)
    assert np.all(d >= 47) and np.all(d <= 53)

    d = sample_user_distances((50, 0), 2, rng)
    assert np.all(d == 50)
    d = sample_user_distances((50., 3.), 4, rng)
    assert np.all(d >= 47) and np.all(d <= 53)

def test_user_distances_deterministic(faker):
    seed = faker.pyint()
    geometry = LinkGeometry()
    a = sample_user_distances(geometry, 5, np.random.default_rng(seed))
    b = sample_user_distances(geometry, 5, np.random.default_rng(seed))
    assert np.array_equal(a, b)

def test_user_distances_errors(rng):
    geometry = LinkGeometry(d_bs_irs=2, d_irs_user=3)
    with pytest.raises(DomainError):
        sample_user_distances(geometry, 2, rng)
    with pytest.raises(DomainError):
        sample_user_distances(LinkGeometry(), 0, rng)
    with pytest.raises(DomainError):
        sample_user_distances((50, -1), 2, rng)
    with pytest.raises(DomainError):
        sample_user_distances((3, 2.5), 2, rng)

def test_fixed_user_distances(rng):
    geometry = LinkGeometry(d_bs_user=(48., 49., 50.))
    state = rng.bit_generator.state
    d = sample_user_distances(geometry, 3, rng)
    assert np.array_equal(d, [48., 49., 50.])
    assert rng.bit_generator.state == state
    with pytest.raises(DomainError):
        sample_user_distances(geometry, 2, rng)

def test_link_gains(geometry):
    gains = geometry.link_gains([47., 53.])
    assert gains.bs_user.shape == (2,)
    assert gains.bs_user[0] > gains.bs_user[1]
    assert gains.bs_irs == pytest.approx(link_gain(50, 2.8, 30))
    assert gains.irs_user == pytest.approx(link_gain(3, 2.5, 30))
