from pathlib import Path

import pytest

from irsofdm.config import (
    Config, Option, ListOption, validate_options,
    RequiredError, ChoiceError, InvalidTypeError, InvalidLengthError,
    OutOfRangeError,
)
from irsofdm.scenario import SystemConfig, LinkGeometry
from irsofdm.optimizer import StoppingCriteria

DATA_DIR = Path(__file__).parent / 'data'


def test_option_validate(faker):
    opt = Option(name='n_irs', type=int, min_value=1, max_value=256)
    for _ in range(20):
        value = faker.pyint(min_value=1, max_value=256)
        assert opt.validate(value) == value

    with pytest.raises(RequiredError):
        opt.validate(None)
    with pytest.raises(OutOfRangeError):
        opt.validate(0)
    with pytest.raises(OutOfRangeError):
        opt.validate(257)
    with pytest.raises(InvalidTypeError):
        opt.validate('8')
    with pytest.raises(InvalidTypeError):
        opt.validate(True)

    opt = Option(name='tx_power', type=float, required=False, default=1.)
    assert opt.validate(None) == 1.
    value = opt.validate(2)
    assert isinstance(value, float) and value == 2.

    opt = Option(name='variable', type=str, choices=('tx_power', 'n_irs'))
    assert opt.validate('n_irs') == 'n_irs'
    with pytest.raises(ChoiceError):
        opt.validate('cp_len')

def test_list_option():
    opt = ListOption(name='values', type=float, min_length=1, max_length=3)
    assert opt.validate([1, 2.5]) == [1., 2.5]
    with pytest.raises(RequiredError):
        opt.validate([])
    with pytest.raises(InvalidLengthError):
        opt.validate([1, 2, 3, 4])
    with pytest.raises(InvalidTypeError):
        opt.validate('1,2')

    opt = ListOption(name='values', type=float, required=False)
    assert opt.validate(None) == []

def test_validate_options():
    options = StoppingCriteria.get_init_options()
    kw = validate_options(options, {'tol': 1e-3})
    assert kw == {'tol': 1e-3, 'max_outer': 100, 'phi_tol': 1e-6, 'max_sweeps': 50}

    with pytest.raises(InvalidTypeError):
        validate_options(options, {'tolerance': 1e-3})

def test_error_messages():
    opt = Option(name='n_taps', type=int, min_value=1)
    assert 'n_taps' in str(RequiredError(opt))
    assert '[1, None]' in str(OutOfRangeError(opt, 0))

def test_read_data_file():
    config = Config(DATA_DIR / 'irsofdm.yaml')
    data = config.read()
    assert set(data.keys()) == set(Config.SECTIONS)

    system = SystemConfig.from_dict(config.section('system'))
    assert system.n_subcarriers == 8
    assert system.n_irs == 4
    assert system.rng_seed == 7
    assert system.noise_power == pytest.approx(1e-10)

    geometry = LinkGeometry.from_dict(config.section('geometry'))
    assert geometry == LinkGeometry()

    stopping = StoppingCriteria.from_dict(config.section('stopping'))
    assert stopping.max_outer == 20
    assert stopping.phi_tol == 1e-6

def test_missing_file(tmp_path):
    config = Config(tmp_path / 'nope.yaml')
    assert config.read() == {}
    assert config.section('system') == {}

def test_unknown_section(tmp_path):
    filename = tmp_path / 'bad.yaml'
    filename.write_text('system:\n  n_irs: 4\nplots:\n  dpi: 100\n')
    config = Config(filename)
    with pytest.raises(InvalidTypeError):
        config.read()

def test_write_read(tmp_path, faker):
    filename = tmp_path / 'sub' / 'irsofdm.yaml'
    config = Config(filename)
    system = SystemConfig(
        n_irs=faker.pyint(min_value=1, max_value=128),
        tx_power=faker.pyfloat(min_value=.1, max_value=10.),
        quant_bits=faker.pyint(min_value=1, max_value=6),
        rng_seed=faker.pyint(),
    )
    geometry = LinkGeometry(d_bs_user=(48., 52., 50.))
    config.write({'system': system.to_dict(), 'geometry': geometry.to_dict()})
    assert filename.exists()

    data = Config(filename).read()
    assert SystemConfig.from_dict(data['system']) == system
    assert LinkGeometry.from_dict(data['geometry']) == geometry
