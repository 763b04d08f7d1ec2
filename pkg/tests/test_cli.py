import sys
from pathlib import Path

import pytest
from click.testing import CliRunner
from loguru import logger
from ruamel.yaml import YAML

from irsofdm.cli import cli

DATA_DIR = Path(__file__).parent / 'data'
CONF_FILE = DATA_DIR / 'irsofdm.yaml'


@pytest.fixture(autouse=True)
def restore_logger():
    yield
    logger.remove()
    logger.add(sys.stderr)

@pytest.fixture
def runner():
    return CliRunner()

def invoke(runner, *args, **kwargs):
    result = runner.invoke(cli, ['-c', str(CONF_FILE), *args], catch_exceptions=False, **kwargs)
    return result


def test_show(runner):
    result = invoke(runner, 'show', '--seed', '5', '--quant-bits', '2')
    assert result.exit_code == 0
    data = YAML(typ='safe').load(result.output)
    assert data['system']['rng_seed'] == 5
    assert data['system']['quant_bits'] == 2
    assert data['system']['n_irs'] == 4
    assert data['system']['noise_power'] == pytest.approx(1e-10)
    assert data['stopping']['max_outer'] == 20
    assert data['sweep']['variable'] == 'tx_power'
    assert data['sweep']['values'] == [.5, 1., 2.]
    assert 'proposed_quant' in data['sweep']['schemes']

def test_show_missing_config(runner, tmp_path):
    result = runner.invoke(cli, ['-c', str(tmp_path / 'none.yaml'), 'show'])
    assert result.exit_code == 0
    data = YAML(typ='safe').load(result.output)
    assert data['system']['n_subcarriers'] == 64

def test_invalid_value(runner):
    result = runner.invoke(cli, ['-c', str(CONF_FILE), 'show', '--quant-bits', '0'])
    assert result.exit_code == 1
    assert 'Error' in result.output
    assert 'quant_bits' in result.output

def test_run(runner, tmp_path):
    result = invoke(runner, 'run', '-o', str(tmp_path), '--trial', '1')
    assert result.exit_code == 0
    assert result.output.startswith('proposed_cont: sum_rate=')
    trace = tmp_path / 'trace.csv'
    assert trace.exists()
    assert trace.read_text().splitlines()[0].startswith('iteration,')

def test_run_schemes(runner, tmp_path):
    result = invoke(
        runner, 'run', '-o', str(tmp_path), '-s', 'proposed_quant', '-s', 'no_irs',
        '--quant-bits', '1', '-f', 'jsonl',
    )
    assert result.exit_code == 0
    assert (tmp_path / 'proposed_quant(1)' / 'trace.jsonl').exists()
    assert (tmp_path / 'no_irs' / 'trace.jsonl').exists()
    assert len(result.output.splitlines()) == 2

def test_sweep_deterministic(runner, tmp_path):
    args = ['sweep', '--values', '1,2', '-n', '2', '-s', 'proposed_cont', '-s', 'no_irs']
    result = invoke(runner, *args, '-o', str(tmp_path / 'a'))
    assert result.exit_code == 0
    assert result.output.splitlines() == [
        str(tmp_path / 'a' / 'summary.csv'), str(tmp_path / 'a' / 'trials.csv'),
    ]
    result = invoke(runner, *args, env={'IRSOFDM_OUTPUT_DIR': str(tmp_path / 'b')})
    assert result.exit_code == 0
    for name in ('summary.csv', 'trials.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    lines = (tmp_path / 'a' / 'summary.csv').read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert lines[1].startswith('1.0,proposed_cont,')

def test_sweep_variable_override(runner, tmp_path):
    result = invoke(
        runner, 'sweep', '--variable', 'n_irs', '--values', '2,4', '-n', '1',
        '-s', 'random_irs', '-o', str(tmp_path),
    )
    assert result.exit_code == 0
    lines = (tmp_path / 'summary.csv').read_text().splitlines()
    assert [line.split(',')[0] for line in lines[1:]] == ['2', '4']

def test_sweep_resolutions(runner, tmp_path):
    result = invoke(
        runner, 'sweep', '--values', '1', '-n', '2', '-s', 'proposed_quant',
        '--resolutions', '2,1', '--convergence', '-o', str(tmp_path),
    )
    assert result.exit_code == 0
    assert result.output.splitlines()[-1] == str(tmp_path / 'convergence.csv')
    lines = (tmp_path / 'summary.csv').read_text().splitlines()
    assert [line.split(',')[1] for line in lines[1:]] == ['proposed_quant(1)', 'proposed_quant(2)']
    lines = (tmp_path / 'convergence.csv').read_text().splitlines()
    assert lines[0] == 'sweep_value,scheme,iteration,mean_rate,n_trials'
    assert lines[1].startswith('1.0,proposed_quant(1),0,')

    result = runner.invoke(cli, [
        '-c', str(CONF_FILE), 'sweep', '-s', 'proposed_quant', '--resolutions', '1.5',
        '-o', str(tmp_path / 'x'),
    ])
    assert result.exit_code == 2
    assert '--resolutions' in result.output

def test_sweep_invalid(runner, tmp_path):
    result = runner.invoke(cli, [
        '-c', str(CONF_FILE), 'sweep', '--values', '2,1', '-o', str(tmp_path),
    ])
    assert result.exit_code == 1
    assert 'strictly increasing' in result.output
    assert not (tmp_path / 'summary.csv').exists()

def test_validate(runner):
    result = invoke(runner, 'validate', '--seed', '1')
    lines = result.output.splitlines()
    assert len(lines) == 6
    names = [line.split(':')[0] for line in lines]
    assert names[:2] == ['diagonalization_error', 'off_diagonal_energy']
    failed = any('FAILED' in line for line in lines)
    assert result.exit_code == (1 if failed else 0)
    for line in lines[:5]:
        assert ': ok' in line
