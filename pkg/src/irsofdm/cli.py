"""Command line interface for single runs, sweeps and the oracle checks
"""
import functools
import io
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import click
from loguru import logger
from ruamel.yaml import YAML

from irsofdm.common import DomainError, EmitError, RECORD_FORMATS
from irsofdm.config import Config, OptionError
from irsofdm.scenario import SystemConfig, LinkGeometry
from irsofdm.optimizer import StoppingCriteria
from irsofdm.schemes import Scheme
from irsofdm.harness import (
    SWEEP_VARIABLES, SweepSpec, trial_inputs, run_sweep, emit, emit_convergence, emit_trace,
)
from irsofdm.oracle import validate_suite


@dataclass
class Settings:
    """Effective configuration: file sections with command line overrides
    """
    system: SystemConfig
    geometry: LinkGeometry
    stopping: StoppingCriteria
    sweep: Dict

    def to_dict(self) -> Dict:
        return {
            'system': self.system.to_dict(),
            'geometry': self.geometry.to_dict(),
            'stopping': self.stopping.to_dict(),
            'sweep': self.sweep_spec().to_dict(),
        }

    def sweep_spec(self, **overrides) -> SweepSpec:
        d = dict(self.sweep)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return SweepSpec.from_dict(d, self.system, self.geometry, self.stopping)


SYSTEM_OVERRIDES = {
    'seed': 'rng_seed',
    'tx_power': 'tx_power',
    'n_irs': 'n_irs',
    'quant_bits': 'quant_bits',
}

def load_settings(config: Config, overrides: Optional[Dict] = None) -> Settings:
    data = config.read()
    system = dict(data.get('system') or {})
    for opt_name, field_name in SYSTEM_OVERRIDES.items():
        value = (overrides or {}).get(opt_name)
        if value is not None:
            system[field_name] = value
    return Settings(
        system=SystemConfig.from_dict(system),
        geometry=LinkGeometry.from_dict(dict(data.get('geometry') or {})),
        stopping=StoppingCriteria.from_dict(dict(data.get('stopping') or {})),
        sweep=dict(data.get('sweep') or {}),
    )

def setup_logging(verbose: bool):
    logger.remove()
    logger.add(sys.stderr, level='DEBUG' if verbose else 'INFO')

def handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (DomainError, OptionError, EmitError) as exc:
            raise click.ClickException(str(exc))
    return wrapper

def system_options(f):
    f = click.option('--seed', type=int, help='Master seed')(f)
    f = click.option('--tx-power', 'tx_power', type=float, help='Transmit power (W)')(f)
    f = click.option('--n-irs', 'n_irs', type=int, help='Number of IRS elements')(f)
    f = click.option('--quant-bits', 'quant_bits', type=int, help='Phase resolution in bits')(f)
    return f

def output_options(f):
    f = click.option(
        '-o', '--output-dir', 'output_dir', envvar='IRSOFDM_OUTPUT_DIR',
        type=click.Path(file_okay=False, path_type=Path), default=Path('results'),
        show_default=True,
    )(f)
    f = click.option(
        '-f', '--format', 'fmt', type=click.Choice(RECORD_FORMATS), default='csv',
        show_default=True,
    )(f)
    return f

scheme_option = click.option(
    '-s', '--scheme', 'schemes', multiple=True,
    type=click.Choice(list(Scheme.get_all_names())),
    help='Scheme to run (may be repeated)',
)


@click.group()
@click.option(
    '-c', '--config', 'config_file',
    type=click.Path(dir_okay=False, path_type=Path),
    default=Config.DEFAULT_FILENAME, show_default=True,
)
@click.option('-v', '--verbose', is_flag=True, help='Enable debug logging')
@click.pass_context
def cli(ctx, config_file, verbose):
    setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj['config'] = Config(config_file)

@cli.command('show')
@system_options
@click.pass_context
@handle_errors
def show(ctx, **overrides):
    """Print the effective configuration
    """
    settings = load_settings(ctx.obj['config'], overrides)
    buf = io.StringIO()
    YAML().dump(settings.to_dict(), buf)
    click.echo(buf.getvalue(), nl=False)

@cli.command('run')
@system_options
@scheme_option
@click.option('-t', '--trial', default=0, type=int, show_default=True)
@output_options
@click.pass_context
@handle_errors
def run(ctx, schemes, trial, output_dir, fmt, **overrides):
    """Run a single trial and write its convergence trace
    """
    settings = load_settings(ctx.obj['config'], overrides)
    system = settings.system
    if not schemes:
        schemes = ('proposed_quant',) if system.quant_bits is not None else ('proposed_cont',)
    _, fc, phi0 = trial_inputs(system, settings.geometry, system.rng_seed, trial)
    for name in schemes:
        scheme = Scheme.create(name, system, settings.stopping)
        outcome = scheme.run(fc, phi0)
        dest = output_dir if len(schemes) == 1 else output_dir / scheme.label
        filename = emit_trace(outcome.state, dest, fmt)
        click.echo(
            f'{scheme.label}: sum_rate={outcome.sum_rate:.6f} bits/s/Hz, '
            f'outer_iters={outcome.outer_iters}, '
            f'inner_sweeps={outcome.inner_sweeps_total} -> {filename}'
        )

@cli.command('sweep')
@system_options
@scheme_option
@click.option('--variable', type=click.Choice(SWEEP_VARIABLES))
@click.option('--values', type=str, help='Comma-separated sweep values')
@click.option('-n', '--trials', 'n_trials', type=int, help='Trials per sweep value')
@click.option('-j', '--jobs', default=1, type=int, show_default=True, help='Worker processes')
@click.option('--resolutions', type=str, help='Comma-separated resolutions (bits) for proposed_quant')
@click.option('--convergence', is_flag=True, help='Also write the mean sum-rate per iteration')
@output_options
@click.pass_context
@handle_errors
def sweep(ctx, schemes, variable, values, n_trials, jobs, resolutions, convergence, output_dir, fmt, **overrides):
    """Run a Monte Carlo sweep and write summary and per-trial tables
    """
    settings = load_settings(ctx.obj['config'], overrides)
    if values is not None:
        values = [float(v) for v in values.split(',') if v.strip()]
    if resolutions is not None:
        try:
            resolutions = [int(v) for v in resolutions.split(',') if v.strip()]
        except ValueError:
            raise click.BadParameter('must be comma-separated integers', param_hint='--resolutions')
    spec = settings.sweep_spec(
        variable=variable, values=values, n_trials=n_trials,
        schemes=list(schemes) or None,
        quant_bits=resolutions,
    )
    results = run_sweep(spec, jobs)
    for filename in emit(results, output_dir, fmt):
        click.echo(str(filename))
    if convergence:
        click.echo(str(emit_convergence(results, output_dir, fmt)))

@cli.command('validate')
@click.option('--seed', default=0, type=int, show_default=True)
@click.pass_context
@handle_errors
def validate(ctx, seed):
    """Run the oracle checks on small random instances
    """
    results = validate_suite(seed)
    for r in results:
        status = 'ok' if r.passed else 'FAILED'
        line = f'{r.name}: {status} (value={r.value:.3g}, threshold={r.threshold:.3g})'
        if r.detail:
            line = f'{line} {r.detail}'
        click.echo(line)
    if not all(r.passed for r in results):
        ctx.exit(1)

if __name__ == '__main__':
    cli()
