"""Seeded Monte Carlo sweeps over the transmit power, the IRS size or the
phase resolution
"""
import asyncio
import dataclasses
import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from .common import ConfigError, DomainError, RECORD_FORMATS, write_records
from .config import Option, ListOption, validate_options
from .scenario import SystemConfig, LinkGeometry
from .channel import ChannelTaps, FrequencyChannels, sample_taps, to_frequency
from .metrics import PhaseVector
from .optimizer import OptimizerState, StoppingCriteria, write_trace
from .schemes import Scheme

__all__ = (
    'SWEEP_VARIABLES', 'DEFAULT_SCHEMES', 'default_schemes', 'SweepSpec', 'TrialResult',
    'SummaryRow', 'ConvergenceRow', 'SweepResults', 'trial_rng', 'trial_inputs',
    'run_trial', 'run_sweep_async', 'run_sweep', 'aggregate', 'aggregate_convergence',
    'emit', 'emit_convergence', 'emit_trace',
)

SWEEP_VARIABLES = ('tx_power', 'n_irs', 'quant_bits', 'none')
DEFAULT_SCHEMES = ('proposed_cont', 'random_irs', 'no_irs')
CHANNEL_STREAM = 0
PHASE_STREAM = 1

SUMMARY_FIELDS = ('sweep_value', 'scheme', 'mean_rate', 'stderr', 'mean_iters', 'n_trials')
TRIAL_FIELDS = (
    'sweep_value', 'trial', 'seed', 'scheme', 'sum_rate', 'outer_iters',
    'inner_sweeps_total', 'channel_digest', 'error',
)
CONVERGENCE_FIELDS = ('sweep_value', 'scheme', 'iteration', 'mean_rate', 'n_trials')


def trial_rng(master_seed: int, trial: int, stream: int) -> np.random.Generator:
    """Independent generator for one ``(trial, stream)`` pair

    Streams are keyed by ``spawn_key`` so adding trials never changes the
    draws of earlier ones.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial, stream))
    return np.random.default_rng(ss)

def trial_inputs(
    config: SystemConfig,
    geometry: LinkGeometry,
    master_seed: int,
    trial: int
) -> Tuple[ChannelTaps, FrequencyChannels, PhaseVector]:
    """Channel realization and shared initial phases of one trial
    """
    taps = sample_taps(config, geometry, trial_rng(master_seed, trial, CHANNEL_STREAM))
    fc = to_frequency(taps, config.n_subcarriers)
    phi0 = PhaseVector.random(config.n_irs, trial_rng(master_seed, trial, PHASE_STREAM))
    return taps, fc, phi0

def _as_ints(name: str, values: Sequence[Any]) -> Tuple[int, ...]:
    result = []
    for v in values:
        if isinstance(v, bool) or not float(v).is_integer():
            raise ConfigError(f'{name} values must be integers', v)
        result.append(int(v))
    return tuple(result)

def default_schemes(
    variable: str,
    base: SystemConfig,
    quant_bits: Sequence[int] = ()
) -> Tuple[str, ...]:
    """The reference schemes plus ``proposed_quant`` when a resolution is set
    or swept
    """
    schemes = list(DEFAULT_SCHEMES)
    if variable == 'quant_bits' or base.quant_bits is not None or len(quant_bits):
        schemes.insert(1, 'proposed_quant')
    return tuple(schemes)


@dataclass(frozen=True)
class SweepSpec:
    """Definition of a parameter sweep

    For ``variable='none'`` the values are ignored and a single point (the
    base configuration) is run.

    ``quant_bits`` lists the resolutions run by ``proposed_quant`` at every
    sweep point, giving one ``proposed_quant(b)`` row per entry. When empty
    the resolution comes from the base configuration (or from the sweep
    value for ``variable='quant_bits'``).
    """
    variable: str = 'none'
    values: Tuple[Any, ...] = ()
    n_trials: int = 100
    base: SystemConfig = field(default_factory=SystemConfig)
    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    schemes: Tuple[str, ...] = DEFAULT_SCHEMES
    stopping: StoppingCriteria = field(default_factory=StoppingCriteria)
    quant_bits: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f'Sweep variable must be one of {SWEEP_VARIABLES}', self.variable)
        values = tuple(self.values)
        if self.variable == 'none':
            values = (None,)
        else:
            if not len(values):
                raise ConfigError('Sweep values must not be empty')
            if self.variable in ('n_irs', 'quant_bits'):
                values = _as_ints(self.variable, values)
            else:
                values = tuple(float(v) for v in values)
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError('Sweep values must be strictly increasing', values)
        object.__setattr__(self, 'values', values)
        if self.n_trials < 1:
            raise ConfigError('n_trials must be >= 1', self.n_trials)
        schemes = tuple(self.schemes)
        if not len(schemes):
            raise ConfigError('At least one scheme is required')
        for name in schemes:
            Scheme.get_class(name)
        object.__setattr__(self, 'schemes', schemes)

        quant_bits = _as_ints('quant_bits', self.quant_bits)
        if any(b < 1 for b in quant_bits):
            raise ConfigError('Resolutions must be >= 1', quant_bits)
        if len(set(quant_bits)) != len(quant_bits):
            raise ConfigError('Resolutions must not repeat', quant_bits)
        if len(quant_bits) and self.variable == 'quant_bits':
            raise ConfigError('A resolution list can not be combined with a quant_bits sweep', quant_bits)
        object.__setattr__(self, 'quant_bits', tuple(sorted(quant_bits)))
        if 'proposed_quant' in schemes and self.variable != 'quant_bits':
            if self.base.quant_bits is None and not len(quant_bits):
                raise ConfigError('proposed_quant requires quant_bits (or a quant_bits sweep)')
        for value in values:
            # building the configs validates every sweep point
            list(self.scheme_runs(value))

    @property
    def master_seed(self) -> int:
        return self.base.rng_seed

    def config_for(self, value: Any) -> SystemConfig:
        """The system configuration at one sweep point
        """
        if self.variable == 'none':
            return self.base
        return self.base.replace(**{self.variable: value})

    def scheme_runs(self, value: Any) -> Iterator[Tuple[str, SystemConfig]]:
        """``(scheme name, config)`` of every scheme run of a trial at
        ``value``, in output order
        """
        config = self.config_for(value)
        for name in self.schemes:
            if name == 'proposed_quant' and len(self.quant_bits):
                for b in self.quant_bits:
                    yield name, config.replace(quant_bits=b)
            else:
                yield name, config

    def replace(self, **kwargs) -> 'SweepSpec':
        return dataclasses.replace(self, **kwargs)

    @classmethod
    def get_init_options(cls) -> Tuple[Option]:
        return (
            Option(name='variable', type=str, required=False, default='none', choices=SWEEP_VARIABLES),
            ListOption(name='values', type=float, required=False),
            Option(name='n_trials', type=int, required=False, default=100, min_value=1),
            ListOption(name='schemes', type=str, required=False),
            ListOption(name='quant_bits', type=int, required=False, min_value=1),
        )

    @classmethod
    def from_dict(
        cls,
        d: Dict,
        base: Optional[SystemConfig] = None,
        geometry: Optional[LinkGeometry] = None,
        stopping: Optional[StoppingCriteria] = None
    ) -> 'SweepSpec':
        """Create from the ``sweep`` section of a config file
        """
        kw = validate_options(cls.get_init_options(), d)
        kw['values'] = tuple(kw['values'])
        kw['quant_bits'] = tuple(kw['quant_bits'])
        kw['base'] = base if base is not None else SystemConfig()
        if d.get('schemes'):
            kw['schemes'] = tuple(kw['schemes'])
        else:
            kw['schemes'] = default_schemes(kw['variable'], kw['base'], kw['quant_bits'])
        kw['geometry'] = geometry if geometry is not None else LinkGeometry()
        kw['stopping'] = stopping if stopping is not None else StoppingCriteria()
        return cls(**kw)

    def to_dict(self) -> Dict:
        return {
            'variable': self.variable,
            'values': [] if self.variable == 'none' else list(self.values),
            'n_trials': self.n_trials,
            'schemes': list(self.schemes),
            'quant_bits': list(self.quant_bits),
        }


@dataclass(frozen=True)
class TrialResult:
    """One scheme run on one channel realization

    ``wall_time`` is informational and never written by :func:`emit`.
    """
    sweep_value: Any
    trial: int
    seed: int #: The master seed (the realization is keyed by ``(seed, trial)``)
    scheme: str #: Scheme label, e.g. ``proposed_quant(2)``
    sum_rate: float
    outer_iters: int
    inner_sweeps_total: int
    wall_time: float = 0.
    channel_digest: str = ''
    error: Optional[str] = None
    rate_trace: Tuple[float, ...] = field(default=(), repr=False)
    """Sum-rate after every outer iteration, starting with the initial point"""

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict:
        return {key: getattr(self, key) for key in TRIAL_FIELDS}


@dataclass(frozen=True)
class SummaryRow:
    sweep_value: Any
    scheme: str
    mean_rate: float
    stderr: float
    mean_iters: float
    n_trials: int #: Number of successful trials
    n_failed: int = 0

    def to_dict(self) -> Dict:
        return {key: getattr(self, key) for key in SUMMARY_FIELDS}


@dataclass(frozen=True)
class ConvergenceRow:
    sweep_value: Any
    scheme: str
    iteration: int
    mean_rate: float #: Mean sum-rate over the padded traces
    n_trials: int

    def to_dict(self) -> Dict:
        return {key: getattr(self, key) for key in CONVERGENCE_FIELDS}


@dataclass
class SweepResults:
    spec: SweepSpec
    trials: List[TrialResult]
    summary: List[SummaryRow]


def _scheme_label(name: str, config: SystemConfig) -> str:
    if name == 'proposed_quant' and config.quant_bits is not None:
        return f'{name}({config.quant_bits})'
    return name

def run_trial(spec: SweepSpec, value: Any, trial: int) -> List[TrialResult]:
    """Run every scheme of ``spec`` on the realization of ``trial`` at one
    sweep point

    All schemes see the same channels and the same initial phases. Failures
    are returned as results with :attr:`TrialResult.error` set.
    """
    config = spec.config_for(value)
    seed = spec.master_seed
    results = []
    try:
        taps, fc, phi0 = trial_inputs(config, spec.geometry, seed, trial)
        digest = taps.digest()
    except Exception as exc:
        logger.warning(f'Trial {trial} at {spec.variable}={value} failed: {exc}')
        for name, run_config in spec.scheme_runs(value):
            results.append(TrialResult(
                sweep_value=value, trial=trial, seed=seed,
                scheme=_scheme_label(name, run_config), sum_rate=math.nan,
                outer_iters=0, inner_sweeps_total=0, error=str(exc),
            ))
        return results
    for name, run_config in spec.scheme_runs(value):
        label = _scheme_label(name, run_config)
        start = time.perf_counter()
        try:
            outcome = Scheme.create(name, run_config, spec.stopping).run(fc, phi0)
        except Exception as exc:
            logger.warning(f'{label} failed on trial {trial} at {spec.variable}={value}: {exc}')
            results.append(TrialResult(
                sweep_value=value, trial=trial, seed=seed, scheme=label,
                sum_rate=math.nan, outer_iters=0, inner_sweeps_total=0,
                wall_time=time.perf_counter() - start, channel_digest=digest,
                error=str(exc),
            ))
            continue
        results.append(TrialResult(
            sweep_value=value, trial=trial, seed=seed, scheme=label,
            sum_rate=outcome.sum_rate,
            outer_iters=outcome.outer_iters,
            inner_sweeps_total=outcome.inner_sweeps_total,
            wall_time=time.perf_counter() - start,
            channel_digest=digest,
            rate_trace=tuple(record.sum_rate for record in outcome.state.trace),
        ))
    return results

def _label_bits(label: str) -> int:
    if '(' not in label:
        return -1
    return int(label[label.index('(')+1:-1])

def _sort_key(spec: SweepSpec):
    value_index = {v: i for i, v in enumerate(spec.values)}
    def key(r: TrialResult):
        name = r.scheme.split('(')[0]
        return (value_index[r.sweep_value], r.trial, spec.schemes.index(name), _label_bits(r.scheme))
    return key

def aggregate(spec: SweepSpec, trials: Sequence[TrialResult]) -> List[SummaryRow]:
    """Mean and standard error of the sum-rate per ``(sweep value, scheme)``

    Failed trials are excluded and counted in :attr:`SummaryRow.n_failed`.
    """
    groups: Dict[Tuple[Any, str], List[TrialResult]] = {}
    for r in sorted(trials, key=_sort_key(spec)):
        groups.setdefault((r.sweep_value, r.scheme), []).append(r)
    rows = []
    for (value, scheme), group in groups.items():
        ok = [r for r in group if r.ok]
        n_failed = len(group) - len(ok)
        if n_failed:
            logger.warning(f'{n_failed} failed trial(s) excluded for {scheme} at {value}')
        rates = np.array([r.sum_rate for r in ok])
        iters = np.array([r.outer_iters for r in ok])
        if len(ok):
            mean_rate = float(np.mean(rates))
            mean_iters = float(np.mean(iters))
        else:
            mean_rate = mean_iters = math.nan
        if len(ok) > 1:
            stderr = float(np.std(rates, ddof=1) / np.sqrt(len(ok)))
        else:
            stderr = 0.
        rows.append(SummaryRow(
            sweep_value=value, scheme=scheme, mean_rate=mean_rate,
            stderr=stderr, mean_iters=mean_iters, n_trials=len(ok),
            n_failed=n_failed,
        ))
    return rows

def aggregate_convergence(spec: SweepSpec, trials: Sequence[TrialResult]) -> List[ConvergenceRow]:
    """Mean sum-rate per outer iteration for every ``(sweep value, scheme)``

    Traces that stopped early are padded with their final value up to the
    longest trace of the group. Failed trials are left out.
    """
    groups: Dict[Tuple[Any, str], List[Tuple[float, ...]]] = {}
    for r in sorted(trials, key=_sort_key(spec)):
        traces = groups.setdefault((r.sweep_value, r.scheme), [])
        if r.ok and len(r.rate_trace):
            traces.append(r.rate_trace)
    rows = []
    for (value, scheme), traces in groups.items():
        if not traces:
            continue
        length = max(len(t) for t in traces)
        padded = np.array([t + (t[-1],) * (length - len(t)) for t in traces])
        for iteration, mean_rate in enumerate(padded.mean(axis=0)):
            rows.append(ConvergenceRow(
                sweep_value=value, scheme=scheme, iteration=iteration,
                mean_rate=float(mean_rate), n_trials=len(traces),
            ))
    return rows

async def run_sweep_async(
    spec: SweepSpec,
    jobs: int = 1,
    executor: Optional[Executor] = None
) -> SweepResults:
    """Run all ``(value, trial)`` pairs of the sweep

    With ``jobs > 1`` (or an explicit ``executor``) trials run in worker
    processes. Results are ordered by sweep value, trial and scheme so the
    outcome does not depend on completion order.
    """
    if jobs < 1:
        raise DomainError('jobs must be >= 1', jobs)
    loop = asyncio.get_running_loop()
    pairs = [(value, trial) for value in spec.values for trial in range(spec.n_trials)]
    logger.info(
        f'Sweeping {spec.variable} over {len(spec.values)} value(s), '
        f'{spec.n_trials} trial(s), schemes {", ".join(spec.schemes)}'
    )
    own_executor = None
    if executor is None and jobs > 1:
        own_executor = executor = ProcessPoolExecutor(max_workers=jobs)

    async def do_trial(value, trial):
        if executor is None:
            result = run_trial(spec, value, trial)
            await asyncio.sleep(0)
        else:
            result = await loop.run_in_executor(executor, run_trial, spec, value, trial)
        logger.info(f'trial {trial} at {spec.variable}={value} done')
        return result

    try:
        if executor is None:
            batches = [await do_trial(value, trial) for value, trial in pairs]
        else:
            batches = await asyncio.gather(*[do_trial(value, trial) for value, trial in pairs])
    finally:
        if own_executor is not None:
            own_executor.shutdown()
    trials = sorted((r for batch in batches for r in batch), key=_sort_key(spec))
    summary = aggregate(spec, trials)
    logger.success(f'Sweep complete: {len(trials)} result(s)')
    return SweepResults(spec=spec, trials=trials, summary=summary)

def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResults:
    """Synchronous wrapper around :func:`run_sweep_async`
    """
    return asyncio.run(run_sweep_async(spec, jobs))

def emit(
    results: SweepResults,
    path: Union[str, Path],
    fmt: str = 'csv'
) -> List[Path]:
    """Write ``summary.<fmt>`` and ``trials.<fmt>`` into the directory ``path``

    Output depends only on the results (wall times are not written), so
    identical configurations and seeds give byte-identical files.

    Raises:
        DomainError: If there is nothing to write or ``fmt`` is unknown
        EmitError: If a file can not be written
    """
    if fmt not in RECORD_FORMATS:
        raise DomainError(f'Output format must be one of {RECORD_FORMATS}', fmt)
    if not results.summary or not results.trials:
        raise DomainError('No results to emit')
    path = Path(path)
    summary = write_records(
        path / f'summary.{fmt}', SUMMARY_FIELDS,
        [row.to_dict() for row in results.summary], fmt,
    )
    trials = write_records(
        path / f'trials.{fmt}', TRIAL_FIELDS,
        [r.to_dict() for r in results.trials], fmt,
    )
    logger.info(f'Results written to "{path}"')
    return [summary, trials]

def emit_convergence(
    results: SweepResults,
    path: Union[str, Path],
    fmt: str = 'csv'
) -> Path:
    """Write the mean sum-rate per outer iteration to ``convergence.<fmt>``
    in the directory ``path``
    """
    if fmt not in RECORD_FORMATS:
        raise DomainError(f'Output format must be one of {RECORD_FORMATS}', fmt)
    rows = aggregate_convergence(results.spec, results.trials)
    if not rows:
        raise DomainError('No convergence traces to emit')
    return write_records(
        Path(path) / f'convergence.{fmt}', CONVERGENCE_FIELDS,
        [row.to_dict() for row in rows], fmt,
    )

def emit_trace(state: OptimizerState, path: Union[str, Path], fmt: str = 'csv') -> Path:
    """Write the convergence trace of one run to ``trace.<fmt>`` in ``path``
    """
    if not state.trace:
        raise DomainError('No trace to emit')
    return write_trace(state, Path(path) / f'trace.{fmt}', fmt)
