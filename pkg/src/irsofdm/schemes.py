"""Transmission schemes compared by the sweep harness

Schemes are registered by name through a keyword argument in the subclass
definition::

    >>> class MyScheme(Scheme, name='mine', final=True):
    ...     def run(self, fc, phi0):
    ...         ...

    >>> Scheme.get_class('mine')
    <class 'MyScheme'>
"""
from dataclasses import dataclass, field
from typing import ClassVar, Dict, Iterable, Optional, Type

from .common import ConfigError
from .scenario import SystemConfig
from .channel import FrequencyChannels
from .metrics import PhaseVector, sum_rate
from .optimizer import OptimizerState, StoppingCriteria, Optimizer, initialize
from .oracle import baseline

__all__ = (
    'SchemeOutcome', 'Scheme', 'ProposedContinuous', 'ProposedQuantized',
    'RandomIRS', 'NoIRS',
)


@dataclass(frozen=True)
class SchemeOutcome:
    sum_rate: float
    outer_iters: int
    inner_sweeps_total: int
    state: OptimizerState = field(repr=False)


class Scheme:
    """Base class for schemes

    Arguments:
        config: System parameters of the trial
        stopping: Termination rules for the descent
    """

    name: ClassVar[str]
    """Registry key given to subclasses with ``final=True``"""

    __registry: ClassVar[Dict[str, Type['Scheme']]] = {}

    def __init_subclass__(cls, name=None, final=False, **kwargs):
        super().__init_subclass__(**kwargs)
        if name is None:
            return
        cls.name = name
        if final:
            assert name not in Scheme._Scheme__registry
            Scheme._Scheme__registry[name] = cls

    def __init__(self, config: SystemConfig, stopping: Optional[StoppingCriteria] = None):
        self.config = config
        self.stopping = stopping if stopping is not None else StoppingCriteria()

    @classmethod
    def get_class(cls, name: str) -> Type['Scheme']:
        """Get the :class:`Scheme` subclass registered as ``name``

        Raises:
            ConfigError: If no scheme is registered with that name
        """
        try:
            return Scheme.__registry[name]
        except KeyError:
            raise ConfigError(f'Unknown scheme, choose from {tuple(cls.get_all_names())}', name)

    @classmethod
    def get_all_names(cls) -> Iterable[str]:
        yield from sorted(Scheme.__registry.keys())

    @classmethod
    def create(
        cls,
        name: str,
        config: SystemConfig,
        stopping: Optional[StoppingCriteria] = None
    ) -> 'Scheme':
        return cls.get_class(name)(config, stopping)

    @property
    def label(self) -> str:
        """Name used in result tables
        """
        return self.name

    def run(self, fc: FrequencyChannels, phi0: PhaseVector) -> SchemeOutcome:
        """Run the scheme on one channel realization

        Arguments:
            fc: The frequency-domain channels
            phi0: Continuous phases shared by every scheme of the trial (the
                starting point of the proposed schemes and the phases of the
                random-IRS reference)
        """
        raise NotImplementedError

    def _outcome(self, fc: FrequencyChannels, state: OptimizerState) -> SchemeOutcome:
        return SchemeOutcome(
            sum_rate=sum_rate(fc, state.phi, state.W, self.config.noise_power),
            outer_iters=state.outer_iters,
            inner_sweeps_total=state.inner_sweeps_total,
            state=state,
        )

    def __repr__(self):
        return f'<{self.__class__.__name__}: {self.label}>'


class ProposedContinuous(Scheme, name='proposed_cont', final=True):
    """Joint design with continuous phases
    """
    def run(self, fc: FrequencyChannels, phi0: PhaseVector) -> SchemeOutcome:
        init = initialize(self.config, fc, phi=PhaseVector(phi0.phi))
        state = Optimizer(self.config, self.stopping, quant_bits=None).run(fc, init)
        return self._outcome(fc, state)


class ProposedQuantized(Scheme, name='proposed_quant', final=True):
    """Joint design with ``b``-bit phase shifters (``config.quant_bits``)

    The shared starting phases are snapped to the grid.
    """
    def __init__(self, config: SystemConfig, stopping: Optional[StoppingCriteria] = None):
        if config.quant_bits is None:
            raise ConfigError('proposed_quant requires quant_bits')
        super().__init__(config, stopping)

    @property
    def label(self) -> str:
        return f'{self.name}({self.config.quant_bits})'

    def run(self, fc: FrequencyChannels, phi0: PhaseVector) -> SchemeOutcome:
        b = self.config.quant_bits
        init = initialize(self.config, fc, phi=PhaseVector.from_angles(phi0.angles, b))
        state = Optimizer(self.config, self.stopping, quant_bits=b).run(fc, init)
        return self._outcome(fc, state)


class RandomIRS(Scheme, name='random_irs', final=True):
    """Beamformers optimized for the shared random phases, IRS left as drawn
    """
    def run(self, fc: FrequencyChannels, phi0: PhaseVector) -> SchemeOutcome:
        result = baseline(fc, 'random_irs', self.config, stopping=self.stopping, phi=PhaseVector(phi0.phi))
        return SchemeOutcome(
            sum_rate=result.sum_rate,
            outer_iters=result.state.outer_iters,
            inner_sweeps_total=0,
            state=result.state,
        )


class NoIRS(Scheme, name='no_irs', final=True):
    """Beamformers optimized for the direct links only
    """
    def run(self, fc: FrequencyChannels, phi0: PhaseVector) -> SchemeOutcome:
        result = baseline(fc, 'no_irs', self.config, stopping=self.stopping)
        return SchemeOutcome(
            sum_rate=result.sum_rate,
            outer_iters=result.state.outer_iters,
            inner_sweeps_total=0,
            state=result.state,
        )
