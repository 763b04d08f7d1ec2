"""Joint beamformer and IRS phase design by block coordinate descent

The sum-rate problem is handled through its weighted-MSE form. Each outer
iteration updates four blocks in a fixed order, each with a closed form:

* the MSE weights ``rho`` (:func:`update_rho`)
* the receive scalars ``varpi`` (:func:`update_varpi`)
* the beamformers ``W`` (:func:`update_beamformers`)
* the IRS phases, by element-wise sweeps over the quadratic built by
  :func:`build_phi_quadratic` (:func:`sweep_phi`)
"""
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from loguru import logger
from pydispatch import Dispatcher

from .common import (
    ComplexArray, RealArray, DomainError, relative_change, as_complex,
    write_records,
)
from .config import Option, validate_options
from .scenario import SystemConfig
from .channel import FrequencyChannels, effective_channels
from .metrics import (
    BeamformerSet, PhaseVector, phase_step, gain_matrix, mse_matrix,
    sum_rate, wmmse_objective,
)

__all__ = (
    'StoppingCriteria', 'TraceRecord', 'OptimizerState', 'PhiQuadratic',
    'SweepResult', 'update_rho', 'update_varpi', 'update_beamformers',
    'build_phi_quadratic', 'update_phi_element', 'quantize_phi_element',
    'sweep_phi', 'initialize', 'Optimizer', 'run', 'write_trace',
)

GRAM_EPS = 1e-12
RATE_SLACK = 1e-12


@dataclass(frozen=True)
class StoppingCriteria:
    """Termination rules for the outer loop and the inner phase sweeps
    """
    tol: float = 1e-4 #: Relative change of the weighted-MSE objective that ends the outer loop
    max_outer: int = 100 #: Maximum number of outer iterations
    phi_tol: float = 1e-6 #: Relative objective change that ends a phase sweep
    max_sweeps: int = 50 #: Maximum number of full passes per phase sweep

    def __post_init__(self):
        if self.tol <= 0 or self.phi_tol <= 0:
            raise DomainError('Tolerances must be positive', (self.tol, self.phi_tol))
        if self.max_outer < 1 or self.max_sweeps < 1:
            raise DomainError('Iteration limits must be >= 1', (self.max_outer, self.max_sweeps))

    @classmethod
    def get_init_options(cls) -> Tuple[Option]:
        return (
            Option(name='tol', type=float, required=False, default=1e-4, min_value=0),
            Option(name='max_outer', type=int, required=False, default=100, min_value=1),
            Option(name='phi_tol', type=float, required=False, default=1e-6, min_value=0),
            Option(name='max_sweeps', type=int, required=False, default=50, min_value=1),
        )

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Dict) -> 'StoppingCriteria':
        return cls(**validate_options(cls.get_init_options(), d))


@dataclass(frozen=True)
class TraceRecord:
    """Diagnostics of one outer iteration (iteration 0 is the initial point)
    """
    iteration: int
    wmmse_objective: float
    sum_rate: float
    power_residual: float
    phi_feasibility_residual: float
    inner_sweeps: int = 0
    sweep_converged: bool = True
    rate_decreased: bool = False
    zero_beamformer: bool = False

    FIELDS: ClassVar[Tuple[str, ...]] = (
        'iteration', 'wmmse_objective', 'sum_rate', 'power_residual',
        'phi_feasibility_residual', 'inner_sweeps', 'sweep_converged',
        'rate_decreased', 'zero_beamformer',
    )

    def to_dict(self) -> Dict:
        return {key: getattr(self, key) for key in self.FIELDS}


@dataclass
class OptimizerState:
    """The current iterate together with its weights and trace
    """
    W: BeamformerSet
    phi: PhaseVector
    rho: RealArray #: MSE weights, shape ``(N, K)``
    varpi: ComplexArray #: Receive scalars, shape ``(N, K)``
    trace: List[TraceRecord] = field(default_factory=list)
    converged: bool = False

    def copy(self) -> 'OptimizerState':
        return OptimizerState(
            W=self.W, phi=self.phi, rho=self.rho.copy(), varpi=self.varpi.copy(),
            trace=list(self.trace), converged=self.converged,
        )

    @property
    def objective_trace(self) -> List[Tuple[int, float, float]]:
        """``(iteration, wmmse_objective, sum_rate)`` for every record
        """
        return [(r.iteration, r.wmmse_objective, r.sum_rate) for r in self.trace]

    @property
    def outer_iters(self) -> int:
        return sum(1 for r in self.trace if r.iteration > 0)

    @property
    def inner_sweeps_total(self) -> int:
        return sum(r.inner_sweeps for r in self.trace)

    @property
    def sum_rate(self) -> Optional[float]:
        """Sum-rate of the last recorded iteration
        """
        if not self.trace:
            return None
        return self.trace[-1].sum_rate


@dataclass(frozen=True)
class PhiQuadratic:
    """The phase subproblem ``phi^H A phi - 2 Re{phi^H b}``
    """
    A: ComplexArray #: Hermitian positive semidefinite ``(M, M)`` matrix
    b: ComplexArray #: Linear term of length ``M``

    @property
    def n_elements(self) -> int:
        return self.b.size

    def evaluate(self, phi) -> float:
        phi = as_complex(getattr(phi, 'phi', phi))
        quad = np.real(np.vdot(phi, self.A @ phi))
        lin = np.real(np.vdot(phi, self.b))
        return float(quad - 2 * lin)

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.A - self.A.conj().T), initial=0.))

    def min_eigenvalue(self) -> float:
        if not self.b.size:
            return 0.
        return float(scipy.linalg.eigvalsh(self.A)[0])

    def is_hermitian_psd(self, herm_tol: float = 1e-12, psd_tol: float = 1e-9) -> bool:
        """Check ``A = A^H`` and the eigenvalue floor ``-psd_tol * ||A||``
        """
        scale = float(np.linalg.norm(self.A, 2)) if self.b.size else 0.
        if self.hermitian_residual() > herm_tol * max(scale, 1.):
            return False
        return self.min_eigenvalue() >= -psd_tol * scale


@dataclass(frozen=True)
class SweepResult:
    """Outcome of :func:`sweep_phi`
    """
    phi: PhaseVector
    sweeps: int #: Number of full passes performed
    converged: bool
    objective_trace: Tuple[float, ...] #: Objective before the first and after every pass


def _eff(fc: FrequencyChannels, state: OptimizerState, eff: Optional[ComplexArray]) -> ComplexArray:
    if eff is None:
        return effective_channels(fc, state.phi)
    return eff

def update_rho(
    state: OptimizerState,
    fc: FrequencyChannels,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> RealArray:
    """``rho = 1 / MSE`` at the current ``(W, phi, varpi)``

    Raises:
        DomainError: If any MSE is not positive (numerical breakdown)
    """
    m = mse_matrix(fc, state.phi, state.W, state.varpi, sigma2, _eff(fc, state, eff))
    if np.any(m <= 0):
        raise DomainError('MSE must be positive', float(np.min(m)))
    return 1 / m

def update_varpi(
    state: OptimizerState,
    fc: FrequencyChannels,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> ComplexArray:
    """MMSE receive scalars ``(h_hat^H w_k) / (sum_p |h_hat^H w_p|^2 + sigma2)``
    """
    g = gain_matrix(_eff(fc, state, eff), state.W)
    total = np.sum(np.abs(g) ** 2, axis=2)
    return np.einsum('ikk->ik', g) / (total + sigma2)

def update_beamformers(
    state: OptimizerState,
    fc: FrequencyChannels,
    rho: RealArray,
    varpi: ComplexArray,
    tx_power: float,
    eff: Optional[ComplexArray] = None
) -> BeamformerSet:
    """Unconstrained weighted-MSE beamformers followed by one common power
    normalization

    Per subcarrier the system ``(sum_p rho_p h_p h_p^H + eps I) w_k = rho_k h_k``
    is solved for the equivalent channels ``h_k = varpi_k h_hat_k``, with
    ``eps = 1e-12 * trace / N_t``. All vectors are then scaled by
    ``sqrt(P / sum ||w||^2)``. If every vector is zero the returned set is
    zero (see :attr:`TraceRecord.zero_beamformer`).

    Raises:
        DomainError: If any ``rho`` is not positive
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError('Weights rho must be positive', float(np.min(rho)))
    h_eq = varpi[..., np.newaxis] * _eff(fc, state, eff)
    gram = np.einsum('ik,ikn,ikm->inm', rho, h_eq, h_eq.conj())
    Nt = gram.shape[-1]
    trace = np.real(np.einsum('inn->i', gram))
    eps = np.where(trace > 0, GRAM_EPS * trace / Nt, 1.)
    gram = gram + eps[:, np.newaxis, np.newaxis] * np.eye(Nt)
    rhs = (rho[..., np.newaxis] * h_eq).transpose(0, 2, 1)
    w = np.linalg.solve(gram, rhs).transpose(0, 2, 1)
    total = float(np.sum(np.abs(w) ** 2))
    if total == 0:
        logger.warning('All beamformers are zero, power normalization skipped')
        return BeamformerSet(np.zeros_like(w))
    return BeamformerSet(w * np.sqrt(tx_power / total))

def _phi_vectors(fc: FrequencyChannels, W) -> Tuple[ComplexArray, ComplexArray]:
    w = as_complex(getattr(W, 'w', W))
    Gw = np.einsum('imn,ipn->ipm', fc.bs_irs, w)
    v = np.einsum('ikm,ipm->ikpm', fc.irs_user, Gw.conj())
    hbar = np.einsum('ikn,ipn->ikp', fc.direct.conj(), w)
    return v, hbar

def build_phi_quadratic(
    fc: FrequencyChannels,
    W,
    rho: RealArray,
    varpi: ComplexArray
) -> PhiQuadratic:
    """Collect the terms of the weighted MSE sum that depend on ``phi``

    With ``v[i, k, p, m] = h^r[i, k, m] * conj((G_i w_{i,p})_m)`` and
    ``hbar[i, k, p] = h^d[i, k]^H w_{i,p}``, the gains are
    ``h_hat^H w_p = hbar + v^H phi`` and

    * ``A = sum rho |varpi|^2 sum_p v v^H``
    * ``b = sum rho (varpi v_kk - |varpi|^2 sum_p v hbar)``

    so that ``phi^H A phi - 2 Re{phi^H b}`` differs from
    ``sum_{i,k} rho * MSE`` by a term independent of ``phi``.
    """
    varpi = as_complex(varpi)
    rho = np.asarray(rho, dtype=float)
    v, hbar = _phi_vectors(fc, W)
    weight = rho * np.abs(varpi) ** 2
    A = np.einsum('ik,ikpm,ikpn->mn', weight, v, v.conj(), optimize=True)
    A = (A + A.conj().T) / 2
    v_kk = np.einsum('ikkm->ikm', v)
    b = np.einsum('ik,ikm->m', rho * varpi, v_kk)
    b = b - np.einsum('ik,ikpm,ikp->m', weight, v, hbar, optimize=True)
    return PhiQuadratic(A=A, b=b)

def _element_target(quad: PhiQuadratic, phi: ComplexArray, m: int) -> complex:
    coupling = quad.A[m] @ phi - quad.A[m, m] * phi[m]
    return quad.b[m] - coupling

def update_phi_element(quad: PhiQuadratic, phi, m: int) -> complex:
    """Conditionally optimal unit-modulus value of element ``m``

    ``c = b_m - sum_{n != m} A_mn phi_n`` and the result is ``c / |c|``.
    When ``c == 0`` every phase is optimal and the current value is kept.
    """
    phi = as_complex(getattr(phi, 'phi', phi))
    c = _element_target(quad, phi, m)
    if c == 0:
        return complex(phi[m])
    return complex(c / abs(c))

def quantize_phi_element(quad: PhiQuadratic, phi, m: int, b_bits: Union[int, float]) -> complex:
    """Best grid phase for element ``m``: ``exp(j round(angle(c) / delta) delta)``
    """
    delta = phase_step(b_bits)
    if delta is None:
        return update_phi_element(quad, phi, m)
    phi = as_complex(getattr(phi, 'phi', phi))
    c = _element_target(quad, phi, m)
    if c == 0:
        return complex(phi[m])
    return complex(np.exp(1j * np.round(np.angle(c) / delta) * delta))

def sweep_phi(
    quad: PhiQuadratic,
    phi: PhaseVector,
    quant_bits: Optional[Union[int, float]] = None,
    tol: float = 1e-6,
    max_sweeps: int = 50
) -> SweepResult:
    """Repeat element-wise updates over ``m = 0 .. M-1`` until convergence

    A sweep ends the loop when the objective changes by less than ``tol``
    (relative) or when a full pass leaves every element unchanged.
    Continuous mode is selected by ``quant_bits`` of ``None`` or ``math.inf``.
    """
    values = np.array(getattr(phi, 'phi', phi), dtype=np.complex128)
    quantized = phase_step(quant_bits) is not None
    objective = quad.evaluate(values)
    trace = [objective]
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        changed = False
        for m in range(values.size):
            if quantized:
                new = quantize_phi_element(quad, values, m, quant_bits)
            else:
                new = update_phi_element(quad, values, m)
            if new != values[m]:
                changed = True
                values[m] = new
        prev, objective = objective, quad.evaluate(values)
        trace.append(objective)
        if not changed or relative_change(prev, objective) < tol:
            converged = True
            break
    if not converged:
        logger.warning(f'Phase sweep did not converge within {max_sweeps} passes')
    return SweepResult(
        phi=PhaseVector(values, quant_bits),
        sweeps=sweeps,
        converged=converged,
        objective_trace=tuple(trace),
    )

def initialize(
    config: SystemConfig,
    fc: FrequencyChannels,
    rng: Optional[np.random.Generator] = None,
    quant_bits: Optional[Union[int, float]] = None,
    phi: Optional[PhaseVector] = None
) -> OptimizerState:
    """Build the starting point of the descent

    The phases are uniform on ``[0, 2 pi)`` (grid-snapped in quantized mode)
    unless ``phi`` is given. The beamformers are matched filters to the
    initial effective channels scaled to the transmit power. ``varpi`` and
    ``rho`` start at their optimal values for that point.
    """
    if phi is None:
        if rng is None:
            raise DomainError('Either rng or phi is required')
        phi = PhaseVector.random(fc.n_irs, rng, quant_bits)
    eff = effective_channels(fc, phi)
    W = BeamformerSet(eff)
    if W.total_power() == 0:
        logger.warning('Initial effective channels are zero')
    else:
        W = W.normalized(config.tx_power)
    shape = eff.shape[:2]
    state = OptimizerState(
        W=W, phi=phi,
        rho=np.ones(shape), varpi=np.zeros(shape, dtype=np.complex128),
    )
    state.varpi = update_varpi(state, fc, config.noise_power, eff)
    state.rho = update_rho(state, fc, config.noise_power, eff)
    return state


class Optimizer(Dispatcher):
    """Runs the outer block coordinate descent loop

    Arguments:
        config: System parameters (noise power, transmit power and the
            default phase resolution)
        stopping: Termination rules
        quant_bits: Phase resolution. Defaults to
            :attr:`.scenario.SystemConfig.quant_bits`; ``None`` or
            ``math.inf`` selects continuous phases
        freeze_phi: If ``True`` the phase block is skipped (used by the
            baseline schemes)

    :Events:
        .. event:: on_block_update(optimizer: Optimizer, block: str, iteration: int, objective: float)

            Fired after each block update with the weighted-MSE objective of
            the updated state. ``block`` is one of ``'rho'``, ``'varpi'``,
            ``'W'`` or ``'phi'``

        .. event:: on_iteration(optimizer: Optimizer, record: TraceRecord)

            Fired at the end of every outer iteration

        .. event:: on_converged(optimizer: Optimizer, state: OptimizerState)

            Fired when :meth:`run` returns. ``state.converged`` tells whether
            the tolerance was reached
    """
    _events_ = ['on_block_update', 'on_iteration', 'on_converged']

    _unset = object()

    def __init__(
        self,
        config: SystemConfig,
        stopping: Optional[StoppingCriteria] = None,
        quant_bits=_unset,
        freeze_phi: bool = False
    ):
        self.config = config
        self.stopping = stopping if stopping is not None else StoppingCriteria()
        if quant_bits is self._unset:
            quant_bits = config.quant_bits
        self.quant_bits = quant_bits
        self.freeze_phi = freeze_phi

    def _objective(self, fc, state, eff) -> float:
        return wmmse_objective(
            fc, state.phi, state.W, state.rho, state.varpi, self.config.noise_power, eff,
        )

    def _record(self, fc, state, eff, iteration, **flags) -> TraceRecord:
        return TraceRecord(
            iteration=iteration,
            wmmse_objective=self._objective(fc, state, eff),
            sum_rate=sum_rate(fc, state.phi, state.W, self.config.noise_power, eff),
            power_residual=state.W.power_residual(self.config.tx_power),
            phi_feasibility_residual=state.phi.feasibility_residual(),
            **flags
        )

    def run(self, fc: FrequencyChannels, init: OptimizerState) -> OptimizerState:
        """Iterate until the relative change of the weighted-MSE objective drops below
        :attr:`StoppingCriteria.tol` or :attr:`StoppingCriteria.max_outer`
        iterations have run

        The given ``init`` state is not modified.
        """
        sigma2 = self.config.noise_power
        stopping = self.stopping
        state = init.copy()
        state.trace = []
        state.converged = False
        eff = effective_channels(fc, state.phi)
        record = self._record(fc, state, eff, 0)
        state.trace.append(record)
        prev_rate = record.sum_rate
        prev_objective = record.wmmse_objective

        for iteration in range(1, stopping.max_outer + 1):
            state.rho = update_rho(state, fc, sigma2, eff)
            self.emit('on_block_update', self, 'rho', iteration, self._objective(fc, state, eff))

            state.varpi = update_varpi(state, fc, sigma2, eff)
            self.emit('on_block_update', self, 'varpi', iteration, self._objective(fc, state, eff))

            state.W = update_beamformers(state, fc, state.rho, state.varpi, self.config.tx_power, eff)
            zero_beamformer = state.W.total_power() == 0
            self.emit('on_block_update', self, 'W', iteration, self._objective(fc, state, eff))

            inner_sweeps, sweep_converged = 0, True
            if not self.freeze_phi:
                quad = build_phi_quadratic(fc, state.W, state.rho, state.varpi)
                result = sweep_phi(
                    quad, state.phi, self.quant_bits,
                    tol=stopping.phi_tol, max_sweeps=stopping.max_sweeps,
                )
                state.phi = result.phi
                inner_sweeps, sweep_converged = result.sweeps, result.converged
                eff = effective_channels(fc, state.phi)
                self.emit('on_block_update', self, 'phi', iteration, self._objective(fc, state, eff))

            rate = sum_rate(fc, state.phi, state.W, sigma2, eff)
            rate_decreased = rate < prev_rate * (1 - RATE_SLACK)
            if rate_decreased:
                logger.warning(f'Sum-rate decreased at iteration {iteration}: {prev_rate} -> {rate}')
            record = self._record(
                fc, state, eff, iteration,
                inner_sweeps=inner_sweeps, sweep_converged=sweep_converged,
                rate_decreased=rate_decreased, zero_beamformer=zero_beamformer,
            )
            state.trace.append(record)
            logger.debug(
                f'iter {iteration}: sum_rate={rate:.6f}, '
                f'wmmse={record.wmmse_objective:.6f}, sweeps={inner_sweeps}'
            )
            self.emit('on_iteration', self, record)
            change = relative_change(prev_objective, record.wmmse_objective)
            prev_rate, prev_objective = rate, record.wmmse_objective
            if change < stopping.tol:
                state.converged = True
                break

        if not state.converged:
            logger.warning(f'No convergence within {stopping.max_outer} outer iterations')
        self.emit('on_converged', self, state)
        return state


def run(
    config: SystemConfig,
    fc: FrequencyChannels,
    init: OptimizerState,
    stopping: Optional[StoppingCriteria] = None
) -> OptimizerState:
    """Run :class:`Optimizer` with the phase resolution of ``config``
    """
    return Optimizer(config, stopping).run(fc, init)

def write_trace(
    state: OptimizerState,
    filename: Union[str, Path],
    fmt: str = 'csv'
) -> Path:
    """Export the per-iteration trace of a run

    Raises:
        EmitError: If the file can not be written
    """
    records = [r.to_dict() for r in state.trace]
    return write_records(filename, TraceRecord.FIELDS, records, fmt)
