"""Brute-force reference computations

These paths build the full time-domain block-cyclic channel matrices,
enumerate whole phase grids and run the reference schemes. They are meant
for small instances (validation and tests) and are deliberately unoptimized.
"""
import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from loguru import logger

from .common import (
    ComplexArray, DomainError, StructuralError, SearchSpaceError, as_complex,
)
from .scenario import SystemConfig, LinkGeometry
from .channel import ChannelTaps, FrequencyChannels, sample_taps, to_frequency, effective_channels
from .metrics import BeamformerSet, PhaseVector, phase_step, sinr_matrix, sum_rate, mse_matrix, wmmse_objective
from .optimizer import (
    OptimizerState, PhiQuadratic, StoppingCriteria, Optimizer,
    build_phi_quadratic, initialize, sweep_phi, update_rho, update_varpi,
)

__all__ = (
    'BlockCyclicChannel', 'build_block_cyclic', 'frequency_oracle',
    'off_diagonal_ratio', 'GridSearchResult', 'search_phi_grid',
    'exhaustive_phi', 'BaselineResult', 'BASELINE_MODES', 'baseline',
    'CheckResult', 'validate_suite',
)

MAX_BLOCK_DIM = 256
MAX_GRID_POINTS = 2 ** 16
OFF_DIAGONAL_TOL = 1e-9
BASELINE_MODES = ('random_irs', 'no_irs')


def _block_circulant(blocks: ComplexArray, n_blocks: int) -> ComplexArray:
    """Block-cyclic matrix whose first block column is ``blocks`` zero-padded
    to ``n_blocks`` blocks

    Block ``(r, c)`` holds ``blocks[(r - c) mod n_blocks]``.
    """
    n_taps, rows, cols = blocks.shape
    result = np.zeros((n_blocks * rows, n_blocks * cols), dtype=np.complex128)
    for r in range(n_blocks):
        for c in range(n_blocks):
            d = (r - c) % n_blocks
            if d < n_taps:
                result[r*rows:(r+1)*rows, c*cols:(c+1)*cols] = blocks[d]
    return result


@dataclass(frozen=True)
class BlockCyclicChannel:
    """Time-domain channel matrices over one OFDM symbol (after CP removal)
    """
    Hd_full: ComplexArray
    """Direct links, shape ``(K, N, N * N_t)``"""

    G_full: ComplexArray
    """BS-IRS link, shape ``(M * N, N * N_t)``"""

    Hr_full: ComplexArray
    """IRS-user links, shape ``(K, N, N * M)``"""

    n_subcarriers: int

    @property
    def n_tx(self) -> int:
        return self.Hd_full.shape[2] // self.n_subcarriers

    @property
    def n_irs(self) -> int:
        return self.G_full.shape[0] // self.n_subcarriers

    @property
    def n_users(self) -> int:
        return self.Hd_full.shape[0]

    def is_block_cyclic(self) -> bool:
        """Each block row equals the previous one shifted right by one block
        """
        N = self.n_subcarriers
        checks = [(h, 1, self.n_tx) for h in self.Hd_full]
        checks.append((self.G_full, self.n_irs, self.n_tx))
        checks.extend((h, 1, self.n_irs) for h in self.Hr_full)
        for mat, rows, cols in checks:
            for r in range(1, N):
                prev = mat[(r-1)*rows:r*rows]
                cur = mat[r*rows:(r+1)*rows]
                if not np.array_equal(np.roll(prev, cols, axis=1), cur):
                    return False
        return True


def build_block_cyclic(
    taps: ChannelTaps,
    n_subcarriers: int,
    max_dim: int = MAX_BLOCK_DIM
) -> BlockCyclicChannel:
    """Assemble the block-cyclic matrices whose first block columns are the
    zero-padded tap sequences (rows ``(h~_d)^H`` and blocks ``G~_d``)

    Raises:
        DomainError: If there are more taps than subcarriers
        SearchSpaceError: If ``N * max(N_t, M)`` exceeds ``max_dim``
    """
    N = n_subcarriers
    if taps.n_taps > N:
        raise DomainError('Number of taps must not exceed the number of subcarriers', taps.n_taps)
    size = N * max(taps.n_tx, taps.n_irs)
    if size > max_dim:
        raise SearchSpaceError(f'Block-cyclic matrices limited to dimension {max_dim}', size)
    Hd_full = np.stack([
        _block_circulant(taps.direct[:, k, np.newaxis, :].conj(), N)
        for k in range(taps.n_users)
    ])
    Hr_full = np.stack([
        _block_circulant(taps.irs_user[:, k, np.newaxis, :].conj(), N)
        for k in range(taps.n_users)
    ])
    G_full = _block_circulant(taps.bs_irs, N)
    return BlockCyclicChannel(Hd_full=Hd_full, G_full=G_full, Hr_full=Hr_full, n_subcarriers=N)

def _transformed(bc: BlockCyclicChannel, phi: ComplexArray) -> ComplexArray:
    N, Nt = bc.n_subcarriers, bc.n_tx
    F = scipy.linalg.dft(N, scale='sqrtn')
    right = np.kron(F.conj().T, np.eye(Nt))
    reflect = np.kron(np.eye(N), np.diag(phi))
    result = []
    for Hd, Hr in zip(bc.Hd_full, bc.Hr_full):
        composite = Hd + Hr @ reflect @ bc.G_full
        result.append((F @ composite @ right).reshape(N, N, Nt))
    return np.stack(result)

def off_diagonal_ratio(bc: BlockCyclicChannel, phi) -> float:
    """Energy of the off-diagonal blocks after DFT transformation divided by
    the total energy
    """
    phi = as_complex(getattr(phi, 'phi', phi))
    T = _transformed(bc, phi)
    total = float(np.sum(np.abs(T) ** 2))
    if total == 0:
        return 0.
    diag = np.einsum('kiin->kin', T)
    return (total - float(np.sum(np.abs(diag) ** 2))) / total

def frequency_oracle(
    bc: BlockCyclicChannel,
    phi,
    n_subcarriers: Optional[int] = None,
    tol: float = OFF_DIAGONAL_TOL
) -> ComplexArray:
    """Per-subcarrier effective channels by explicit DFT transformation of the
    block-cyclic composite channel

    Computes ``F (H~d + H~r (I kron Phi) G~) (F^H kron I)`` for every user and
    returns the diagonal blocks as column vectors, in the layout of
    :func:`.channel.effective_channels` (shape ``(N, K, N_t)``).

    Raises:
        StructuralError: If the off-diagonal energy ratio exceeds ``tol``
    """
    if n_subcarriers is not None and n_subcarriers != bc.n_subcarriers:
        raise DomainError('Subcarrier count does not match the channel', n_subcarriers)
    phi = as_complex(getattr(phi, 'phi', phi))
    T = _transformed(bc, phi)
    total = float(np.sum(np.abs(T) ** 2))
    diag = np.einsum('kiin->kin', T)
    if total > 0:
        ratio = (total - float(np.sum(np.abs(diag) ** 2))) / total
        if ratio > tol:
            raise StructuralError('Block-cyclic channel is not diagonalized by the DFT', ratio)
    return diag.conj().transpose(1, 0, 2)


@dataclass(frozen=True)
class GridSearchResult:
    phi: PhaseVector
    objective: float


def search_phi_grid(
    quad: PhiQuadratic,
    b_bits: int,
    max_points: int = MAX_GRID_POINTS
) -> GridSearchResult:
    """Minimize ``phi^H A phi - 2 Re{phi^H b}`` over every point of the
    ``2^b``-level phase grid

    Ties resolve to the first point in lexicographic grid order.

    Raises:
        SearchSpaceError: If ``2^(b M)`` exceeds ``max_points``
    """
    delta = phase_step(b_bits)
    if delta is None:
        raise DomainError('Exhaustive search needs a finite resolution', b_bits)
    levels = 2 ** int(b_bits)
    M = quad.n_elements
    n_points = levels ** M
    if n_points > max_points:
        raise SearchSpaceError(f'Phase grid limited to {max_points} points', n_points)
    idx = np.array(list(itertools.product(range(levels), repeat=M)), dtype=float)
    candidates = np.exp(1j * idx * delta)
    quad_terms = np.real(np.einsum('pm,mn,pn->p', candidates.conj(), quad.A, candidates))
    lin_terms = np.real(candidates.conj() @ quad.b)
    objectives = quad_terms - 2 * lin_terms
    best = int(np.argmin(objectives))
    return GridSearchResult(
        phi=PhaseVector(candidates[best], b_bits),
        objective=float(objectives[best]),
    )

def exhaustive_phi(
    fc: FrequencyChannels,
    W,
    rho,
    varpi,
    b_bits: int,
    M: Optional[int] = None
) -> GridSearchResult:
    """Globally optimal grid phases for the phase subproblem at ``(W, rho, varpi)``
    """
    if M is not None and M != fc.n_irs:
        raise DomainError('Element count does not match the channels', M)
    return search_phi_grid(build_phi_quadratic(fc, W, rho, varpi), b_bits)


@dataclass(frozen=True)
class BaselineResult:
    W: BeamformerSet
    phi: PhaseVector
    sum_rate: float
    state: OptimizerState = field(repr=False)


def baseline(
    fc: FrequencyChannels,
    mode: str,
    config: SystemConfig,
    rng: Optional[np.random.Generator] = None,
    stopping: Optional[StoppingCriteria] = None,
    phi: Optional[PhaseVector] = None
) -> BaselineResult:
    """Reference schemes with the IRS left unoptimized

    ``random_irs`` draws uniform continuous phases (or uses ``phi``) and
    ``no_irs`` zeroes both reflected links. In both cases the beamformers are
    optimized by the same descent with the phase block frozen.
    """
    if mode not in BASELINE_MODES:
        raise DomainError(f'Baseline mode must be one of {BASELINE_MODES}', mode)
    if mode == 'no_irs':
        fc = fc.without_irs()
        phi = PhaseVector.ones(fc.n_irs)
    elif phi is None:
        if rng is None:
            raise DomainError('random_irs requires rng or phi')
        phi = PhaseVector.random(fc.n_irs, rng)
    init = initialize(config, fc, phi=phi)
    optimizer = Optimizer(config, stopping, quant_bits=None, freeze_phi=True)
    state = optimizer.run(fc, init)
    return BaselineResult(
        W=state.W,
        phi=state.phi,
        sum_rate=sum_rate(fc, state.phi, state.W, config.noise_power),
        state=state,
    )


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check of :func:`validate_suite`
    """
    name: str
    passed: bool
    value: float #: Worst observed value of the checked quantity
    threshold: float
    detail: str = ''


VALIDATION_CONFIG = SystemConfig(
    n_subcarriers=8, n_tx=2, n_users=2, n_irs=3, n_taps=3, cp_len=3,
)
CD_QUALITY_CONFIG = SystemConfig(
    n_subcarriers=4, n_tx=2, n_users=2, n_irs=2, n_taps=2, cp_len=2, quant_bits=2,
)


def _random_channels(config: SystemConfig, rng: np.random.Generator) -> Tuple[ChannelTaps, FrequencyChannels]:
    taps = sample_taps(config, LinkGeometry(), rng)
    return taps, to_frequency(taps, config.n_subcarriers)

def _random_state(config: SystemConfig, fc: FrequencyChannels, rng: np.random.Generator) -> OptimizerState:
    shape = (config.n_subcarriers, config.n_users, config.n_tx)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    W = BeamformerSet(w).normalized(config.tx_power)
    phi = PhaseVector.random(config.n_irs, rng)
    zeros = np.zeros(shape[:2])
    state = OptimizerState(W=W, phi=phi, rho=zeros + 1, varpi=zeros.astype(np.complex128))
    state.varpi = update_varpi(state, fc, config.noise_power)
    state.rho = update_rho(state, fc, config.noise_power)
    return state

def _check_diagonalization(rng, n_instances: int) -> List[CheckResult]:
    config = VALIDATION_CONFIG
    worst_err, worst_ratio = 0., 0.
    for _ in range(n_instances):
        taps, fc = _random_channels(config, rng)
        phi = PhaseVector.random(config.n_irs, rng)
        bc = build_block_cyclic(taps, config.n_subcarriers)
        worst_ratio = max(worst_ratio, off_diagonal_ratio(bc, phi))
        expected = effective_channels(fc, phi)
        err = np.max(np.abs(frequency_oracle(bc, phi) - expected)) / np.max(np.abs(expected))
        worst_err = max(worst_err, float(err))
    return [
        CheckResult('diagonalization_error', worst_err <= 1e-10, worst_err, 1e-10),
        CheckResult('off_diagonal_energy', worst_ratio <= OFF_DIAGONAL_TOL, worst_ratio, OFF_DIAGONAL_TOL),
    ]

def _check_equivalence(rng, n_instances: int) -> List[CheckResult]:
    config = VALIDATION_CONFIG
    sigma2 = config.noise_power
    worst_obj, worst_mse = 0., 0.
    for _ in range(n_instances):
        _, fc = _random_channels(config, rng)
        state = _random_state(config, fc, rng)
        rate = sum_rate(fc, state.phi, state.W, sigma2)
        obj = wmmse_objective(fc, state.phi, state.W, state.rho, state.varpi, sigma2)
        worst_obj = max(worst_obj, abs(obj - rate) / abs(rate))
        m = mse_matrix(fc, state.phi, state.W, state.varpi, sigma2)
        gamma = sinr_matrix(fc, state.phi, state.W, sigma2)
        worst_mse = max(worst_mse, float(np.max(np.abs(m * (1 + gamma) - 1))))
    return [
        CheckResult('wmmse_equals_sum_rate', worst_obj <= 1e-9, worst_obj, 1e-9),
        CheckResult('optimal_mse_identity', worst_mse <= 1e-9, worst_mse, 1e-9),
    ]

def _check_cd_quality(rng, n_instances: int, max_gap: float = .05) -> List[CheckResult]:
    config = CD_QUALITY_CONFIG
    gaps = []
    for _ in range(n_instances):
        _, fc = _random_channels(config, rng)
        state = _random_state(config, fc, rng)
        quad = build_phi_quadratic(fc, state.W, state.rho, state.varpi)
        cont = sweep_phi(quad, state.phi)
        start = PhaseVector.from_angles(cont.phi.angles, config.quant_bits)
        local = sweep_phi(quad, start, config.quant_bits)
        best = search_phi_grid(quad, config.quant_bits)
        local_obj = quad.evaluate(local.phi)
        gaps.append((local_obj - best.objective) / max(abs(best.objective), np.finfo(float).tiny))
    gaps = np.array(gaps)
    lowest = float(np.min(gaps))
    return [
        CheckResult('cd_never_below_optimum', lowest >= -1e-9, lowest, -1e-9),
        CheckResult(
            'cd_gap_to_optimum', float(np.max(gaps)) <= max_gap, float(np.max(gaps)), max_gap,
            detail=f'median gap {float(np.median(gaps)):.3g}',
        ),
    ]

def validate_suite(
    seed: int = 0,
    n_diagonalization: int = 20,
    n_equivalence: int = 50,
    n_cd_quality: int = 30
) -> List[CheckResult]:
    """Run the structural and optimality checks on small random instances

    The checks are

    * the block-cyclic channel is diagonalized by the DFT and its diagonal
      blocks equal :func:`.channel.effective_channels`
    * at the optimal ``rho`` and ``varpi`` the weighted-MSE objective equals
      the sum-rate and ``MSE * (1 + SINR) = 1``
    * on two-element IRSs with 2-bit phases the fixed point of the quantized
      sweep is never below (and close to) the exhaustive grid optimum
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    results = []
    results.extend(_check_diagonalization(rng, n_diagonalization))
    results.extend(_check_equivalence(rng, n_equivalence))
    results.extend(_check_cd_quality(rng, n_cd_quality))
    for r in results:
        if r.passed:
            logger.info(f'{r.name}: ok ({r.value:.3g})')
        else:
            logger.warning(f'{r.name}: FAILED ({r.value:.3g} vs {r.threshold:.3g})')
    return results
