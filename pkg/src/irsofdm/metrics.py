"""SINR, sum-rate and (weighted) MSE functionals

Every public function takes the channels, the IRS phases and the
beamformers. The ``*_matrix`` variants evaluate all ``(i, k)`` pairs at once
and accept a precomputed ``eff`` array of effective channels (see
:func:`.channel.effective_channels`) so callers can reuse it between
phase updates.
"""
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .common import ComplexArray, RealArray, DomainError, as_complex
from .channel import FrequencyChannels, effective_channel, effective_channels

__all__ = (
    'BeamformerSet', 'PhaseVector', 'phase_step', 'gain_matrix',
    'sinr', 'sinr_matrix', 'sum_rate', 'per_user_rates',
    'mse', 'mse_matrix', 'wmmse_objective',
)

UNIT_MODULUS_TOL = 1e-12
GRID_TOL = 1e-12
LN2 = math.log(2)


def phase_step(quant_bits: Union[int, float, None]) -> Optional[float]:
    """The grid spacing ``2 pi / 2^b``, or ``None`` for continuous phases

    ``math.inf`` is accepted as a continuous-phase sentinel
    """
    if quant_bits is None or math.isinf(quant_bits):
        return None
    if quant_bits < 1:
        raise DomainError('quant_bits must be >= 1', quant_bits)
    return 2 * math.pi / 2 ** int(quant_bits)


@dataclass(frozen=True)
class BeamformerSet:
    """Per-subcarrier, per-user precoding vectors
    """

    w: ComplexArray
    """Array of shape ``(N, K, N_t)``. ``w[i, k]`` is the precoder of user
    ``k`` on subcarrier ``i``"""

    def __post_init__(self):
        arr = np.array(self.w, dtype=np.complex128)
        if arr.ndim != 3:
            raise DomainError('Beamformers must have shape (N, K, N_t)', arr.shape)
        arr.setflags(write=False)
        object.__setattr__(self, 'w', arr)

    @classmethod
    def zeros(cls, n_subcarriers: int, n_users: int, n_tx: int) -> 'BeamformerSet':
        return cls(np.zeros((n_subcarriers, n_users, n_tx), dtype=np.complex128))

    def total_power(self) -> float:
        """``sum_i ||W_i||_F^2``
        """
        return float(np.sum(np.abs(self.w) ** 2))

    def power_residual(self, tx_power: float) -> float:
        """``|total_power - P|``
        """
        return abs(self.total_power() - tx_power)

    def normalized(self, tx_power: float) -> 'BeamformerSet':
        """Scale all vectors by a single factor so the total power equals
        ``tx_power``

        Raises:
            DomainError: If all vectors are zero
        """
        total = self.total_power()
        if total == 0:
            raise DomainError('Can not normalize an all-zero beamformer set')
        return BeamformerSet(self.w * np.sqrt(tx_power / total))


@dataclass(frozen=True)
class PhaseVector:
    """Unit-modulus IRS reflection coefficients

    Arguments:
        phi: Complex array of length ``M``
        quant_bits: Resolution ``b`` of the phase shifters. When set (and
            finite) every phase must lie on the grid of spacing
            :attr:`delta`. ``None`` or ``math.inf`` means continuous phases.
    """

    phi: ComplexArray
    quant_bits: Optional[Union[int, float]] = None

    def __post_init__(self):
        arr = np.array(self.phi, dtype=np.complex128).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, 'phi', arr)
        modulus_err = self.modulus_residual()
        if modulus_err > UNIT_MODULUS_TOL:
            raise DomainError('IRS coefficients must have unit modulus', modulus_err)
        if self.delta is not None and self.grid_residual() > GRID_TOL:
            raise DomainError('IRS phases are not on the quantization grid', self.grid_residual())

    @property
    def n_elements(self) -> int:
        return self.phi.size

    @property
    def delta(self) -> Optional[float]:
        """Phase grid spacing ``2 pi / 2^b`` (``None`` when continuous)
        """
        return phase_step(self.quant_bits)

    @property
    def is_quantized(self) -> bool:
        return self.delta is not None

    @property
    def angles(self) -> RealArray:
        return np.angle(self.phi)

    @classmethod
    def from_angles(cls, theta, quant_bits: Optional[Union[int, float]] = None) -> 'PhaseVector':
        """Create from phase angles, snapping them to the grid when quantized
        """
        theta = np.asarray(theta, dtype=float)
        delta = phase_step(quant_bits)
        if delta is not None:
            theta = np.round(theta / delta) * delta
        return cls(np.exp(1j * theta), quant_bits)

    @classmethod
    def random(
        cls,
        n_elements: int,
        rng: np.random.Generator,
        quant_bits: Optional[Union[int, float]] = None
    ) -> 'PhaseVector':
        """Phases drawn uniformly from ``[0, 2 pi)`` (grid-snapped when quantized)
        """
        return cls.from_angles(rng.uniform(0, 2 * np.pi, size=n_elements), quant_bits)

    @classmethod
    def ones(cls, n_elements: int) -> 'PhaseVector':
        return cls(np.ones(n_elements, dtype=np.complex128))

    def modulus_residual(self) -> float:
        """``max_m ||phi_m| - 1|``
        """
        if not self.phi.size:
            return 0.
        return float(np.max(np.abs(np.abs(self.phi) - 1)))

    def grid_indices(self) -> np.ndarray:
        """Integer grid positions ``round(angle / delta) mod 2^b``
        """
        delta = self.delta
        if delta is None:
            raise DomainError('Continuous phases have no grid')
        return np.mod(np.round(self.angles / delta).astype(int), 2 ** int(self.quant_bits))

    def grid_residual(self) -> float:
        """Largest distance (in units of :attr:`delta`) from the grid
        """
        delta = self.delta
        if delta is None or not self.phi.size:
            return 0.
        ratio = self.angles / delta
        return float(np.max(np.abs(ratio - np.round(ratio))))

    def feasibility_residual(self) -> float:
        """Combined constraint violation: modulus residual plus grid residual
        """
        return self.modulus_residual() + self.grid_residual()

    def with_element(self, m: int, value: complex) -> 'PhaseVector':
        arr = self.phi.copy()
        arr[m] = value
        return PhaseVector(arr, self.quant_bits)


def _w_array(W) -> ComplexArray:
    return as_complex(getattr(W, 'w', W))

def gain_matrix(eff: ComplexArray, W) -> ComplexArray:
    """Inner products ``g[i, k, p] = h_hat[i, k]^H w[i, p]``
    """
    return np.einsum('ikn,ipn->ikp', eff.conj(), _w_array(W))

def _split_gains(g: ComplexArray):
    total = np.sum(np.abs(g) ** 2, axis=2)
    desired = np.einsum('ikk->ik', g)
    return desired, total

def sinr_matrix(
    fc: FrequencyChannels,
    phi,
    W,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> RealArray:
    """SINR of every user on every subcarrier, shape ``(N, K)``
    """
    if eff is None:
        eff = effective_channels(fc, phi)
    g = gain_matrix(eff, W)
    signal = np.abs(np.einsum('ikk->ik', g)) ** 2
    K = g.shape[1]
    off_diag = ~np.eye(K, dtype=bool)
    interference = np.sum(np.abs(g) ** 2 * off_diag[np.newaxis], axis=2)
    return signal / (interference + sigma2)

def sinr(fc: FrequencyChannels, phi, W, k: int, i: int, sigma2: float) -> float:
    """SINR of user ``k`` on subcarrier ``i``

    ``|h_hat^H w_k|^2 / (sum_{p != k} |h_hat^H w_p|^2 + sigma2)``
    """
    h = effective_channel(fc, phi, k, i)
    w = _w_array(W)[i]
    g = w.conj() @ h
    g = g.conj()
    signal = abs(g[k]) ** 2
    interference = float(np.sum(np.abs(np.delete(g, k)) ** 2))
    return float(signal / (interference + sigma2))

def per_user_rates(
    fc: FrequencyChannels,
    phi,
    W,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> RealArray:
    """``log2(1 + gamma)`` for every ``(i, k)``
    """
    return np.log2(1 + sinr_matrix(fc, phi, W, sigma2, eff))

def sum_rate(
    fc: FrequencyChannels,
    phi,
    W,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> float:
    """Average over subcarriers of the users' rates in bits/s/Hz
    """
    rates = per_user_rates(fc, phi, W, sigma2, eff)
    return float(np.sum(rates) / rates.shape[0])

def mse_matrix(
    fc: FrequencyChannels,
    phi,
    W,
    varpi: ComplexArray,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> RealArray:
    """Modified MSE of every ``(i, k)`` for receivers ``varpi`` (shape ``(N, K)``)

    ``|varpi|^2 (sum_p |g_kp|^2 + sigma2) - 2 Re{conj(varpi) g_kk} + 1``
    """
    if eff is None:
        eff = effective_channels(fc, phi)
    varpi = as_complex(varpi)
    desired, total = _split_gains(gain_matrix(eff, W))
    v2 = np.abs(varpi) ** 2
    return v2 * (total + sigma2) - 2 * np.real(varpi.conj() * desired) + 1

def mse(fc: FrequencyChannels, phi, W, varpi_ki: complex, k: int, i: int, sigma2: float) -> float:
    """Modified MSE of user ``k`` on subcarrier ``i``
    """
    h = effective_channel(fc, phi, k, i)
    g = _w_array(W)[i].conj() @ h
    g = g.conj()
    v2 = abs(varpi_ki) ** 2
    total = float(np.sum(np.abs(g) ** 2))
    cross = np.real(np.conj(varpi_ki) * g[k])
    return float(v2 * total - 2 * cross + v2 * sigma2 + 1)

def wmmse_objective(
    fc: FrequencyChannels,
    phi,
    W,
    rho: RealArray,
    varpi: ComplexArray,
    sigma2: float,
    eff: Optional[ComplexArray] = None
) -> float:
    """Weighted-MSE objective in bits/s/Hz

    ``(1/N) sum_{i,k} (log2(rho) - (rho * MSE - 1) / ln 2)``

    This is the natural-log weighted-MSE objective scaled to bits, so
    ``rho = 1 / MSE`` is its maximizer in ``rho`` and, at the optimal
    ``rho`` and ``varpi``, its value equals :func:`sum_rate`.

    Raises:
        DomainError: If any ``rho`` is not positive
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError('Weights rho must be positive', float(np.min(rho)))
    m = mse_matrix(fc, phi, W, varpi, sigma2, eff)
    terms = np.log2(rho) - (rho * m - 1) / LN2
    return float(np.sum(terms) / terms.shape[0])
