"""Tap-delay-line channel synthesis and per-subcarrier channels

Axis conventions: tap arrays are delay-major and frequency arrays are
subcarrier-major, with subcarriers indexed from 0 internally.
"""
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple, Union

import numpy as np
from loguru import logger

from .common import ComplexArray, DomainError, as_complex
from .scenario import SystemConfig, LinkGeometry, LinkGains, sample_user_distances

__all__ = (
    'ChannelTaps', 'FrequencyChannels', 'sample_taps', 'to_frequency',
    'dft_kernel', 'effective_channel', 'effective_channels',
    'dump_taps', 'load_taps',
)

LINK_NAMES = ('direct', 'bs_irs', 'irs_user')


@dataclass(frozen=True)
class ChannelTaps:
    """Time-domain impulse responses of the three links
    """

    direct: ComplexArray
    """BS-user taps with shape ``(D, K, N_t)``"""

    bs_irs: ComplexArray
    """BS-IRS taps with shape ``(D, M, N_t)``"""

    irs_user: ComplexArray
    """IRS-user taps with shape ``(D, K, M)``"""

    def __post_init__(self):
        for name in LINK_NAMES:
            arr = np.array(getattr(self, name), dtype=np.complex128)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n_taps = {self.direct.shape[0], self.bs_irs.shape[0], self.irs_user.shape[0]}
        if len(n_taps) != 1:
            raise DomainError('All links must have the same number of taps', n_taps)
        if self.direct.shape[2] != self.bs_irs.shape[2]:
            raise DomainError('Antenna count mismatch between direct and BS-IRS taps')
        if self.irs_user.shape[2] != self.bs_irs.shape[1]:
            raise DomainError('IRS element count mismatch between links')
        if self.irs_user.shape[1] != self.direct.shape[1]:
            raise DomainError('User count mismatch between links')

    @property
    def n_taps(self) -> int:
        return self.direct.shape[0]

    @property
    def n_users(self) -> int:
        return self.direct.shape[1]

    @property
    def n_tx(self) -> int:
        return self.direct.shape[2]

    @property
    def n_irs(self) -> int:
        return self.bs_irs.shape[1]

    def energy(self) -> Dict[str, float]:
        """Total tap energy per link (sum of squared magnitudes)
        """
        return {name: float(np.sum(np.abs(getattr(self, name)) ** 2)) for name in LINK_NAMES}

    def digest(self) -> str:
        """SHA-1 hex digest of the tap values

        Two trials that consumed the same realization have equal digests
        """
        h = hashlib.sha1()
        for name in LINK_NAMES:
            arr = np.ascontiguousarray(getattr(self, name))
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()

    def scaled(self, factor: complex) -> 'ChannelTaps':
        return ChannelTaps(
            direct=self.direct * factor,
            bs_irs=self.bs_irs * factor,
            irs_user=self.irs_user * factor,
        )

    def __add__(self, other: 'ChannelTaps') -> 'ChannelTaps':
        return ChannelTaps(
            direct=self.direct + other.direct,
            bs_irs=self.bs_irs + other.bs_irs,
            irs_user=self.irs_user + other.irs_user,
        )


@dataclass(frozen=True)
class FrequencyChannels:
    """Per-subcarrier channels of the three links
    """

    direct: ComplexArray
    """BS-user channels h^d with shape ``(N, K, N_t)``"""

    bs_irs: ComplexArray
    """BS-IRS channels G with shape ``(N, M, N_t)``"""

    irs_user: ComplexArray
    """IRS-user channels h^r with shape ``(N, K, M)``"""

    def __post_init__(self):
        for name in LINK_NAMES:
            arr = np.array(getattr(self, name), dtype=np.complex128)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_subcarriers(self) -> int:
        return self.direct.shape[0]

    @property
    def n_users(self) -> int:
        return self.direct.shape[1]

    @property
    def n_tx(self) -> int:
        return self.direct.shape[2]

    @property
    def n_irs(self) -> int:
        return self.bs_irs.shape[1]

    def without_irs(self) -> 'FrequencyChannels':
        """A copy with both reflected links set to zero
        """
        return FrequencyChannels(
            direct=self.direct,
            bs_irs=np.zeros_like(self.bs_irs),
            irs_user=np.zeros_like(self.irs_user),
        )

    def scaled(self, factor: complex) -> 'FrequencyChannels':
        return FrequencyChannels(
            direct=self.direct * factor,
            bs_irs=self.bs_irs * factor,
            irs_user=self.irs_user * factor,
        )


def _nonzero_delays(n_taps: int, rng: np.random.Generator, random_placement: bool) -> np.ndarray:
    n_active = max(n_taps // 2, 1)
    if random_placement:
        return np.sort(rng.choice(n_taps, size=n_active, replace=False))
    return np.arange(n_active)

def _cscg(rng: np.random.Generator, shape: Tuple[int, ...], variance) -> ComplexArray:
    scale = np.sqrt(np.asarray(variance) / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

def sample_taps(
    config: SystemConfig,
    geometry: LinkGeometry,
    rng: np.random.Generator,
    d_bs_user: Optional[np.ndarray] = None,
    random_placement: bool = False
) -> ChannelTaps:
    """Draw a channel realization

    Half of the ``D`` delays carry circularly symmetric complex Gaussian
    taps (at least one when ``D == 1``), the rest are exactly zero. Each
    scalar coefficient of a nonzero tap has variance ``g / n_active`` where
    ``g`` is the link's path loss gain, so the expected total energy per
    scalar channel equals ``g``.

    Arguments:
        config: System dimensions
        geometry: Path loss parameters
        rng: Random generator owned by the caller
        d_bs_user: BS-user distances. If not given they are drawn with
            :func:`~.scenario.sample_user_distances` using ``rng``
        random_placement: If ``True`` the nonzero delays are chosen at
            random, otherwise they are the leading delays ``0 .. D/2 - 1``
    """
    D, K, Nt, M = config.n_taps, config.n_users, config.n_tx, config.n_irs
    if d_bs_user is None:
        d_bs_user = sample_user_distances(geometry, K, rng)
    gains: LinkGains = geometry.link_gains(d_bs_user)
    active = _nonzero_delays(D, rng, random_placement)
    n_active = len(active)

    direct = np.zeros((D, K, Nt), dtype=np.complex128)
    bs_irs = np.zeros((D, M, Nt), dtype=np.complex128)
    irs_user = np.zeros((D, K, M), dtype=np.complex128)

    direct_var = (gains.bs_user / n_active)[np.newaxis, :, np.newaxis]
    direct[active] = _cscg(rng, (n_active, K, Nt), direct_var)
    bs_irs[active] = _cscg(rng, (n_active, M, Nt), gains.bs_irs / n_active)
    irs_user[active] = _cscg(rng, (n_active, K, M), gains.irs_user / n_active)
    return ChannelTaps(direct=direct, bs_irs=bs_irs, irs_user=irs_user)

def dft_kernel(n_subcarriers: int, n_taps: int) -> ComplexArray:
    """The ``(N, D)`` matrix ``exp(-j 2 pi i d / N)``
    """
    i = np.arange(n_subcarriers)[:, np.newaxis]
    d = np.arange(n_taps)[np.newaxis, :]
    return np.exp(-2j * np.pi * i * d / n_subcarriers)

def to_frequency(taps: ChannelTaps, n_subcarriers: int) -> FrequencyChannels:
    """Evaluate the per-subcarrier channels by direct DFT of the taps

    The row channels entering the received signal are the DFTs of the row
    taps, i.e. ``(h^d_i)^H = sum_d (h~^d_d)^H exp(-j 2 pi i d / N)`` and
    ``G_i = sum_d G~_d exp(-j 2 pi i d / N)``. The column vectors ``h^d``
    and ``h^r`` therefore use the conjugate kernel. These are exactly the
    diagonal blocks obtained by DFT-diagonalizing the block-cyclic channel
    matrices.
    """
    if taps.n_taps > n_subcarriers:
        raise DomainError('Number of taps must not exceed the number of subcarriers', taps.n_taps)
    E = dft_kernel(n_subcarriers, taps.n_taps)
    return FrequencyChannels(
        direct=np.einsum('id,dkn->ikn', E.conj(), taps.direct),
        bs_irs=np.einsum('id,dmn->imn', E, taps.bs_irs),
        irs_user=np.einsum('id,dkm->ikm', E.conj(), taps.irs_user),
    )

def _phase_array(phi) -> ComplexArray:
    return as_complex(getattr(phi, 'phi', phi))

def effective_channels(fc: FrequencyChannels, phi) -> ComplexArray:
    """Composite channels for all subcarriers and users

    Returns the ``(N, K, N_t)`` array of column vectors ``h_hat`` with
    ``h_hat^H = (h^d)^H + (h^r)^H diag(phi) G``.

    Arguments:
        fc: The frequency-domain channels
        phi: A :class:`~.metrics.PhaseVector` or a plain complex array of
            length ``M`` (used by tests to evaluate at non-feasible points)
    """
    phi = _phase_array(phi)
    reflected = np.einsum('imn,ikm->ikn', fc.bs_irs.conj(), fc.irs_user * phi.conj())
    return fc.direct + reflected

def effective_channel(fc: FrequencyChannels, phi, k: int, i: int) -> ComplexArray:
    """Composite channel of user ``k`` on subcarrier ``i`` (both 0-based)
    """
    phi = _phase_array(phi)
    hr = fc.irs_user[i, k]
    G = fc.bs_irs[i]
    return fc.direct[i, k] + G.conj().T @ (phi.conj() * hr)


def _iter_records(taps: ChannelTaps) -> Iterator[Tuple]:
    for d in range(taps.n_taps):
        for k in range(taps.n_users):
            for col, v in enumerate(taps.direct[d, k]):
                yield ('direct', k, d, 0, col, v)
        for row in range(taps.n_irs):
            for col, v in enumerate(taps.bs_irs[d, row]):
                yield ('bs_irs', None, d, row, col, v)
        for k in range(taps.n_users):
            for col, v in enumerate(taps.irs_user[d, k]):
                yield ('irs_user', k, d, 0, col, v)

def dump_taps(taps: ChannelTaps, filename: Union[str, Path]):
    """Write a realization as ``link,k,d,row,col,re,im`` records

    ``k`` is written as ``-`` for the BS-IRS link. Values use ``repr`` so the
    file reloads bit-exactly with :func:`load_taps`.
    """
    filename = Path(filename)
    lines = [f'# shape D={taps.n_taps} K={taps.n_users} N_t={taps.n_tx} M={taps.n_irs}']
    for link, k, d, row, col, v in _iter_records(taps):
        k_str = '-' if k is None else str(k)
        lines.append(f'{link},{k_str},{d},{row},{col},{float(v.real)!r},{float(v.imag)!r}')
    filename.write_text('\n'.join(lines) + '\n')
    logger.debug(f'Wrote {len(lines) - 1} tap records to "{filename}"')

def load_taps(filename: Union[str, Path]) -> ChannelTaps:
    """Read a realization written by :func:`dump_taps`
    """
    lines = Path(filename).read_text().splitlines()
    header = dict(item.split('=') for item in lines[0][len('# shape'):].split())
    D, K, Nt, M = (int(header[key]) for key in ('D', 'K', 'N_t', 'M'))
    arrays = {
        'direct': np.zeros((D, K, Nt), dtype=np.complex128),
        'bs_irs': np.zeros((D, M, Nt), dtype=np.complex128),
        'irs_user': np.zeros((D, K, M), dtype=np.complex128),
    }
    for line in lines[1:]:
        if not line.strip():
            continue
        link, k, d, row, col, re, im = line.split(',')
        value = complex(float(re), float(im))
        d, row, col = int(d), int(row), int(col)
        if link == 'bs_irs':
            arrays[link][d, row, col] = value
        elif link in arrays:
            arrays[link][d, int(k), col] = value
        else:
            raise DomainError('Unknown link in channel dump', link)
    return ChannelTaps(**arrays)
