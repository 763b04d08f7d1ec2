"""System dimensions, link geometry and path loss
"""
import dataclasses
from dataclasses import dataclass
from typing import Dict, Tuple, Optional, Sequence, Union

import numpy as np

from .common import DomainError, ConfigError, RealArray
from .config import Option, ListOption, validate_options

__all__ = (
    'SystemConfig', 'LinkGeometry', 'LinkGains', 'link_gain',
    'sample_user_distances', 'dbm_to_watts', 'watts_to_dbm',
)


def dbm_to_watts(value: float) -> float:
    """Convert a power in dBm to watts (``-70 dBm -> 1e-10 W``)
    """
    return 10 ** ((value - 30) / 10)

def watts_to_dbm(value: float) -> float:
    if value <= 0:
        raise DomainError('Power must be positive', value)
    return 10 * np.log10(value) + 30


@dataclass(frozen=True)
class SystemConfig:
    """System dimensions and physical parameters

    The defaults reproduce the reference simulation setup
    (64 subcarriers, 16 taps, 8 antennas, 3 users, 64 IRS elements,
    -70 dBm noise and 1 W transmit power).
    """

    n_subcarriers: int = 64 #: Number of subcarriers (N)
    n_tx: int = 8 #: Number of BS antennas (N_t)
    n_users: int = 3 #: Number of single-antenna users (K)
    n_irs: int = 64 #: Number of IRS elements (M)
    n_taps: int = 16 #: Channel impulse response length (D)
    cp_len: int = 16 #: Cyclic prefix length (N_cp)

    noise_power: float = 1e-10
    """Noise power per subcarrier in watts (σ²)"""

    tx_power: float = 1.0 #: Total transmit power in watts (P)

    quant_bits: Optional[int] = None
    """Phase shifter resolution in bits (b). ``None`` for continuous phases"""

    rng_seed: int = 0 #: Master seed for all random streams

    def __post_init__(self):
        for name in ('n_subcarriers', 'n_tx', 'n_users', 'n_irs', 'n_taps', 'cp_len'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be >= 1', getattr(self, name))
        if not self.n_taps <= self.cp_len <= self.n_subcarriers:
            raise ConfigError(
                'Require n_taps <= cp_len <= n_subcarriers',
                (self.n_taps, self.cp_len, self.n_subcarriers),
            )
        if self.n_users > self.n_tx:
            raise ConfigError('n_users must not exceed n_tx', (self.n_users, self.n_tx))
        if self.noise_power <= 0:
            raise ConfigError('noise_power must be positive', self.noise_power)
        if self.tx_power <= 0:
            raise ConfigError('tx_power must be positive', self.tx_power)
        if self.quant_bits is not None and self.quant_bits < 1:
            raise ConfigError('quant_bits must be >= 1', self.quant_bits)

    @property
    def noise_power_dbm(self) -> float:
        return watts_to_dbm(self.noise_power)

    def replace(self, **kwargs) -> 'SystemConfig':
        """Create a copy with the given fields changed
        """
        return dataclasses.replace(self, **kwargs)

    @classmethod
    def get_init_options(cls) -> Tuple[Option]:
        return (
            Option(name='n_subcarriers', type=int, required=False, default=64, min_value=1, title='N'),
            Option(name='n_tx', type=int, required=False, default=8, min_value=1, title='N_t'),
            Option(name='n_users', type=int, required=False, default=3, min_value=1, title='K'),
            Option(name='n_irs', type=int, required=False, default=64, min_value=1, title='M'),
            Option(name='n_taps', type=int, required=False, default=16, min_value=1, title='D'),
            Option(name='cp_len', type=int, required=False, default=16, min_value=1, title='N_cp'),
            Option(name='noise_power', type=float, required=False, min_value=0, title='Noise (W)'),
            Option(name='noise_power_dbm', type=float, required=False, default=-70., title='Noise (dBm)'),
            Option(name='tx_power', type=float, required=False, default=1., min_value=0, title='P (W)'),
            Option(name='quant_bits', type=int, required=False, min_value=1, title='Bits'),
            Option(name='rng_seed', type=int, required=False, default=0, title='Seed'),
        )

    def to_dict(self) -> Dict:
        """Serialize the config data

        The noise power is written in watts
        """
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Dict) -> 'SystemConfig':
        """Create a :class:`SystemConfig` from serialized data

        The noise power may be given either as ``noise_power`` (watts) or as
        ``noise_power_dbm``. It is converted to watts here, once.
        """
        kw = validate_options(cls.get_init_options(), d)
        noise_dbm = kw.pop('noise_power_dbm')
        if kw['noise_power'] is None:
            kw['noise_power'] = dbm_to_watts(noise_dbm)
        return cls(**kw)


@dataclass(frozen=True)
class LinkGains:
    """Linear power gains for one user drop
    """
    bs_user: RealArray #: Per-user BS-user gains, shape ``(K,)``
    bs_irs: float #: BS-IRS gain
    irs_user: float #: IRS-user gain (common to all users)


@dataclass(frozen=True)
class LinkGeometry:
    """Distances and path loss parameters of the three links
    """

    d_bs_irs: float = 50. #: BS-IRS distance in meters (d_BI)
    d_irs_user: float = 3. #: IRS-user distance in meters (d_IU)
    d_bs_user: Optional[Tuple[float, ...]] = None
    """Fixed BS-user distances (d_BU_k). When ``None`` they are drawn for each
    trial by :func:`sample_user_distances`
    """

    ref_loss_db: float = 30. #: Attenuation at the 1 m reference distance
    exp_bs_irs: float = 2.8 #: Path loss exponent of the BS-IRS link
    exp_irs_user: float = 2.5 #: Path loss exponent of the IRS-user link
    exp_bs_user: float = 3.5 #: Path loss exponent of the BS-user link

    def __post_init__(self):
        if self.d_bs_irs < 1:
            raise ConfigError('d_bs_irs must be >= 1 m', self.d_bs_irs)
        if self.d_irs_user < 1:
            raise ConfigError('d_irs_user must be >= 1 m', self.d_irs_user)
        for name in ('exp_bs_irs', 'exp_irs_user', 'exp_bs_user'):
            if getattr(self, name) <= 0:
                raise ConfigError(f'{name} must be positive', getattr(self, name))
        if self.d_bs_user is not None:
            object.__setattr__(self, 'd_bs_user', tuple(float(d) for d in self.d_bs_user))
            lo, hi = self.user_distance_range
            for d in self.d_bs_user:
                if d < 1 or not lo <= d <= hi:
                    raise ConfigError(f'd_bs_user must lie in [{lo}, {hi}] and be >= 1 m', d)

    @property
    def user_distance_range(self) -> Tuple[float, float]:
        """The interval ``[d_BI - d_IU, d_BI + d_IU]``
        """
        return (self.d_bs_irs - self.d_irs_user, self.d_bs_irs + self.d_irs_user)

    def link_gains(self, d_bs_user: Sequence[float]) -> LinkGains:
        """Evaluate :func:`link_gain` for all three links of a user drop
        """
        bs_user = np.array([
            link_gain(d, self.exp_bs_user, self.ref_loss_db) for d in d_bs_user
        ])
        return LinkGains(
            bs_user=bs_user,
            bs_irs=link_gain(self.d_bs_irs, self.exp_bs_irs, self.ref_loss_db),
            irs_user=link_gain(self.d_irs_user, self.exp_irs_user, self.ref_loss_db),
        )

    def replace(self, **kwargs) -> 'LinkGeometry':
        return dataclasses.replace(self, **kwargs)

    @classmethod
    def get_init_options(cls) -> Tuple[Option]:
        return (
            Option(name='d_bs_irs', type=float, required=False, default=50., min_value=1),
            Option(name='d_irs_user', type=float, required=False, default=3., min_value=1),
            ListOption(name='d_bs_user', type=float, required=False, default=None),
            Option(name='ref_loss_db', type=float, required=False, default=30.),
            Option(name='exp_bs_irs', type=float, required=False, default=2.8),
            Option(name='exp_irs_user', type=float, required=False, default=2.5),
            Option(name='exp_bs_user', type=float, required=False, default=3.5),
        )

    def to_dict(self) -> Dict:
        d = dataclasses.asdict(self)
        if d['d_bs_user'] is not None:
            d['d_bs_user'] = list(d['d_bs_user'])
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> 'LinkGeometry':
        kw = validate_options(cls.get_init_options(), d)
        if not kw['d_bs_user']:
            kw['d_bs_user'] = None
        return cls(**kw)


def link_gain(distance: float, exponent: float, ref_loss_db: float) -> float:
    """Linear power gain ``10^(-ref_loss_db/10) * distance^(-exponent)``

    Arguments:
        distance: Link distance in meters
        exponent: Path loss exponent
        ref_loss_db: Attenuation at the 1 m reference distance

    Raises:
        DomainError: If ``distance < 1`` (the model is calibrated at 1 m)
    """
    if distance < 1:
        raise DomainError('Link distance must be >= 1 m', distance)
    return 10 ** (-ref_loss_db / 10) * distance ** (-exponent)

def sample_user_distances(
    geometry: Union[LinkGeometry, Tuple[float, float]],
    n_users: int,
    rng: np.random.Generator
) -> RealArray:
    """Draw BS-user distances independently and uniformly from
    :attr:`LinkGeometry.user_distance_range`

    If the geometry has fixed :attr:`~LinkGeometry.d_bs_user` values, those
    are returned instead (and ``rng`` is not consumed).

    ``geometry`` may also be a ``(d_bs_irs, d_irs_user)`` pair. Only the
    interval is needed here, so ``d_irs_user`` may be anything ``>= 0``
    (zero gives every user the distance ``d_bs_irs``).

    Raises:
        DomainError: If the lower end of the range is below 1 m,
            ``d_irs_user`` is negative or ``n_users < 1``
    """
    if n_users < 1:
        raise DomainError('n_users must be >= 1', n_users)
    if not isinstance(geometry, LinkGeometry):
        d_bs_irs, d_irs_user = geometry
        if d_irs_user < 0:
            raise DomainError('d_irs_user must be >= 0 m', d_irs_user)
        lo, hi = d_bs_irs - d_irs_user, d_bs_irs + d_irs_user
    elif geometry.d_bs_user is not None:
        if len(geometry.d_bs_user) != n_users:
            raise DomainError('d_bs_user length must equal n_users', geometry.d_bs_user)
        return np.array(geometry.d_bs_user)
    else:
        lo, hi = geometry.user_distance_range
    if lo < 1:
        raise DomainError('d_bs_irs - d_irs_user must be >= 1 m', lo)
    return rng.uniform(lo, hi, size=n_users)
