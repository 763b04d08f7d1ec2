from pathlib import Path
from typing import Tuple, Dict, Sequence, Optional, Any, Union, ClassVar
import numbers
from dataclasses import dataclass, field

from loguru import logger
from ruamel.yaml import YAML


class OptionError(ValueError):
    def __init__(self, opt: 'Option', opt_value: Optional[Any] = None):
        self.opt = opt
        self.opt_value = opt_value
    def __str__(self):
        return str(self.opt)

class RequiredError(OptionError):
    def __str__(self):
        return f'Option "{self.opt.name}" is required'

class ChoiceError(OptionError):
    def __str__(self):
        return f'Value for "{self.opt.name}" must be one of {self.opt.choices}, got {self.opt_value}'

class InvalidTypeError(OptionError):
    def __str__(self):
        return f'Invalid type for "{self.opt.name}", got {self.opt_value!r}'

class InvalidLengthError(OptionError):
    def __str__(self):
        return f'Length must be between {self.opt.min_length} and {self.opt.max_length}, got {self.opt_value}'

class OutOfRangeError(OptionError):
    def __str__(self):
        return (
            f'Value for "{self.opt.name}" must be within '
            f'[{self.opt.min_value}, {self.opt.max_value}], got {self.opt_value}'
        )

@dataclass
class Option:
    """Definition of one config file value

    The ``get_init_options`` classmethods of :class:`.scenario.SystemConfig`,
    :class:`.scenario.LinkGeometry`, :class:`.optimizer.StoppingCriteria`
    and :class:`.harness.SweepSpec` return these to describe their fields.
    """
    name: str #: The field name
    type: Any #: The python value type
    title: Optional[str] = None
    """Symbol or short label for the value. If not given, :attr:`name` is used"""

    required: bool = True #: If ``True`` (default), the value must be present
    default: Optional[Any] = None #: Value used when an optional value is missing
    choices: Optional[Tuple[Any]] = field(default_factory=tuple)
    """If present, a tuple of allowed values"""

    min_value: Optional[float] = None #: Inclusive lower bound for numeric values
    max_value: Optional[float] = None #: Inclusive upper bound for numeric values

    def __post_init__(self):
        if self.title is None:
            self.title = self.name

    def validate(self, value: Any) -> Any:
        """Check the given value and convert it to :attr:`type`

        Integers are accepted for options of type :class:`float` and are
        converted. Numeric values are checked against :attr:`min_value` and
        :attr:`max_value` when those are set.
        """
        if value is None:
            if self.required:
                raise RequiredError(self)
            return self.default
        if len(self.choices) and value not in self.choices:
            raise ChoiceError(self, value)
        value = self._coerce(value)
        if isinstance(value, numbers.Real) and not isinstance(value, bool):
            if self.min_value is not None and value < self.min_value:
                raise OutOfRangeError(self, value)
            if self.max_value is not None and value > self.max_value:
                raise OutOfRangeError(self, value)
        return value

    def _coerce(self, value: Any) -> Any:
        if self.type is float and isinstance(value, numbers.Real) and not isinstance(value, bool):
            return float(value)
        if self.type is int and isinstance(value, bool):
            raise InvalidTypeError(self, value)
        if not isinstance(value, self.type):
            raise InvalidTypeError(self, value)
        return value

@dataclass
class ListOption(Option):
    """Option definition for sequences (sweep values, per-user distances)

    The :attr:`~Option.type` applies to the elements
    """
    min_length: Optional[int] = None #: If present, the minimum length of the list
    max_length: Optional[int] = None #: If present, the maximum length of the list

    def validate(self, value: Any) -> Any:
        """Validate each element with :meth:`Option.validate`

        An empty or missing list is treated like a missing value.
        """
        if value is None or not len(value):
            if self.required:
                raise RequiredError(self)
            return list(self.default or [])
        if isinstance(value, str) or not isinstance(value, Sequence):
            raise InvalidTypeError(self, value)
        if self.min_length is not None and len(value) < self.min_length:
            raise InvalidLengthError(self, value)
        if self.max_length is not None and len(value) > self.max_length:
            raise InvalidLengthError(self, value)
        return [super(ListOption, self).validate(item) for item in value]


def validate_options(options: Sequence[Option], values: Dict) -> Dict:
    """Validate a mapping of raw values against the given options

    Keys not defined by any option raise :class:`InvalidTypeError` so typos
    in config files are not silently ignored. Missing optional values are
    filled in with their :attr:`Option.default`.
    """
    known = {opt.name for opt in options}
    for key in values:
        if key not in known:
            raise InvalidTypeError(Option(name=key, type=object), key)
    result = {}
    for opt in options:
        result[opt.name] = opt.validate(values.get(opt.name))
    return result


class Config:
    """Config data storage using YAML

    The file holds up to four top-level sections: ``system``, ``geometry``,
    ``stopping`` and ``sweep``. Each maps option names (see the
    ``get_init_options`` method of the matching class) to values.
    """
    DEFAULT_FILENAME: ClassVar[Path] = Path.home() / '.config' / 'irsofdm.yaml'
    """The default config filename
    """

    SECTIONS: ClassVar[Tuple[str, ...]] = ('system', 'geometry', 'stopping', 'sweep')

    filename: Path
    """Path to configuration file
    """

    def __init__(self, filename: Optional[Union[str, Path]] = DEFAULT_FILENAME):
        if not isinstance(filename, Path):
            filename = Path(filename)
        self.filename = filename

    def read(self) -> Dict:
        """Read data from :attr:`filename` and return the result

        If the file does not exist, an empty dictionary is returned
        """
        if not self.filename.exists():
            logger.debug(f'No config at "{self.filename}", using defaults')
            return {}
        yaml = YAML(typ='safe')
        data = yaml.load(self.filename)
        if data is None:
            return {}
        for key in data:
            if key not in self.SECTIONS:
                raise InvalidTypeError(Option(name=key, type=dict), key)
        return data

    def section(self, name: str) -> Dict:
        """Read a single section, returning an empty :class:`dict` if absent
        """
        return dict(self.read().get(name) or {})

    def write(self, data: Dict):
        """Write the given :class:`dict` data to the config :attr:`filename`
        """
        yaml = YAML()
        if not self.filename.parent.exists():
            self.filename.parent.mkdir(parents=True)
        yaml.dump(data, self.filename)
