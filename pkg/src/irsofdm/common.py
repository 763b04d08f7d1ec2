import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Union

import numpy as np

__all__ = (
    'ComplexArray', 'RealArray', 'DomainError', 'ConfigError',
    'StructuralError', 'SearchSpaceError', 'EmitError',
    'relative_change', 'as_complex', 'format_value', 'write_records',
    'RECORD_FORMATS',
)

ComplexArray = np.ndarray #: A :class:`numpy.ndarray` of dtype ``complex128``
RealArray = np.ndarray #: A :class:`numpy.ndarray` of dtype ``float64``

RECORD_FORMATS = ('csv', 'jsonl') #: Output formats accepted by :func:`write_records`


class DomainError(ValueError):
    """Raised when a mathematical precondition is violated

    Arguments:
        msg: Description of the violated condition
        value: The offending value (if any)
    """
    def __init__(self, msg: str, value=None):
        self.msg = msg
        self.value = value
        super().__init__(msg)

    def __str__(self):
        if self.value is None:
            return self.msg
        return f'{self.msg} (got {self.value!r})'

class ConfigError(DomainError):
    """Invalid combination of configuration values
    """

class StructuralError(DomainError):
    """Raised by the oracle when the block-cyclic channel is not diagonalized
    by the DFT (signals an indexing bug)
    """

class SearchSpaceError(DomainError):
    """Raised when a brute-force oracle would exceed its size guard
    """

class EmitError(OSError):
    """Raised when results can not be written

    Arguments:
        path: The path being written
        reason: The underlying exception
    """
    def __init__(self, path, reason: Exception):
        self.path = path
        self.reason = reason
        super().__init__(f'Could not write "{path}": {reason}')


def relative_change(old: float, new: float) -> float:
    """Relative change ``|new - old| / |old|``

    Falls back to the absolute change when ``old`` is zero
    """
    delta = abs(new - old)
    scale = abs(old)
    if scale == 0:
        return delta
    return delta / scale

def as_complex(value: Union[np.ndarray, list]) -> ComplexArray:
    return np.asarray(value, dtype=np.complex128)

def format_value(value: Any) -> Any:
    """Normalize a record value for output

    Floats are rounded to 12 significant digits so emitted files do not
    depend on the last bits of the computation. Non-finite floats become the
    strings ``nan``, ``inf`` or ``-inf``.
    """
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return float(f'{value:.12g}')
    return value

def _render_csv(fields: Sequence[str], records: Iterable[Dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator='\n')
    writer.writeheader()
    for rec in records:
        writer.writerow({key: format_value(rec[key]) for key in fields})
    return buf.getvalue()

def _render_jsonl(fields: Sequence[str], records: Iterable[Dict]) -> str:
    lines = []
    for rec in records:
        lines.append(json.dumps({key: format_value(rec[key]) for key in fields}))
    return ''.join(f'{line}\n' for line in lines)

def write_records(
    filename: Union[str, Path],
    fields: Sequence[str],
    records: Iterable[Dict],
    fmt: str = 'csv'
) -> Path:
    """Write dict records as a delimited table or as JSON lines

    Arguments:
        filename: Destination path. Parent directories are created
        fields: Column names (and their order)
        records: Mappings containing at least the keys in ``fields``
        fmt: One of :data:`RECORD_FORMATS`

    Raises:
        DomainError: If ``fmt`` is not supported
        EmitError: If the file can not be written
    """
    if fmt not in RECORD_FORMATS:
        raise DomainError(f'Output format must be one of {RECORD_FORMATS}', fmt)
    filename = Path(filename)
    if fmt == 'csv':
        text = _render_csv(fields, records)
    else:
        text = _render_jsonl(fields, records)
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        filename.write_text(text)
    except OSError as exc:
        raise EmitError(filename, exc) from exc
    return filename
