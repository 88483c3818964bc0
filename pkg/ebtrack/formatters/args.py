import pathlib
from platform import system
import argparse, datetime, logging, os, re, shlex, tempfile
from typing import Union, Tuple

_logger = logging.getLogger(__name__)

if system().lower() == "windows":
    pather = pathlib.PureWindowsPath
    use_posix = False
else:
    pather = pathlib.PurePosixPath
    use_posix = True


def options_to_args(options: dict) -> list:
    """Convert a dictionary to a list of strings so that an ArgumentParser can parse it.

    Keys are written as flags with underscores turned into dashes. A value of True produces a bare flag,
    while None and False values are left out. List values produce one flag followed by each item.

    Parameters
    ----------
    options : dict

    Examples
    --------
    a = {'events': "e.csv", 'gap': 600, 'raw_bloom': True}
    >>> options_to_args(a)
    returns ['--events', 'e.csv', '--gap', '600', '--raw-bloom']

    Returns
    -------
    list
    """
    stringable_arg_list = []
    for k, v in options.items():
        flag = "--" + k.replace('_', '-')
        if (v is None) or (v is False):
            continue
        elif v is True:
            stringable_arg_list.append(flag)
        elif isinstance(v, (list, tuple)):
            stringable_arg_list.append(flag + ' ' + ' '.join(shlex.quote(str(x)) for x in v))
        else:
            stringable_arg_list.append(f"{flag} {shlex.quote(str(v))}")
    return shlex.split(' '.join(stringable_arg_list), posix=use_posix)


def is_some_none(val) -> bool:
    """Check if value is either a Python None object or the case-insensitive string 'None'
    """
    if val is None:
        return True
    elif isinstance(val, str) and (val.lower() == 'none'):
        return True
    else:
        return False


def nullable_int(val: Union[None, int, str]) -> Union[None, int]:
    """Validate whether a value is either an integer (or integer string) or none

    Raises
    ------
    argparse.ArgumentTypeError
        if the value is not either an integer or None

    Returns
    -------
    int or None
    """
    if is_some_none(val):
        return None
    if isinstance(val, bool):
        raise argparse.ArgumentTypeError("Value must be an integer, None, or 'None'.")
    if isinstance(val, str) and re.fullmatch(r'[+-]?\d+', val.strip()):
        return int(val)
    if not isinstance(val, int):
        raise argparse.ArgumentTypeError("Value must be an integer, None, or 'None'.")
    return val


def nullable_str(val: Union[None, str]) -> Union[None, str]:
    """Validate whether a value's type is either a string or none

    Raises
    ------
    argparse.ArgumentTypeError
        if the value is not either a string or None

    Returns
    -------
    str or None
    """
    if is_some_none(val):
        return None
    if not isinstance(val, str):
        raise argparse.ArgumentTypeError('Value must be an string or None.')
    return val


def positive_int(val: Union[str, int]) -> int:
    """Validate an integer option that must be at least 1"""
    try:
        number = int(val)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError('Value must be an integer, got <%s>.' % val)
    if number < 1:
        raise argparse.ArgumentTypeError('Value must be >= 1, got %d.' % number)
    return number


def positive_float(val: Union[str, float]) -> float:
    """Validate a real option that must be strictly positive"""
    try:
        number = float(val)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError('Value must be a number, got <%s>.' % val)
    if not number > 0:
        raise argparse.ArgumentTypeError('Value must be > 0, got %s.' % number)
    return number


def unit_interval_float(val: Union[str, float]) -> float:
    """Validate a real option within the open interval (0, 1)"""
    number = positive_float(val)
    if not number < 1:
        raise argparse.ArgumentTypeError('Value must be < 1, got %s.' % number)
    return number


def valid_date_string(d: Union[str, datetime.date]) -> str:
    """Validate a calendar date given as YYYY-MM-DD

    Raises
    ------
    argparse.ArgumentTypeError
        if the string is not a valid ISO date

    Returns
    -------
    str
    """
    if isinstance(d, datetime.date):
        return d.isoformat()
    try:
        return datetime.date.fromisoformat(str(d)).isoformat()
    except ValueError:
        raise argparse.ArgumentTypeError('Date must be given as YYYY-MM-DD. <%s> is not.' % d)


def valid_time_window(w: str) -> Tuple[datetime.time, datetime.time]:
    """Validate a local-time window such as '08:00-16:00'

    Returns
    -------
    tuple
        start and end as datetime.time, with start < end
    """
    found = re.fullmatch(r'\s*(\d{1,2}):(\d{2})\s*-\s*(\d{1,2}):(\d{2})\s*', str(w))
    if not found:
        raise argparse.ArgumentTypeError("Time window must look like '08:00-16:00'. <%s> does not." % w)
    h0, m0, h1, m1 = (int(x) for x in found.groups())
    try:
        start, end = datetime.time(h0, m0), datetime.time(h1, m1)
    except ValueError:
        raise argparse.ArgumentTypeError("Time window <%s> holds an invalid time of day." % w)
    if not start < end:
        raise argparse.ArgumentTypeError("Time window start must be before its end. <%s> is not." % w)
    return start, end


def valid_bound(b: str) -> Tuple[int, float]:
    """Validate an upper bound for a feature, such as 'f10=1.0'

    Returns
    -------
    tuple
        feature id and bound value
    """
    found = re.fullmatch(r'\s*f?(\d+)\s*=\s*([^\s]+)\s*', str(b))
    if not found:
        raise argparse.ArgumentTypeError("Bound must look like 'f10=1.0'. <%s> does not." % b)
    return int(found.group(1)), positive_float(found.group(2))


def valid_vacation(v: str) -> Tuple[int, float]:
    """Validate a vacation period with its activity multiplier, such as '5:0.2'

    Returns
    -------
    tuple
        period index and multiplier in [0, 1)
    """
    found = re.fullmatch(r'\s*(\d+)\s*:\s*([^\s]+)\s*', str(v))
    if not found:
        raise argparse.ArgumentTypeError("Vacation must look like '5:0.2'. <%s> does not." % v)
    try:
        multiplier = float(found.group(2))
    except ValueError:
        raise argparse.ArgumentTypeError("Vacation multiplier must be a number. <%s> is not." % v)
    if not 0 <= multiplier < 1:
        raise argparse.ArgumentTypeError("Vacation multiplier must be in [0, 1). <%s> is not." % v)
    return int(found.group(1)), multiplier


def valid_existing_path(p: Union[str, os.PathLike, pathlib.Path]
                        ) -> Union[str, os.PathLike]:
    """Validate an input filepath

    Raises
    ------
    FileNotFoundError
        if the input path does not exist
    PermissionError
        if the input path is not readable

    Returns
    -------
    str or os.PathLike
    """
    concrete_path = pathlib.Path(pather(p))
    if not concrete_path.exists():
        raise FileNotFoundError('Concrete path must exist. <%s> does not.' % p)
    if not os.access(concrete_path.resolve(), os.R_OK):
        raise PermissionError('Path must be readable. <%s> is not.' % p)
    return p


def valid_writable_path(p: Union[str, os.PathLike]
                        ) -> Union[str, os.PathLike]:
    """Validate an output filepath (or prefix), creating its parent directory when needed

    Raises
    ------
    PermissionError
        if the path is not valid and writable

    Returns
    -------
    str or os.PathLike
    """
    def canmakeit():
        try:
            if str(p).endswith(('/', os.sep)):
                parent = os.path.abspath(p)
            else:
                parent = os.path.dirname(os.path.abspath(p))
            os.makedirs(parent, exist_ok=True)
            with tempfile.NamedTemporaryFile(prefix='_temp', dir=parent) as file_object:
                _logger.debug("Testing - successfully created temporary file (%s)." % file_object.name)
        except OSError:
            return False
        return True

    if (p is None) or (not canmakeit()):
        raise PermissionError('Path must be valid and writable. <%s> is not.' % p)

    return p


def non_negative_float(val: Union[str, float]) -> float:
    """Validate a real option that must be >= 0"""
    try:
        number = float(val)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError('Value must be a number, got <%s>.' % val)
    if not number >= 0:
        raise argparse.ArgumentTypeError('Value must be >= 0, got %s.' % number)
    return number


def valid_fraction(val: Union[str, float]) -> float:
    """Validate a real option within [0, 1)"""
    number = non_negative_float(val)
    if not number < 1:
        raise argparse.ArgumentTypeError('Value must be < 1, got %s.' % number)
    return number
