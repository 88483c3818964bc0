import logging
import datetime as pydt
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
import pandas as pd

_logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400.0
SECONDS_PER_HOUR = 3600.0


def date_to_epoch_seconds(date: Union[str, pydt.date, np.datetime64]) -> float:
    """UTC seconds at midnight (UTC) of a calendar date

    Parameters
    ----------
    date : str, datetime.date or numpy.datetime64
        e.g. '2015-01-08'

    Returns
    -------
    float
    """
    return float(pd.Timestamp(date).tz_localize(None).normalize().tz_localize('UTC').timestamp())


def to_local(timestamp: float, timezone: str) -> pd.Timestamp:
    """Convert UTC seconds to a timezone-aware local timestamp

    Parameters
    ----------
    timestamp : float
        UTC seconds
    timezone : str
        IANA zone name, e.g. 'Europe/Copenhagen'

    Returns
    -------
    pandas.Timestamp
    """
    return pd.Timestamp(timestamp, unit='s', tz='UTC').tz_convert(timezone)


@lru_cache(maxsize=65536)
def local_time_utc(local_date: pydt.date,
                   timezone: str,
                   clock: pydt.time) -> float:
    """UTC seconds of a local clock time on a local date"""
    local = pd.Timestamp(pydt.datetime.combine(local_date, clock)).tz_localize(
        timezone, ambiguous=True, nonexistent='shift_forward')
    return float(local.timestamp())


def local_window_utc(local_date: pydt.date,
                     timezone: str,
                     window_start: pydt.time,
                     window_end: pydt.time) -> Tuple[float, float]:
    """UTC seconds bounding a local time-of-day window on a given local date

    The bounds follow the zone's UTC offset on that date, so the window keeps its local clock times
    across daylight saving changes.
    """
    return local_time_utc(local_date, timezone, window_start), local_time_utc(local_date, timezone, window_end)


def split_by_local_window(start: float,
                          end: float,
                          timezone: str,
                          window: Tuple[pydt.time, pydt.time]) -> Tuple[float, float]:
    """Split an interval into the seconds inside and outside a daily local-time window

    The interval is compared, by exact overlap, against the window on every local day it touches.

    Parameters
    ----------
    start, end : float
        UTC seconds, with end >= start
    timezone : str
    window : tuple of datetime.time
        local window start and end, e.g. (08:00, 16:00)

    Returns
    -------
    tuple
        (seconds inside the window, seconds outside the window), summing to end - start
    """
    total = end - start
    if total <= 0:
        return 0.0, 0.0

    first_day = to_local(start, timezone).date()
    last_day = to_local(end, timezone).date()
    inside = 0.0
    day = first_day
    while day <= last_day:
        w0, w1 = local_window_utc(day, timezone, window[0], window[1])
        inside += max(0.0, min(end, w1) - max(start, w0))
        day += pydt.timedelta(days=1)
    inside = min(inside, total)
    return inside, total - inside
