"""Read and write the event and session CSV layouts.

Events CSV (header required)::

    student_id,timestamp,subject,kind,bloom,score,duration

Sessions CSV::

    student_id,subject,start,end,kind,duration,score,text_s,exercise_s,quiz_s,bloom1_s,bloom2_s,bloom3_s,bloom4_s
"""
import io
import os
import re
import logging
from typing import Union, List, Sequence, BinaryIO

import numpy as np
import pandas as pd

from ebtrack.data_source.events.records import RawEvent, Session, EventValidationError, EVENT_KINDS, BLOOM_GROUPS
from ebtrack.formatters import format_number, numstr
from ebtrack.operations.features import bloom_group

_logger = logging.getLogger(__name__)

EVENT_COLUMNS = ['student_id', 'timestamp', 'subject', 'kind', 'bloom', 'score', 'duration']
SESSION_COLUMNS = ['student_id', 'subject', 'start', 'end', 'kind', 'duration', 'score',
                   'text_s', 'exercise_s', 'quiz_s', 'bloom1_s', 'bloom2_s', 'bloom3_s', 'bloom4_s']


class EventParseError(ValueError):
    """A line of the events file cannot be parsed."""
    def __init__(self, message: str, lineno: int):
        super().__init__("line %d: %s" % (lineno, message))
        self.lineno = lineno


def _as_readable(source: Union[str, os.PathLike, bytes, BinaryIO]):
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    return source


def _optional(field: str, converter, lineno: int, name: str):
    if field == '':
        return None
    try:
        return converter(field)
    except ValueError:
        raise EventParseError("cannot read %s from <%s>" % (name, field), lineno)


def parse_events(source: Union[str, os.PathLike, bytes, BinaryIO],
                 raw_bloom_levels: bool = False
                 ) -> List[RawEvent]:
    """Parse a UTF-8 events CSV into raw events, in input order.

    Parameters
    ----------
    source
        a path, the file content as bytes, or a binary file object
    raw_bloom_levels : bool, default False
        if True, the 'bloom' column holds Bloom taxonomy levels 1-6, which are regrouped into the 4 Bloom groups.
        Otherwise it holds the group (1-4) directly.

    Timestamps are written as integer UTC seconds, but any real number of seconds is read, so
    fractional (`10.5`) and exponent (`1e3`) text is accepted as well. Non-numeric text is a parse error.

    Raises
    ------
    EventParseError
        for a missing/wrong header or a malformed line (the message carries the line number)
    EventValidationError
        for a well-formed line whose values violate the event invariants

    Returns
    -------
    list of RawEvent
    """
    try:
        dataf = pd.read_csv(_as_readable(source), dtype=str, keep_default_na=False,
                            skip_blank_lines=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise EventParseError("missing header, expected <%s>" % ','.join(EVENT_COLUMNS), 1)
    except pd.errors.ParserError as err:
        found = re.search(r'line (\d+)', str(err))
        raise EventParseError(str(err), int(found.group(1)) if found else 0) from err
    except UnicodeDecodeError as err:
        raise EventParseError("input is not UTF-8 text (%s)" % err, 0) from err

    if list(dataf.columns) != EVENT_COLUMNS:
        raise EventParseError("unexpected header <%s>, expected <%s>"
                              % (','.join(map(str, dataf.columns)), ','.join(EVENT_COLUMNS)), 1)

    events = []
    missing = dataf.isna().to_numpy()
    for position, row in enumerate(dataf.itertuples(index=False, name=None)):
        lineno = position + 2  # The header occupies the first line.
        if missing[position].all():
            continue  # blank line
        if missing[position].any():
            raise EventParseError("expected %d fields" % len(EVENT_COLUMNS), lineno)

        student_id, timestamp, subject, kind, bloom, score, duration = (f.strip() for f in row)
        if not student_id:
            raise EventParseError("empty student_id", lineno)
        timestamp_value = _optional(timestamp, float, lineno, 'timestamp')
        if timestamp_value is None:
            raise EventParseError("empty timestamp", lineno)
        bloom_value = _optional(bloom, int, lineno, 'bloom')
        if (bloom_value is not None) and raw_bloom_levels:
            try:
                bloom_value = bloom_group(bloom_value)
            except ValueError as err:
                raise EventValidationError("line %d: %s" % (lineno, err)) from err
        try:
            events.append(RawEvent(student_id=student_id,
                                   timestamp=timestamp_value,
                                   subject=subject,
                                   kind=kind,
                                   bloom_group=bloom_value,
                                   quiz_score=_optional(score, float, lineno, 'score'),
                                   quiz_duration=_optional(duration, float, lineno, 'duration')))
        except EventValidationError as err:
            raise EventValidationError("line %d: %s" % (lineno, err)) from err

    _logger.debug("Parsed %s events.", numstr(len(events), 0))
    return events


def events_to_dataframe(events: Sequence[RawEvent]) -> pd.DataFrame:
    """Tabulate events with the columns of the events CSV layout"""
    dataf = pd.DataFrame({
        'student_id': [e.student_id for e in events],
        'timestamp': np.array([e.timestamp for e in events], dtype=float),
        'subject': [e.subject for e in events],
        'kind': [e.kind for e in events],
        'bloom': pd.array([e.bloom_group for e in events], dtype='Int64'),
        'score': np.array([np.nan if e.quiz_score is None else e.quiz_score for e in events], dtype=float),
        'duration': np.array([np.nan if e.quiz_duration is None else e.quiz_duration for e in events], dtype=float),
    }, columns=EVENT_COLUMNS)
    return dataf


def write_events(events: Sequence[RawEvent],
                 path: Union[str, os.PathLike]) -> None:
    """Write events in the events CSV layout"""
    events_to_dataframe(events).to_csv(path, index=False, na_rep='', float_format=format_number)
    _logger.info("Wrote %s events to <%s>", numstr(len(events), 0), path)


def sessions_to_dataframe(sessions: Sequence[Session]) -> pd.DataFrame:
    """Tabulate sessions with the columns of the sessions CSV layout"""
    records = []
    for s in sessions:
        record = {'student_id': s.student_id, 'subject': s.subject,
                  'start': s.start, 'end': s.end, 'kind': s.kind, 'duration': s.duration,
                  'score': np.nan if s.quiz_score is None else s.quiz_score}
        for kind in EVENT_KINDS:
            record[f"{kind}_s"] = s.kind_seconds(kind)
        for group in BLOOM_GROUPS:
            record[f"bloom{group}_s"] = s.bloom_group_seconds(group)
        records.append(record)
    return pd.DataFrame.from_records(records, columns=SESSION_COLUMNS)


def write_sessions(sessions: Sequence[Session],
                   path: Union[str, os.PathLike]) -> None:
    """Write sessions in the sessions CSV layout"""
    sessions_to_dataframe(sessions).to_csv(path, index=False, na_rep='', float_format=format_number)
    _logger.info("Wrote %s sessions to <%s>", numstr(len(sessions), 0), path)


def read_sessions(path: Union[str, os.PathLike]) -> List[Session]:
    """Load sessions written by `write_sessions`

    Raises
    ------
    ValueError
        if the header does not match the sessions CSV layout
    """
    dataf = pd.read_csv(path, dtype={'student_id': str, 'subject': str, 'kind': str},
                        keep_default_na=False, na_values={'score': ['']}, float_precision='round_trip')
    if list(dataf.columns) != SESSION_COLUMNS:
        raise ValueError("Unexpected sessions header <%s>, expected <%s>"
                         % (','.join(dataf.columns), ','.join(SESSION_COLUMNS)))

    sessions = []
    for row in dataf.itertuples(index=False):
        if row.kind == 'quiz':
            per_kind = {'quiz': float(row.duration)}
        else:
            per_kind = {kind: float(getattr(row, f"{kind}_s")) for kind in EVENT_KINDS
                        if getattr(row, f"{kind}_s") > 0}
        blooms = {group: float(getattr(row, f"bloom{group}_s")) for group in BLOOM_GROUPS
                  if getattr(row, f"bloom{group}_s") > 0}
        sessions.append(Session(student_id=row.student_id,
                                subject=row.subject,
                                start=float(row.start),
                                end=float(row.end),
                                kind=row.kind,
                                duration=float(row.duration),
                                quiz_score=None if pd.isna(row.score) else float(row.score),
                                per_kind_seconds=per_kind,
                                bloom_seconds=blooms))
    _logger.debug("Loaded %s sessions from <%s>", numstr(len(sessions), 0), path)
    return sessions
