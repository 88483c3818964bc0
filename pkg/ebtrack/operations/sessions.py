"""Merge raw log events into sessions and group sessions into weekly student entries.

Two consecutive non-quiz events of a student join the same session when they have the same subject and
their timestamps differ by less than the gap threshold. Quizzes are taken out of the stream first and
each becomes a session of its own, so texts on both sides of a quiz may still merge.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, List, Tuple, Optional

import numpy as np
import pandas as pd

from ebtrack.data_source.events.records import RawEvent, Session
from ebtrack.formatters import numstr
from ebtrack.operations.time import date_to_epoch_seconds, SECONDS_PER_DAY

_logger = logging.getLogger(__name__)

DEFAULT_GAP_SECONDS = 600.0


@dataclass(frozen=True)
class PeriodCalendar:
    """Consecutive activity periods starting at midnight (UTC) of the epoch date

    Attributes
    ----------
    epoch : str
        start date of period 0, e.g. '2015-01-08'
    period_length : int
        days per period
    period_count : int
    """
    epoch: str
    period_length: int = 7
    period_count: int = 112

    def __post_init__(self):
        if self.period_length < 1:
            raise ValueError("Period length must be at least one day, got %s." % self.period_length)
        if self.period_count < 1:
            raise ValueError("Period count must be at least 1, got %s." % self.period_count)

    @property
    def epoch_seconds(self) -> float:
        return date_to_epoch_seconds(self.epoch)

    @property
    def period_seconds(self) -> float:
        return self.period_length * SECONDS_PER_DAY

    def period_bounds(self, period_index: int) -> Tuple[float, float]:
        """UTC seconds [start, end) of a period"""
        start = self.epoch_seconds + period_index * self.period_seconds
        return start, start + self.period_seconds

    def period_of(self, timestamp: float) -> Optional[int]:
        """Index of the period containing a timestamp, or None outside the calendar"""
        index = int(np.floor((timestamp - self.epoch_seconds) / self.period_seconds))
        if 0 <= index < self.period_count:
            return index
        return None


@dataclass(frozen=True)
class StudentPeriodEntry:
    """All sessions of one student that start within one activity period"""
    student_id: str
    period_index: int
    sessions: Tuple[Session, ...]

    def __post_init__(self):
        if self.period_index < 0:
            raise ValueError("Period index must be non-negative, got %s." % self.period_index)
        if len(self.sessions) < 1:
            raise ValueError("An entry holds at least one session.")


def events_to_frame(events: Sequence[RawEvent]) -> pd.DataFrame:
    """Tabulate events for vectorized session building, keeping the input order in 'order'"""
    return pd.DataFrame({
        'student_id': [e.student_id for e in events],
        'timestamp': np.array([e.timestamp for e in events], dtype=float),
        'subject': [e.subject for e in events],
        'kind': [e.kind for e in events],
        'bloom': np.array([0 if e.bloom_group is None else e.bloom_group for e in events], dtype=int),
        'score': np.array([np.nan if e.quiz_score is None else e.quiz_score for e in events], dtype=float),
        'duration': np.array([np.nan if e.quiz_duration is None else e.quiz_duration for e in events], dtype=float),
        'order': np.arange(len(events)),
    })


def _quiz_sessions(quizzes: pd.DataFrame) -> List[Session]:
    return [Session(student_id=row.student_id,
                    subject=row.subject,
                    start=float(row.timestamp),
                    end=float(row.timestamp + row.duration),
                    kind='quiz',
                    duration=float(row.duration),
                    quiz_score=float(row.score),
                    per_kind_seconds={'quiz': float(row.duration)})
            for row in quizzes.itertuples(index=False)]


def _merged_sessions(dataf: pd.DataFrame, gap: float) -> List[Session]:
    if dataf.empty:
        return []
    # Stable sort, so ties keep their input order.
    dataf = dataf.sort_values(['student_id', 'timestamp', 'order'], kind='mergesort').reset_index(drop=True)

    same_student = dataf['student_id'].eq(dataf['student_id'].shift())
    same_subject = dataf['subject'].eq(dataf['subject'].shift())
    close_enough = dataf['timestamp'].diff() < gap
    dataf['session'] = (~(same_student & same_subject & close_enough)).cumsum() - 1

    # Dwell time is the time to the next event of the same session; the last event gets none.
    next_in_session = dataf['session'].eq(dataf['session'].shift(-1))
    dataf['dwell'] = np.where(next_in_session, dataf['timestamp'].shift(-1) - dataf['timestamp'], 0.0)

    grouped = dataf.groupby('session', sort=True)
    bounds = grouped.agg(student_id=('student_id', 'first'),
                         subject=('subject', 'first'),
                         start=('timestamp', 'min'),
                         end=('timestamp', 'max'),
                         n_kinds=('kind', 'nunique'),
                         first_kind=('kind', 'first'))
    kind_dwell = dataf.pivot_table(index='session', columns='kind', values='dwell', aggfunc='sum', fill_value=0.0)
    kind_records = kind_dwell.to_dict(orient='index')
    exercises = dataf[(dataf['kind'] == 'exercise') & (dataf['bloom'] > 0)]
    bloom_records = {}
    if not exercises.empty:
        bloom_records = (exercises
                         .pivot_table(index='session', columns='bloom', values='dwell', aggfunc='sum', fill_value=0.0)
                         .to_dict(orient='index'))

    sessions = []
    for session_id, row in zip(bounds.index, bounds.itertuples(index=False)):
        per_kind = {k: float(v) for k, v in kind_records.get(session_id, {}).items() if v > 0}
        blooms = {int(g): float(v) for g, v in bloom_records.get(session_id, {}).items() if v > 0}
        sessions.append(Session(student_id=row.student_id,
                                subject=row.subject,
                                start=float(row.start),
                                end=float(row.end),
                                kind=row.first_kind if row.n_kinds == 1 else 'mixed',
                                duration=float(row.end - row.start),
                                per_kind_seconds=per_kind,
                                bloom_seconds=blooms))
    return sessions


def build_sessions(events: Sequence[RawEvent],
                   gap: float = DEFAULT_GAP_SECONDS) -> List[Session]:
    """Merge events into sessions

    Parameters
    ----------
    events : sequence of RawEvent
        any order; events are sorted per student by timestamp (ties keep input order)
    gap : float, default 600
        seconds; consecutive same-subject events closer than this belong to one session

    Raises
    ------
    ValueError
        if gap is not positive

    Returns
    -------
    list of Session
        ordered by student_id, then start time
    """
    if not gap > 0:
        raise ValueError("Gap threshold must be positive, got %s." % gap)
    if len(events) == 0:
        return []

    dataf = events_to_frame(events)
    is_quiz = dataf['kind'] == 'quiz'
    sessions = _quiz_sessions(dataf[is_quiz]) + _merged_sessions(dataf[~is_quiz].copy(), gap)
    sessions.sort(key=lambda s: (s.student_id, s.start, s.end, s.kind, s.subject))

    _logger.debug("Merged %s events into %s sessions (gap %s s).",
                  numstr(len(events), 0), numstr(len(sessions), 0), gap)
    return sessions


def count_out_of_calendar(sessions: Sequence[Session],
                          calendar: PeriodCalendar) -> int:
    """Number of sessions whose start lies before the epoch or after the last period"""
    return sum(calendar.period_of(s.start) is None for s in sessions)


def assign_periods(sessions: Sequence[Session],
                   calendar: PeriodCalendar) -> List[StudentPeriodEntry]:
    """Group sessions into one entry per (student, period) by the period containing each session start

    Sessions outside the calendar are dropped, and their number is logged as a warning.

    Returns
    -------
    list of StudentPeriodEntry
        ordered by student_id, then period index; sessions inside an entry keep their given order
    """
    grouped = {}
    dropped = 0
    for session in sessions:
        period = calendar.period_of(session.start)
        if period is None:
            dropped += 1
            continue
        grouped.setdefault((session.student_id, period), []).append(session)

    if dropped:
        _logger.warning("Dropped %s sessions that start outside the calendar (%s, %d periods of %d days).",
                        numstr(dropped, 0), calendar.epoch, calendar.period_count, calendar.period_length)

    return [StudentPeriodEntry(student_id=student, period_index=period, sessions=tuple(grouped[(student, period)]))
            for student, period in sorted(grouped)]


def activity_counts(entries: Sequence[StudentPeriodEntry],
                    period_count: Optional[int] = None) -> List[Tuple[int, int]]:
    """Count the distinct active students of each period

    Parameters
    ----------
    entries : sequence of StudentPeriodEntry
    period_count : int, optional
        number of periods to report; defaults to one past the last period with an entry

    Returns
    -------
    list of (period_index, student_count)
        one pair per period 0..period_count-1, with 0 for periods without entries
    """
    if period_count is None:
        period_count = max((e.period_index for e in entries), default=-1) + 1
    students = [set() for _ in range(period_count)]
    for entry in entries:
        if entry.period_index < period_count:
            students[entry.period_index].add(entry.student_id)
    return [(i, len(s)) for i, s in enumerate(students)]
