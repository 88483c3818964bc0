"""Carry one cohort's log data through the pipeline stages."""
import os
import logging
from typing import Union, List, Optional

from ebtrack import set_verbose
from ebtrack.data_source.events.load import parse_events, read_sessions
from ebtrack.data_source.events.records import RawEvent, Session
from ebtrack.formatters import numstr
from ebtrack.operations.features import FeatureMatrix, FeatureSpec, build_matrix
from ebtrack.operations.sessions import (PeriodCalendar, StudentPeriodEntry, DEFAULT_GAP_SECONDS,
                                         build_sessions, assign_periods, activity_counts, count_out_of_calendar)

_cohort_logger = logging.getLogger("{0}.{1}".format(__name__, "cohort"))


class Cohort:
    """The events, sessions and weekly entries of a group of students."""

    def __init__(self, verbose: Union[bool, str] = False):
        """A container that the pipeline stages fill in order:

        - Step A: raw log events, as parsed
        - Step B: sessions merged from the events
        - Step C: sessions grouped into (student, period) entries

        Parameters
        ----------
        verbose : `bool` or `str`, default `False`
            either True, False, or a string for level such as "INFO, DEBUG, etc."
        """
        self.stepA_raw_events: Optional[List[RawEvent]] = None
        self.stepB_sessions: Optional[List[Session]] = None
        self.stepC_entries: Optional[List[StudentPeriodEntry]] = None
        self.calendar: Optional[PeriodCalendar] = None

        set_verbose(_cohort_logger, verbose)

    def load_events(self,
                    source: Union[str, os.PathLike, bytes],
                    raw_bloom_levels: bool = False) -> 'Cohort':
        """Step A: parse an events CSV"""
        self.stepA_raw_events = parse_events(source, raw_bloom_levels=raw_bloom_levels)
        _cohort_logger.info("Loaded %s events.", numstr(len(self.stepA_raw_events), 0))
        return self

    def sessionize(self, gap: float = DEFAULT_GAP_SECONDS) -> 'Cohort':
        """Step B: merge the loaded events into sessions"""
        if self.stepA_raw_events is None:
            raise ValueError("No events are loaded; call load_events first.")
        self.stepB_sessions = build_sessions(self.stepA_raw_events, gap=gap)
        _cohort_logger.info("Built %s sessions.", numstr(len(self.stepB_sessions), 0))
        return self

    def load_sessions(self, path: Union[str, os.PathLike]) -> 'Cohort':
        """Step B: read sessions written earlier, skipping step A"""
        self.stepB_sessions = read_sessions(path)
        return self

    def group_by_period(self, calendar: PeriodCalendar) -> 'Cohort':
        """Step C: group sessions into one entry per active (student, period)"""
        if self.stepB_sessions is None:
            raise ValueError("No sessions are available; call sessionize or load_sessions first.")
        self.calendar = calendar
        self.stepC_entries = assign_periods(self.stepB_sessions, calendar)
        _cohort_logger.info("Grouped sessions into %s student-period entries.", numstr(len(self.stepC_entries), 0))
        return self

    def feature_matrix(self, spec: FeatureSpec) -> FeatureMatrix:
        if self.stepC_entries is None:
            raise ValueError("No entries are available; call group_by_period first.")
        return build_matrix(self.stepC_entries, spec)

    def activity(self) -> list:
        """Active students per period of the calendar"""
        if self.stepC_entries is None:
            raise ValueError("No entries are available; call group_by_period first.")
        return activity_counts(self.stepC_entries, self.calendar.period_count)

    def dropped_sessions(self) -> int:
        """Sessions that start outside the calendar"""
        if (self.stepB_sessions is None) or (self.calendar is None):
            return 0
        return count_out_of_calendar(self.stepB_sessions, self.calendar)

    def __repr__(self) -> str:
        """Build a string representation of the Cohort object"""
        strrep = f"Cohort: \n" + \
                 self._students_str() + \
                 f"\n" \
                 f"\t all attributes:%s" % '\n\t\t\t'.join(self._obj_attributes_list_str())

        return strrep

    def _obj_attributes_list_str(self) -> list:
        """Get a list of each stage attribute (with "empty" markers or item counts)

        Returns
        -------
        list
        """
        list_builder = []
        for k, v in self.__dict__.items():
            if k.startswith('_'):
                continue
            if v is None:
                list_builder.append(f"{k}: empty")
            elif isinstance(v, list):
                list_builder.append(f"{k}: {len(v)} items")
            else:
                list_builder.append(f"{k}: {v}")

        return sorted(list_builder)

    def _students_str(self) -> str:
        """Get a string that counts the students seen in the most advanced step

        Returns
        -------
        str
        """
        for step in (self.stepC_entries, self.stepB_sessions, self.stepA_raw_events):
            if step:
                return '\tstudents: %d' % len({item.student_id for item in step})
        return ''
