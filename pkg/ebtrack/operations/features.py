"""Weekly per-student behavior features and the masked feature matrix.

=====  ===========================================
 id    feature
=====  ===========================================
  1    hours between 8AM and 4PM (local time)
  2    hours before 8AM and after 4PM
  3    hours doing exercises
  4    hours reading texts
  5    hours taking quizzes
  6    hours working with language subjects
  7    hours working with societal subjects
  8    hours working with science subjects
  9    average session length in hours
 10    average quiz score in [0, 1] (missing without quizzes)
 11    hours with Bloom group 1 (Remember/Understand)
 12    hours with Bloom group 2 (Apply)
 13    hours with Bloom group 3 (Analyze/Evaluate)
 14    hours with Bloom group 4 (Create)
=====  ===========================================
"""
import os
import re
import logging
import datetime as pydt
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Dict, Union, List

import numpy as np
import pandas as pd

from ebtrack.formatters import numstr, format_fixed, with_suffix
from ebtrack.operations.sessions import StudentPeriodEntry
from ebtrack.operations.time import split_by_local_window, SECONDS_PER_HOUR

_logger = logging.getLogger(__name__)

FEATURE_NAMES = {
    1: 'f1_school_hours',
    2: 'f2_nonschool_hours',
    3: 'f3_exercise_hours',
    4: 'f4_text_hours',
    5: 'f5_quiz_hours',
    6: 'f6_language_hours',
    7: 'f7_societal_hours',
    8: 'f8_science_hours',
    9: 'f9_mean_session_hours',
    10: 'f10_mean_quiz_score',
    11: 'f11_bloom1_hours',
    12: 'f12_bloom2_hours',
    13: 'f13_bloom3_hours',
    14: 'f14_bloom4_hours',
}
MISSABLE_FEATURES = frozenset({10})
SUBJECT_CLASSES = ('language', 'societal', 'science')
FEATURE_PRESETS = {
    'experiment1': tuple(range(1, 11)),
    'experiment2': (6, 7, 8, 11, 12, 13, 14),
    'all': tuple(range(1, 15)),
}

# Bloom taxonomy levels 1-6 (Remember, Understand, Apply, Analyze, Evaluate, Create) into 4 groups.
_BLOOM_LEVEL_TO_GROUP = {1: 1, 2: 1, 3: 2, 4: 3, 5: 3, 6: 4}


class ConfigurationError(ValueError):
    """The feature configuration does not cover the data, e.g. a subject without a subject class."""


def bloom_group(raw_level: int) -> int:
    """Regroup a Bloom taxonomy level (1-6) into one of the 4 Bloom groups

    Raises
    ------
    ValueError
        if the level is outside 1-6
    """
    try:
        return _BLOOM_LEVEL_TO_GROUP[int(raw_level)]
    except (KeyError, TypeError, ValueError):
        raise ValueError("Bloom taxonomy level must be an integer in 1-6, got <%s>." % raw_level)


def parse_feature_ids(features: Union[str, Sequence[int]]) -> Tuple[int, ...]:
    """Read a feature selection

    Parameters
    ----------
    features
        a preset name ('experiment1', 'experiment2', 'all'), a string of ids and ranges such as '1-10' or
        '6,7,8,11-14' (a leading 'f' is allowed), or a sequence of integer ids

    Raises
    ------
    ValueError
        for empty selections, unknown ids or duplicates

    Returns
    -------
    tuple of int
    """
    if isinstance(features, str):
        text = features.strip().lower()
        if text in FEATURE_PRESETS:
            return FEATURE_PRESETS[text]
        ids = []
        for part in filter(None, (p.strip() for p in text.split(','))):
            found = re.fullmatch(r'f?(\d+)(?:\s*-\s*f?(\d+))?', part)
            if not found:
                raise ValueError("Cannot read feature selection <%s>." % features)
            first = int(found.group(1))
            last = int(found.group(2)) if found.group(2) else first
            ids.extend(range(first, last + 1))
    else:
        ids = [int(f) for f in features]

    if not ids:
        raise ValueError("Feature selection must not be empty.")
    unknown = [f for f in ids if f not in FEATURE_NAMES]
    if unknown:
        raise ValueError("Unknown feature ids %s; features are numbered 1-14." % unknown)
    if len(set(ids)) != len(ids):
        raise ValueError("Feature selection <%s> holds duplicates." % (features,))
    return tuple(ids)


@dataclass(frozen=True)
class FeatureSpec:
    """Which features to extract, and how

    Attributes
    ----------
    feature_ids : tuple of int
    school_hours : tuple of datetime.time
        local-time window for f1, default 08:00-16:00
    subject_map : dict
        subject -> subject class ('language', 'societal' or 'science')
    timezone : str
        IANA zone used for local time of day
    """
    feature_ids: Tuple[int, ...] = FEATURE_PRESETS['experiment1']
    school_hours: Tuple[pydt.time, pydt.time] = (pydt.time(8, 0), pydt.time(16, 0))
    subject_map: Dict[str, str] = field(default_factory=dict)
    timezone: str = 'Europe/Copenhagen'

    def __post_init__(self):
        object.__setattr__(self, 'feature_ids', parse_feature_ids(self.feature_ids))
        if not self.school_hours[0] < self.school_hours[1]:
            raise ValueError("School hours must start before they end, got %s." % (self.school_hours,))
        bad_classes = {c for c in self.subject_map.values() if c not in SUBJECT_CLASSES}
        if bad_classes:
            raise ConfigurationError("Unknown subject classes %s; use %s." % (sorted(bad_classes), SUBJECT_CLASSES))

    def subject_class(self, subject: str) -> Union[str, None]:
        if subject in self.subject_map:
            return self.subject_map[subject]
        folded = {k.casefold(): v for k, v in self.subject_map.items()}
        return folded.get(subject.casefold())


def _all_features(entry: StudentPeriodEntry, spec: FeatureSpec) -> Tuple[np.ndarray, bool]:
    """Values of all 14 features in hours (index 0 is f1), and whether the quiz score is present"""
    values = np.zeros(len(FEATURE_NAMES))
    needs_time_of_day = bool({1, 2} & set(spec.feature_ids))

    durations = []
    scores = []
    for session in entry.sessions:
        durations.append(session.duration)
        if needs_time_of_day:
            inside, outside = split_by_local_window(session.start, session.start + session.duration,
                                                    spec.timezone, spec.school_hours)
            values[0] += inside
            values[1] += outside
        values[2] += session.kind_seconds('exercise')
        values[3] += session.kind_seconds('text')
        values[4] += session.kind_seconds('quiz')
        values[5 + SUBJECT_CLASSES.index(spec.subject_class(session.subject))] += session.duration
        for group in (1, 2, 3, 4):
            values[9 + group] += session.bloom_group_seconds(group)
        if session.quiz_score is not None:
            scores.append(session.quiz_score)

    values /= SECONDS_PER_HOUR
    values[8] = np.mean(durations) / SECONDS_PER_HOUR
    has_quiz = len(scores) > 0
    values[9] = np.mean(scores) if has_quiz else 0.0
    return values, has_quiz


def extract_row(entry: StudentPeriodEntry,
                spec: FeatureSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Feature vector and mask for one (student, period) entry

    Durations are in hours. Without a quiz in the period, f10 is 0 with mask 0.

    Raises
    ------
    ConfigurationError
        if a subject of the entry is missing from the subject map

    Returns
    -------
    tuple
        values and mask, both of length len(spec.feature_ids), in spec order
    """
    unmapped = sorted({s.subject for s in entry.sessions if spec.subject_class(s.subject) is None})
    if unmapped:
        raise ConfigurationError("Subjects without a subject class in the subject map: %s" % unmapped)

    values, has_quiz = _all_features(entry, spec)
    mask = np.ones(len(FEATURE_NAMES))
    if not has_quiz:
        mask[9] = 0.0
    columns = [f - 1 for f in spec.feature_ids]
    return values[columns], mask[columns]


@dataclass(frozen=True)
class FeatureMatrix:
    """Masked feature matrix; rows are active (student, period) pairs, columns are feature ids

    Attributes
    ----------
    X : numpy.ndarray
        n x m, non-negative
    W : numpy.ndarray
        n x m, binary; 0 marks a missing value (only in missable columns)
    row_labels : tuple of (student_id, period_index)
    col_labels : tuple of int
    """
    X: np.ndarray
    W: np.ndarray
    row_labels: Tuple[Tuple[str, int], ...]
    col_labels: Tuple[int, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        W = np.asarray(self.W, dtype=float)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'W', W)
        object.__setattr__(self, 'row_labels', tuple((str(s), int(p)) for s, p in self.row_labels))
        object.__setattr__(self, 'col_labels', tuple(int(c) for c in self.col_labels))
        if X.ndim != 2 or X.shape != W.shape:
            raise ValueError("X and W must be matrices of equal shape, got %s and %s." % (X.shape, W.shape))
        if X.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("Labels (%d rows, %d columns) do not match the matrix shape %s."
                             % (len(self.row_labels), len(self.col_labels), X.shape))
        if not np.all(np.isfinite(X)) or np.any(X < 0):
            raise ValueError("Feature matrix must be finite and non-negative.")
        if not np.all((W == 0) | (W == 1)):
            raise ValueError("Mask must be binary.")
        masked_columns = {self.col_labels[j] for j in np.flatnonzero((W == 0).any(axis=0))}
        if masked_columns - MISSABLE_FEATURES:
            raise ValueError("Only features %s may be masked, found masked values for %s."
                             % (sorted(MISSABLE_FEATURES), sorted(masked_columns - MISSABLE_FEATURES)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> List[str]:
        return [FEATURE_NAMES[f] for f in self.col_labels]

    @property
    def missable_columns(self) -> List[int]:
        return [j for j, f in enumerate(self.col_labels) if f in MISSABLE_FEATURES]

    def to_frames(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Matrix and mask as DataFrames with 'student_id' and 'period' label columns"""
        labels = pd.DataFrame(self.row_labels, columns=['student_id', 'period'])
        x_frame = pd.concat([labels, pd.DataFrame(self.X, columns=self.feature_names)], axis=1)
        w_frame = pd.concat([labels, pd.DataFrame(self.W.astype(int), columns=self.feature_names)], axis=1)
        return x_frame, w_frame

    def write(self, prefix: Union[str, os.PathLike]) -> Tuple[str, str]:
        """Write '<prefix>_matrix.csv' and '<prefix>_mask.csv'

        Returns
        -------
        tuple
            the two paths
        """
        x_frame, w_frame = self.to_frames()
        x_path, w_path = with_suffix(prefix, 'matrix.csv'), with_suffix(prefix, 'mask.csv')
        x_frame.to_csv(x_path, index=False, float_format=format_fixed)
        w_frame.to_csv(w_path, index=False)
        _logger.info("Wrote a %d x %d feature matrix to <%s> and its mask to <%s>", self.n, self.m, x_path, w_path)
        return x_path, w_path

    @classmethod
    def read(cls, prefix: Union[str, os.PathLike]) -> 'FeatureMatrix':
        """Load a matrix written by `write`

        Raises
        ------
        ValueError
            if the files disagree on labels or hold invalid values
        """
        x_frame = pd.read_csv(with_suffix(prefix, 'matrix.csv'), dtype={'student_id': str}, keep_default_na=False,
                              float_precision='round_trip')
        w_frame = pd.read_csv(with_suffix(prefix, 'mask.csv'), dtype={'student_id': str}, keep_default_na=False)
        if list(x_frame.columns) != list(w_frame.columns) or list(x_frame.columns[:2]) != ['student_id', 'period']:
            raise ValueError("Matrix and mask files must share the header 'student_id,period,<features>'.")
        if not x_frame[['student_id', 'period']].equals(w_frame[['student_id', 'period']]):
            raise ValueError("Matrix and mask files must list the same rows.")

        col_labels = []
        for name in x_frame.columns[2:]:
            found = re.match(r'f(\d+)', name)
            if not found:
                raise ValueError("Cannot read a feature id from column <%s>." % name)
            col_labels.append(int(found.group(1)))
        return cls(X=x_frame.iloc[:, 2:].to_numpy(dtype=float),
                   W=w_frame.iloc[:, 2:].to_numpy(dtype=float),
                   row_labels=tuple(zip(x_frame['student_id'], x_frame['period'])),
                   col_labels=tuple(col_labels))


def build_matrix(entries: Sequence[StudentPeriodEntry],
                 spec: FeatureSpec) -> FeatureMatrix:
    """Assemble the masked feature matrix, one row per entry

    Rows are ordered by period index, then student id; columns follow the order of spec.feature_ids.

    Raises
    ------
    ValueError
        if there are no entries
    ConfigurationError
        propagated from `extract_row`
    """
    if len(entries) == 0:
        raise ValueError("Cannot build a feature matrix without student entries.")

    ordered = sorted(entries, key=lambda e: (e.period_index, e.student_id))
    rows = [extract_row(entry, spec) for entry in ordered]
    matrix = FeatureMatrix(X=np.vstack([r[0] for r in rows]),
                           W=np.vstack([r[1] for r in rows]),
                           row_labels=tuple((e.student_id, e.period_index) for e in ordered),
                           col_labels=spec.feature_ids)
    _logger.info("Built a feature matrix of %s rows and %d features.", numstr(matrix.n, 0), matrix.m)
    return matrix
