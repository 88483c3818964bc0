"""Synthetic cohorts with planted behaviors, as feature matrices or as raw event logs.

Memberships U* are drawn per active (student, period) pair: each row is dominated by one cluster
(usually the student's own), sometimes with a weaker second one. Vacation periods lower both the chance
of being active and the memberships by the vacation multiplier.

For matrices the clusters V* are random points on the simplex. For event logs each cluster follows a
`BehaviorTemplate`, and a row's membership in it becomes a weekly time budget laid out as sessions.
"""
import math
import logging
import datetime as pydt
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple, List

import numpy as np
import pandas as pd

from ebtrack import load_subjects_dict
from ebtrack.data_source.events.records import RawEvent, BLOOM_GROUPS
from ebtrack.formatters import numstr
from ebtrack.operations.features import FeatureMatrix, SUBJECT_CLASSES, parse_feature_ids
from ebtrack.operations.sessions import PeriodCalendar
from ebtrack.operations.time import local_time_utc, SECONDS_PER_HOUR

_logger = logging.getLogger(__name__)

SESSION_MAX_SECONDS = 2700.0
QUIZ_MAX_SECONDS = 1200.0
EVENT_SPACING_SECONDS = 300.0
SCHOOL_SLOTS = tuple(pydt.time(8 + j, 30) for j in range(7))
EVENING_SLOTS = tuple(pydt.time(17 + j, 0) for j in range(6))


@dataclass(frozen=True)
class SyntheticSpec:
    """Size and randomness of a synthetic cohort

    Attributes
    ----------
    n_students, n_periods, k_true : int
    noise_sigma : float
        standard deviation of the gaussian noise added to matrices
    missing_rate : float
        chance that a f10 cell of a matrix is masked
    vacation_periods : dict
        period index -> activity multiplier in [0, 1)
    seed : int
    feature_ids : tuple of int
        matrix columns
    activity_rate : float
        chance that a student is active in a regular period
    hours_scale : float
        weekly hours per unit of membership, for event logs
    epoch, period_length, timezone
        calendar of event logs
    """
    n_students: int
    n_periods: int
    k_true: int
    noise_sigma: float = 0.0
    missing_rate: float = 0.0
    vacation_periods: Dict[int, float] = field(default_factory=dict)
    seed: int = 42
    feature_ids: Tuple[int, ...] = tuple(range(1, 11))
    activity_rate: float = 0.9
    hours_scale: float = 2.0
    epoch: str = '2015-01-08'
    period_length: int = 7
    timezone: str = 'Europe/Copenhagen'

    def __post_init__(self):
        if min(self.n_students, self.n_periods, self.k_true) < 1:
            raise ValueError("Students, periods and k_true must all be at least 1.")
        if self.noise_sigma < 0:
            raise ValueError("Noise sigma must be non-negative, got %s." % self.noise_sigma)
        if not 0 <= self.missing_rate < 1:
            raise ValueError("Missing rate must be in [0, 1), got %s." % self.missing_rate)
        if not 0 < self.activity_rate <= 1:
            raise ValueError("Activity rate must be in (0, 1], got %s." % self.activity_rate)
        if not self.hours_scale > 0:
            raise ValueError("Hours scale must be positive, got %s." % self.hours_scale)
        vacations = {int(p): float(v) for p, v in self.vacation_periods.items()}
        for period, multiplier in vacations.items():
            if not 0 <= period < self.n_periods:
                raise ValueError("Vacation period %d is outside the %d periods." % (period, self.n_periods))
            if not 0 <= multiplier < 1:
                raise ValueError("Vacation multiplier must be in [0, 1), got %s." % multiplier)
        object.__setattr__(self, 'vacation_periods', vacations)
        object.__setattr__(self, 'feature_ids', parse_feature_ids(self.feature_ids))

    @property
    def calendar(self) -> PeriodCalendar:
        return PeriodCalendar(epoch=self.epoch, period_length=self.period_length, period_count=self.n_periods)

    def multiplier(self, period: int) -> float:
        return self.vacation_periods.get(period, 1.0)

    def student_id(self, index: int) -> str:
        width = max(4, len(str(self.n_students - 1)))
        return f"s{index:0{width}d}"

    def seed_sequences(self) -> List[np.random.SeedSequence]:
        """Independent streams for memberships, clusters, matrix noise and event logs"""
        return np.random.SeedSequence(self.seed).spawn(4)


@dataclass(frozen=True)
class BehaviorTemplate:
    """How a student with full membership in a cluster spends a week

    Attributes
    ----------
    name : str
    subject_class : str
    kind_mix : dict
        event kind -> share of the time
    school_hours_share : float
        share of the time spent between 08:00 and 16:00 local time
    bloom_mix : dict
        Bloom group -> share of the exercise time
    quiz_score_mean : float
    """
    name: str
    subject_class: str
    kind_mix: Dict[str, float]
    school_hours_share: float
    bloom_mix: Dict[int, float]
    quiz_score_mean: float = 0.7

    def __post_init__(self):
        if self.subject_class not in SUBJECT_CLASSES:
            raise ValueError("Unknown subject class <%s>." % self.subject_class)
        if set(self.kind_mix) - {'text', 'exercise', 'quiz'}:
            raise ValueError("Kind mix of <%s> names unknown kinds %s." % (self.name, sorted(self.kind_mix)))
        if set(self.bloom_mix) - set(BLOOM_GROUPS):
            raise ValueError("Bloom mix of <%s> names unknown groups %s." % (self.name, sorted(self.bloom_mix)))
        for mix in (self.kind_mix, self.bloom_mix):
            if any(v < 0 for v in mix.values()) or not math.isclose(sum(mix.values()), 1.0):
                raise ValueError("Mixes of <%s> must be non-negative shares summing to 1." % self.name)
        if not 0 <= self.school_hours_share <= 1:
            raise ValueError("School hours share must be in [0, 1], got %s." % self.school_hours_share)


DEFAULT_TEMPLATES = (
    BehaviorTemplate('language reader', 'language',
                     {'text': 0.6, 'exercise': 0.3, 'quiz': 0.1}, 0.8, {1: 0.7, 2: 0.2, 3: 0.1, 4: 0.0}, 0.8),
    BehaviorTemplate('societal exerciser', 'societal',
                     {'text': 0.2, 'exercise': 0.7, 'quiz': 0.1}, 0.3, {1: 0.1, 2: 0.6, 3: 0.2, 4: 0.1}, 0.6),
    BehaviorTemplate('science analyst', 'science',
                     {'text': 0.3, 'exercise': 0.6, 'quiz': 0.1}, 0.5, {1: 0.05, 2: 0.15, 3: 0.6, 4: 0.2}, 0.7),
    BehaviorTemplate('evening quiz taker', 'language',
                     {'text': 0.1, 'exercise': 0.2, 'quiz': 0.7}, 0.1, {1: 0.4, 2: 0.3, 3: 0.2, 4: 0.1}, 0.5),
    BehaviorTemplate('school-hours science reader', 'science',
                     {'text': 1.0}, 1.0, {1: 1.0}, 0.9),
)


class PlantedFactors(NamedTuple):
    """Ground truth of a synthetic cohort; rows are ordered by period, then student"""
    U: np.ndarray
    V: np.ndarray
    row_labels: Tuple[Tuple[str, int], ...]


class SyntheticEventLog(NamedTuple):
    """Raw events with the memberships planted behind them"""
    events: List[RawEvent]
    U: np.ndarray
    row_labels: Tuple[Tuple[str, int], ...]


def _plant_memberships(spec: SyntheticSpec,
                       seed: np.random.SeedSequence) -> Tuple[np.ndarray, Tuple[Tuple[str, int], ...]]:
    rng = np.random.default_rng(seed)
    k = spec.k_true
    home = rng.integers(k, size=spec.n_students)
    rows, labels = [], []
    for period in range(spec.n_periods):
        multiplier = spec.multiplier(period)
        active = rng.random(spec.n_students) < spec.activity_rate * multiplier
        for student in np.flatnonzero(active):
            u = np.zeros(k)
            dominant = home[student] if rng.random() < 0.75 else rng.integers(k)
            u[dominant] = rng.uniform(0.5, 1.5)
            if k > 1 and rng.random() < 0.3:
                u[(dominant + rng.integers(1, k)) % k] = rng.uniform(0.05, 0.4)
            rows.append(u * multiplier)
            labels.append((spec.student_id(student), period))
    U = np.vstack(rows) if rows else np.zeros((0, k))
    return U, tuple(labels)


def plant_factors(spec: SyntheticSpec) -> PlantedFactors:
    """Draw planted memberships U* and simplex clusters V*

    Returns
    -------
    PlantedFactors
        U* (one row per active (student, period) pair), V* (k_true x number of features, rows sum to 1)
        and the row labels
    """
    memberships_seed, clusters_seed, _, _ = spec.seed_sequences()
    U, labels = _plant_memberships(spec, memberships_seed)
    V = np.random.default_rng(clusters_seed).dirichlet(np.ones(len(spec.feature_ids)), size=spec.k_true)
    _logger.debug("Planted %s rows with %d clusters.", numstr(len(labels), 0), spec.k_true)
    return PlantedFactors(U=U, V=V, row_labels=labels)


def synth_matrix(U: np.ndarray, V: np.ndarray,
                 spec: SyntheticSpec,
                 row_labels: Optional[Sequence[Tuple[str, int]]] = None) -> FeatureMatrix:
    """Feature matrix X = max(0, U*V* + noise), with the f10 column masked at the missing rate

    Masked cells hold 0, as in featurized data.
    """
    _, _, noise_seed, _ = spec.seed_sequences()
    rng = np.random.default_rng(noise_seed)
    X = U @ V
    if spec.noise_sigma > 0:
        X = np.maximum(0.0, X + rng.normal(0.0, spec.noise_sigma, size=X.shape))
    W = np.ones_like(X)
    if 10 in spec.feature_ids:
        column = spec.feature_ids.index(10)
        masked = rng.random(X.shape[0]) < spec.missing_rate
        W[masked, column] = 0.0
        X[masked, column] = 0.0
    if row_labels is None:
        row_labels = [(spec.student_id(i), 0) for i in range(X.shape[0])]
    return FeatureMatrix(X=X, W=W, row_labels=tuple(row_labels), col_labels=spec.feature_ids)


def expected_cluster_matrix(templates: Sequence[BehaviorTemplate],
                            feature_ids: Sequence[int],
                            hours_scale: float = 2.0) -> np.ndarray:
    """Hours per unit of membership that each template adds to each feature

    Raises
    ------
    ValueError
        for the non-additive features f9 (average session length) and f10 (average quiz score)
    """
    feature_ids = parse_feature_ids(feature_ids)
    if {9, 10} & set(feature_ids):
        raise ValueError("Averages (f9, f10) do not add up over clusters; choose other features.")
    V = np.zeros((len(templates), len(feature_ids)))
    for c, template in enumerate(templates):
        exercise = template.kind_mix.get('exercise', 0.0)
        profile = {1: template.school_hours_share, 2: 1.0 - template.school_hours_share,
                   3: exercise, 4: template.kind_mix.get('text', 0.0), 5: template.kind_mix.get('quiz', 0.0),
                   6 + SUBJECT_CLASSES.index(template.subject_class): 1.0}
        profile.update({10 + g: exercise * template.bloom_mix.get(g, 0.0) for g in BLOOM_GROUPS})
        V[c] = [hours_scale * profile.get(f, 0.0) for f in feature_ids]
    return V


def _period_slots(spec: SyntheticSpec, period: int) -> Tuple[List[float], List[float]]:
    """UTC starts of the school-hours slots (weekdays) and evening slots (every day) of a period"""
    first_day = pd.Timestamp(spec.calendar.period_bounds(period)[0], unit='s').date()
    school, evening = [], []
    for offset in range(spec.period_length):
        day = first_day + pydt.timedelta(days=offset)
        if day.weekday() < 5:
            school.extend(local_time_utc(day, spec.timezone, clock) for clock in SCHOOL_SLOTS)
        evening.extend(local_time_utc(day, spec.timezone, clock) for clock in EVENING_SLOTS)
    return school, evening


def _chunks(seconds: float, max_length: float) -> List[float]:
    if seconds <= 0:
        return []
    count = math.ceil(seconds / max_length)
    return [seconds / count] * count


def _spaced_times(start: float, length: float) -> List[float]:
    """Event times from start, at most EVENT_SPACING_SECONDS apart, covering length (end excluded)"""
    count = math.ceil(length / EVENT_SPACING_SECONDS)
    return [start + i * length / count for i in range(count)]


def _session_events(student: str, subject: str, kind: str, start: float, length: float,
                    template: BehaviorTemplate, rng: np.random.Generator) -> List[RawEvent]:
    if kind == 'quiz':
        score = float(np.clip(rng.normal(template.quiz_score_mean, 0.05), 0.0, 1.0))
        return [RawEvent(student, start, subject, 'quiz', quiz_score=score, quiz_duration=length)]

    events = []
    last_group = None
    if kind == 'exercise':
        # One contiguous block per Bloom group, so dwell times split exactly by the mix.
        block_start = start
        for group in BLOOM_GROUPS:
            block = length * template.bloom_mix.get(group, 0.0)
            if block <= 0:
                continue
            events.extend(RawEvent(student, t, subject, 'exercise', bloom_group=group)
                          for t in _spaced_times(block_start, block))
            block_start += block
            last_group = group
    else:
        events.extend(RawEvent(student, t, subject, 'text') for t in _spaced_times(start, length))
    events.append(RawEvent(student, start + length, subject, kind, bloom_group=last_group))
    return events


def synth_event_log(spec: SyntheticSpec,
                    templates: Sequence[BehaviorTemplate] = DEFAULT_TEMPLATES,
                    subject_map: Optional[Dict[str, str]] = None) -> SyntheticEventLog:
    """Raw events of a cohort whose planted cluster k follows templates[k]

    A row's membership u in a cluster becomes u * hours_scale hours in that week, split by the template's
    kind mix and school-hours share. Each share is cut into sessions of at most 45 minutes (quizzes at most
    20 minutes), placed in shuffled one-hour slots starting 08:30-14:30 local on weekdays or 17:00-22:00
    local on any day, so sessions are at least 15 minutes apart.

    Parameters
    ----------
    spec : SyntheticSpec
    templates : sequence of BehaviorTemplate
        at least k_true of them
    subject_map : dict, optional
        subject -> subject class; the packaged map by default

    Raises
    ------
    ValueError
        if there are too few templates, a subject class has no subject, or a week's budget exceeds its slots

    Returns
    -------
    SyntheticEventLog
        events sorted by timestamp, then student, with the planted U* and its row labels
    """
    if len(templates) < spec.k_true:
        raise ValueError("Need %d behavior templates, got %d." % (spec.k_true, len(templates)))
    templates = list(templates)[:spec.k_true]
    subject_map = load_subjects_dict() if subject_map is None else subject_map
    subjects = {c: sorted(s for s, sc in subject_map.items() if sc == c) for c in SUBJECT_CLASSES}
    for template in templates:
        if not subjects[template.subject_class]:
            raise ValueError("No subject of class <%s> in the subject map." % template.subject_class)

    memberships_seed, _, _, events_seed = spec.seed_sequences()
    U, labels = _plant_memberships(spec, memberships_seed)
    student_rngs = [np.random.default_rng(s) for s in events_seed.spawn(spec.n_students)]
    slots_cache = {}

    events = []
    for u, (student, period) in zip(U, labels):
        rng = student_rngs[int(student[1:])]
        if period not in slots_cache:
            slots_cache[period] = _period_slots(spec, period)
        school, evening = (list(pool) for pool in slots_cache[period])
        rng.shuffle(school)
        rng.shuffle(evening)

        for template, membership in zip(templates, u):
            budget = membership * spec.hours_scale * SECONDS_PER_HOUR
            for kind, share in sorted(template.kind_mix.items()):
                max_length = QUIZ_MAX_SECONDS if kind == 'quiz' else SESSION_MAX_SECONDS
                for pool, part in ((school, template.school_hours_share),
                                   (evening, 1.0 - template.school_hours_share)):
                    for length in _chunks(budget * share * part, max_length):
                        if not pool:
                            raise ValueError("The week of (%s, %d) has no free slot left; lower hours_scale."
                                             % (student, period))
                        subject = subjects[template.subject_class][rng.integers(len(subjects[template.subject_class]))]
                        events.extend(_session_events(student, subject, kind, pool.pop(), length, template, rng))

    events.sort(key=lambda e: (e.timestamp, e.student_id))
    _logger.info("Generated %s events for %s active (student, period) pairs.",
                 numstr(len(events), 0), numstr(len(labels), 0))
    return SyntheticEventLog(events=events, U=U, row_labels=labels)

