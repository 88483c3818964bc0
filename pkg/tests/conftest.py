from pathlib import PurePath, Path

import numpy as np
import pytest

from ebtrack.data_source.synthetic.generator import SyntheticSpec, plant_factors
from ebtrack.operations.features import FeatureSpec
from ebtrack.operations.sessions import PeriodCalendar

# 2015-01-08 00:00 UTC; Copenhagen is UTC+1 in January.
EPOCH_SECONDS = 1420675200
LOCAL_HOUR = 3600

SUBJECTS = {'danish': 'language', 'english': 'language', 'history': 'societal', 'physics': 'science'}

EVENTS_HEADER = 'student_id,timestamp,subject,kind,bloom,score,duration'


def local_clock(day: int, hour: float) -> float:
    """UTC seconds of a Copenhagen wall-clock hour in January, counted in days from the epoch"""
    return EPOCH_SECONDS + day * 86400 + (hour - 1) * LOCAL_HOUR


@pytest.fixture
def root_testdir():
    return Path(PurePath(__file__)).resolve().parent


@pytest.fixture
def calendar():
    return PeriodCalendar(epoch='2015-01-08', period_length=7, period_count=4)


@pytest.fixture
def subjects_map():
    return dict(SUBJECTS)


@pytest.fixture
def feature_spec(subjects_map):
    return FeatureSpec(feature_ids='all', subject_map=subjects_map)


@pytest.fixture
def events_csv(tmp_path):
    """A small log of two students over two weeks"""
    lines = [EVENTS_HEADER,
             # s1, week 0: a text/exercise session, a quiz, then a late text
             f"s1,{local_clock(0, 10):.0f},danish,text,,,",
             f"s1,{local_clock(0, 10) + 300:.0f},danish,exercise,2,,",
             f"s1,{local_clock(0, 10) + 900:.0f},danish,text,,,",
             f"s1,{local_clock(0, 11):.0f},danish,quiz,,0.8,600",
             f"s1,{local_clock(0, 20):.0f},physics,text,,,",
             f"s1,{local_clock(0, 20) + 120:.0f},physics,exercise,4,,",
             # s2, week 0 and week 1
             f"s2,{local_clock(1, 9):.0f},history,exercise,1,,",
             f"s2,{local_clock(1, 9) + 500:.0f},history,exercise,3,,",
             f"s2,{local_clock(8, 17):.0f},english,quiz,,0.5,300",
             ]
    path = tmp_path / 'events.csv'
    path.write_text('\n'.join(lines) + '\n')
    return path


@pytest.fixture
def subjects_json(tmp_path, subjects_map):
    import json
    path = tmp_path / 'subjects.json'
    path.write_text(json.dumps(subjects_map))
    return path


@pytest.fixture
def planted_spec():
    return SyntheticSpec(n_students=20, n_periods=4, k_true=3, seed=11,
                         feature_ids=(1, 2, 3, 4, 5, 6, 7, 8, 9, 10))


@pytest.fixture
def planted_rank3():
    """A noiseless 50 x 10 product of positive rank-3 factors"""
    rng = np.random.default_rng(2015)
    U = rng.uniform(0.1, 1.0, size=(50, 3))
    V = rng.dirichlet(np.ones(10), size=3)
    return U, V


@pytest.fixture
def planted_factors(planted_spec):
    return plant_factors(planted_spec)
