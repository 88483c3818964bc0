import pytest

from ebtrack.data_source.cohort import Cohort
from ebtrack.data_source.events.load import write_sessions


@pytest.fixture
def loaded_cohort(events_csv):
    return Cohort().load_events(events_csv)


def test_empty_cohort_prints():
    text = repr(Cohort())
    assert text.startswith('Cohort:')
    assert 'stepA_raw_events: empty' in text
    assert 'students' not in text


def test_cohort_prints_counts(loaded_cohort):
    text = repr(loaded_cohort.sessionize())
    assert 'stepA_raw_events: 9 items' in text
    assert 'stepB_sessions: 6 items' in text
    assert 'students: 2' in text


def test_cohort_steps_must_run_in_order(loaded_cohort, calendar, feature_spec):
    cohort = Cohort()
    with pytest.raises(ValueError):
        cohort.sessionize()
    with pytest.raises(ValueError):
        cohort.group_by_period(calendar)
    with pytest.raises(ValueError):
        cohort.feature_matrix(feature_spec)
    with pytest.raises(ValueError):
        cohort.activity()
    assert cohort.dropped_sessions() == 0


def test_cohort_full_chain(loaded_cohort, calendar, feature_spec):
    cohort = loaded_cohort.sessionize().group_by_period(calendar)
    assert [(e.student_id, e.period_index) for e in cohort.stepC_entries] == [('s1', 0), ('s2', 0), ('s2', 1)]
    matrix = cohort.feature_matrix(feature_spec)
    assert (matrix.n, matrix.m) == (3, 14)
    assert cohort.activity() == [(0, 2), (1, 1), (2, 0), (3, 0)]
    assert cohort.dropped_sessions() == 0


def test_cohort_from_saved_sessions(tmp_path, loaded_cohort, calendar):
    path = tmp_path / 'sessions.csv'
    write_sessions(loaded_cohort.sessionize().stepB_sessions, path)
    reloaded = Cohort().load_sessions(path).group_by_period(calendar)
    assert reloaded.stepA_raw_events is None
    assert reloaded.stepB_sessions == loaded_cohort.stepB_sessions
    assert len(reloaded.stepC_entries) == 3
