import logging

import pytest

from ebtrack import load_config_file, load_subjects_dict, validate_verbose, set_verbose, benchmark_stage


def test_config_file_has_stage_sections():
    config = load_config_file()
    for section in ('sessions', 'calendar', 'features', 'fit', 'save_path'):
        assert config.has_section(section)
    assert config.getfloat('sessions', 'gap_seconds') == 600.0
    assert config.getint('calendar', 'period_length') == 7


def test_packaged_subjects_cover_every_class():
    subjects = load_subjects_dict()
    assert subjects['danish'] == 'language'
    assert set(subjects.values()) == {'language', 'societal', 'science'}


def test_subjects_from_a_file(subjects_json, subjects_map):
    assert load_subjects_dict(subjects_json) == subjects_map


@pytest.mark.parametrize("verbose, expected", [(True, logging.DEBUG), (False, logging.INFO),
                                               (None, logging.WARN), ('ERROR', 'ERROR')])
def test_validate_verbose(verbose, expected):
    assert validate_verbose(verbose) == expected


def test_validate_verbose_raises():
    with pytest.raises(ValueError):
        validate_verbose(['DEBUG'])


def test_set_verbose():
    logger = logging.getLogger('ebtrack.tests.verbosity')
    set_verbose(logger, True)
    assert logger.level == logging.DEBUG


def test_benchmark_stage_logs_the_time(caplog):
    @benchmark_stage
    def some_stage(value):
        """doubles"""
        return 2 * value

    with caplog.at_level(logging.INFO):
        assert some_stage(4) == 8
    assert some_stage.__name__ == 'some_stage'
    assert some_stage.__doc__ == 'doubles'
    assert 'some_stage execution time (seconds)' in caplog.text


def test_benchmark_stage_passes_errors_through():
    @benchmark_stage
    def failing_stage():
        raise ValueError('bad option')

    with pytest.raises(ValueError, match='bad option'):
        failing_stage()
