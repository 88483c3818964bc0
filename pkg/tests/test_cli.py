import json

import numpy as np
import pandas as pd
import pytest

import ebtrack
from ebtrack.bin.ebtrack_cli import run, build_parser, EXIT_OK, EXIT_INVALID, EXIT_IO
from ebtrack.operations.wnmf import FactorModel
from ebtrack.recipes import sessionize, fit_model, synthesize
from ebtrack.recipes.recipe_utils import derive_seed, manifest_path
from ebtrack.stage_parsers import parse_stage_options, add_sessionize_args_to_parser, add_fit_args_to_parser


@pytest.fixture
def matrix_prefix(tmp_path):
    """A small 4 x 2 matrix in the on-disk layout"""
    prefix = str(tmp_path / 'features')
    labels = pd.DataFrame({'student_id': ['a', 'b', 'c', 'd'], 'period': [0, 0, 1, 1]})
    x_frame = labels.assign(f1_school_hours=[1.0, 2.0, 0.5, 1.5], f4_text_hours=[0.5, 1.0, 0.25, 0.75])
    w_frame = labels.assign(f1_school_hours=1, f4_text_hours=1)
    x_frame.to_csv(prefix + '_matrix.csv', index=False)
    w_frame.to_csv(prefix + '_mask.csv', index=False)
    return prefix


def test_no_arguments_prints_help():
    assert run([]) == EXIT_INVALID


def test_version(capsys):
    assert run(['--version']) == EXIT_OK
    assert capsys.readouterr().out.strip() == 'ebtrack ' + ebtrack.__version__


def test_unknown_subcommand():
    assert run(['cluster', '--k', '3']) == EXIT_INVALID


def test_bad_flag_value():
    assert run(['fit', '--matrix', 'x', '--k', '0']) == EXIT_INVALID


def test_missing_input_file(tmp_path):
    assert run(['sessionize', '--events', str(tmp_path / 'nope.csv'), '--out', str(tmp_path / 's.csv')]) == EXIT_IO


def test_required_option_missing(tmp_path, matrix_prefix):
    assert run(['fit', '--matrix', matrix_prefix, '--out', str(tmp_path / 'm.json')]) == EXIT_INVALID


def test_fit_rejects_a_negative_matrix(tmp_path):
    prefix = str(tmp_path / 'neg')
    pd.DataFrame({'student_id': ['a'], 'period': [0], 'f1_school_hours': [-1.0]}).to_csv(prefix + '_matrix.csv',
                                                                                           index=False)
    pd.DataFrame({'student_id': ['a'], 'period': [0], 'f1_school_hours': [1]}).to_csv(prefix + '_mask.csv',
                                                                                        index=False)
    assert run(['fit', '--matrix', prefix, '--k', '1', '--out', str(tmp_path / 'm.json')]) == EXIT_INVALID


def test_sessionize_subcommand(tmp_path, events_csv):
    out = tmp_path / 'run' / 'sessions.csv'
    assert run(['sessionize', '--events', str(events_csv), '--out', str(out)]) == EXIT_OK
    sessions = pd.read_csv(out)
    assert len(sessions) == 6
    with open(manifest_path(out)) as f:
        manifest = json.load(f)
    assert manifest['stage'] == 'sessionize'
    assert list(manifest['inputs']) == [str(events_csv)]
    assert manifest['options']['gap'] == 600.0


def test_stages_chain_through_files(tmp_path, events_csv, subjects_json):
    sessions_path = str(tmp_path / 'sessions.csv')
    features = str(tmp_path / 'features')
    model_path = str(tmp_path / 'model.json')
    assert run(['sessionize', '--events', str(events_csv), '--out', sessions_path]) == EXIT_OK
    assert run(['featurize', '--sessions', sessions_path, '--periods', '4', '--features', 'all',
                '--subjects', str(subjects_json), '--out', features]) == EXIT_OK
    assert run(['fit', '--matrix', features, '--k', '2', '--restarts', '2', '--max-iters', '50',
                '--out', model_path]) == EXIT_OK
    assert run(['report', 'clusters', '--model', model_path, '--log', '--out', str(tmp_path / 'rep')]) == EXIT_OK

    model = FactorModel.from_json(model_path)
    assert model.k == 2 and model.n == 3 and model.m == 14
    assert model.normalized
    assert model.options.bounds == {9: 1.0}
    assert (tmp_path / 'model_U.csv').exists() and (tmp_path / 'model_V.csv').exists()
    clusters = pd.read_csv(tmp_path / 'rep_clusters.csv', index_col='cluster')
    assert clusters.shape == (2, 14)
    assert clusters.values.max() <= 0


def test_fit_runs_are_reproducible(tmp_path, matrix_prefix):
    first, second = str(tmp_path / 'a' / 'model.json'), str(tmp_path / 'b' / 'model.json')
    for out in (first, second):
        assert run(['fit', '--matrix', matrix_prefix, '--k', '1', '--seed', '7', '--out', out]) == EXIT_OK
    assert open(first).read() == open(second).read()
    assert FactorModel.from_json(first).seed == derive_seed(7, 'fit')


def test_select_k_writes_error_curve(tmp_path, matrix_prefix):
    out = str(tmp_path / 'model.json')
    assert run(['select-k', '--matrix', matrix_prefix, '--kmax', '2', '--out', out]) == EXIT_OK
    curve = pd.read_csv(tmp_path / 'model_error_curve.csv')
    assert curve['k'].tolist() == [1, 2]
    # The matrix is rank one.
    assert FactorModel.from_json(out).k == 1


def test_arguments_from_a_file(tmp_path, events_csv):
    options_file = tmp_path / 'options.txt'
    out = tmp_path / 'sessions.csv'
    options_file.write_text(f"sessionize  # merge the events\n--events {events_csv}\n--gap 300 --out {out}\n")
    assert run([f"@{options_file}"]) == EXIT_OK
    with open(manifest_path(out)) as f:
        assert json.load(f)['options']['gap'] == 300.0


def test_subcommands_refuse_abbreviations():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['sessionize', '--eve', 'x.csv'])


def test_option_precedence(tmp_path):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'gap': 100, 'raw-bloom': True, 'unused': 1}))
    defaults = parse_stage_options({'events': 'e.csv'}, add_sessionize_args_to_parser, 'sessionize')
    from_config = parse_stage_options({'events': 'e.csv', 'config': str(config)},
                                      add_sessionize_args_to_parser, 'sessionize')
    explicit = parse_stage_options({'events': 'e.csv', 'config': str(config), 'gap': 50},
                                   add_sessionize_args_to_parser, 'sessionize')
    assert defaults.gap == 600.0 and defaults.raw_bloom is False
    assert from_config.gap == 100.0 and from_config.raw_bloom is True
    assert explicit.gap == 50.0
    assert defaults.out.endswith('sessions.csv')


def test_fit_defaults_come_from_the_package(tmp_path):
    opts = parse_stage_options({'matrix': 'm', 'k': 3}, add_fit_args_to_parser, 'fit')
    assert (opts.seed, opts.restarts, opts.max_iters, opts.tol) == (42, 5, 500, 1e-6)
    assert opts.bound == [(10, 1.0)]


def test_bad_config_values_are_rejected(tmp_path):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'gap': -5}))
    with pytest.raises(ValueError):
        parse_stage_options({'events': 'e.csv', 'config': str(config)}, add_sessionize_args_to_parser, 'sessionize')
    config.write_text('[1, 2]')
    assert run(['sessionize', '--events', 'e.csv', '--config', str(config)]) == EXIT_INVALID


def test_recipes_accept_dicts(tmp_path, events_csv):
    out = sessionize({'events': str(events_csv), 'out': str(tmp_path / 's.csv')})
    assert out == str(tmp_path / 's.csv')


def test_synth_matrix_subcommand(tmp_path):
    prefix = str(tmp_path / 'synthetic')
    assert run(['synth', 'matrix', '--students', '30', '--periods', '3', '--k', '2', '--missing-rate', '0.2',
                '--out', prefix]) == EXIT_OK
    matrix = pd.read_csv(prefix + '_matrix.csv')
    planted = pd.read_csv(prefix + '_planted_U.csv')
    assert len(matrix) == len(planted)
    assert list(planted.columns) == ['student_id', 'period', 'cluster1', 'cluster2']
    with open(prefix + '_planted_U.json') as f:
        assert json.load(f)['k_true'] == 2

    model = fit_model({'matrix': prefix, 'k': 2, 'restarts': 1, 'max_iters': 20, 'out': str(tmp_path / 'm.json')})
    assert model.m == 10


def test_synth_events_are_seeded(tmp_path):
    paths = [synthesize({'synth_kind': 'events', 'students': 5, 'periods': 2, 'k': 2, 'seed': 3,
                         'out': str(tmp_path / name)}) for name in ('a', 'b')]
    assert open(tmp_path / 'a_events.csv').read() == open(tmp_path / 'b_events.csv').read()
    assert all(isinstance(p, str) for p in paths[0])


def test_synth_rejects_bad_vacation(tmp_path):
    assert run(['synth', 'matrix', '--periods', '3', '--vacation', '7:0.5', '--out', str(tmp_path / 's')]) \
        == EXIT_INVALID


def test_derived_seeds_differ_by_stage():
    assert derive_seed(42, 'fit') != derive_seed(42, 'select-k')
    assert derive_seed(42, 'fit') == derive_seed(42, 'fit')
    assert np.iinfo(np.uint32).min <= derive_seed(42, 'synth') <= np.iinfo(np.uint32).max
