import json
import os

import numpy as np
import pandas as pd
import pytest

from ebtrack.data_source.synthetic import DEFAULT_TEMPLATES, expected_cluster_matrix, aligned_recovery_error
from ebtrack.operations.features import parse_feature_ids
from ebtrack.operations.wnmf import FactorModel
from ebtrack.recipes import synthesize, pipeline

VACATION_PERIOD = 10


@pytest.fixture(scope='module')
def pipeline_run(tmp_path_factory):
    """A planted three-behavior cohort with one vacation week, run through every stage"""
    base = tmp_path_factory.mktemp('end_to_end')
    synthesize({'synth_kind': 'events', 'students': 60, 'periods': 20, 'k': 3, 'seed': 5,
                'vacation': [f"{VACATION_PERIOD}:0.2"], 'out': str(base / 'cohort')})
    out_dir = base / 'run'
    model = pipeline({'events': str(base / 'cohort_events.csv'), 'periods': 20, 'features': 'experiment2',
                      'kmax': 5, 'tau': 0.01, 'restarts': 3, 'max_iters': 3000, 'tol': 1e-10, 'threads': 1,
                      'out': str(out_dir)})
    planted = pd.read_csv(base / 'cohort_planted_U.csv', dtype={'student_id': str})
    return model, out_dir, planted


def test_pipeline_writes_every_artifact(pipeline_run):
    _, out_dir, _ = pipeline_run
    for name in ('sessions.csv', 'features_matrix.csv', 'features_mask.csv', 'model.json', 'model_U.csv',
                 'model_V.csv', 'model_error_curve.csv', 'report_clusters.csv', 'report_clusters.json',
                 'report_distribution.csv', 'report_timeseries.csv', 'report_activity.csv',
                 'report_overview.csv', 'pipeline.manifest.json'):
        assert os.path.exists(out_dir / name), name

    with open(out_dir / 'pipeline.manifest.json') as f:
        manifest = json.load(f)
    assert manifest['stage'] == 'pipeline'
    assert len(manifest['inputs']) == 1


def test_pipeline_rows_are_the_active_pairs(pipeline_run):
    model, _, planted = pipeline_run
    assert model.n == len(planted)
    assert set(model.row_labels) == set(zip(planted['student_id'], planted['period']))


def test_pipeline_selects_the_planted_behaviors(pipeline_run):
    model, out_dir, _ = pipeline_run
    assert model.k == 3
    with open(out_dir / 'model_error_curve.json') as f:
        assert json.load(f)['selected_k'] == 3
    assert FactorModel.from_json(out_dir / 'model.json').k == 3


def test_pipeline_recovers_the_templates(pipeline_run):
    model, _, planted = pipeline_run
    V_true = expected_cluster_matrix(DEFAULT_TEMPLATES[:3], parse_feature_ids('experiment2'))
    U_true = planted[['cluster1', 'cluster2', 'cluster3']].to_numpy()
    assert aligned_recovery_error(model, U_true, V_true) < 0.05


def test_pipeline_reports_the_vacation_dip(pipeline_run):
    _, out_dir, _ = pipeline_run
    activity = pd.read_csv(out_dir / 'report_activity.csv').set_index('period')['students']
    assert len(activity) == 20
    active_neighbors = np.mean([activity[VACATION_PERIOD - 1], activity[VACATION_PERIOD + 1]])
    assert activity[VACATION_PERIOD] <= 0.5 * active_neighbors

    series = pd.read_csv(out_dir / 'report_timeseries.csv').set_index('period')
    totals = series[['cluster1', 'cluster2', 'cluster3']].sum(axis=1)
    neighbors = np.mean([totals[VACATION_PERIOD - 1], totals[VACATION_PERIOD + 1]])
    assert totals[VACATION_PERIOD] < 0.5 * neighbors


def test_pipeline_cluster_table_matches_the_model(pipeline_run):
    model, out_dir, _ = pipeline_run
    clusters = pd.read_csv(out_dir / 'report_clusters.csv', index_col='cluster', float_precision='round_trip')
    np.testing.assert_array_equal(clusters.to_numpy(), model.V)
    np.testing.assert_allclose(clusters.sum(axis=1), 1.0)
