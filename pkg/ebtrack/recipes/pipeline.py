"""Run every stage, from an events file to the reports of the fitted model

Note
----
All files are written under the --out directory:
    sessions.csv, features_matrix.csv, features_mask.csv, model.json, model_U.csv, model_V.csv,
    report_<kind>.csv (clusters, distribution, timeseries, activity, overview) with JSON sidecars,
    model_error_curve.csv when k is selected, and pipeline.manifest.json.
"""
import os
import logging
import argparse
from typing import Union

import pandas as pd

from ebtrack import set_verbose, benchmark_stage
from ebtrack.analysis.reports import feature_overview, write_table
from ebtrack.data_source.cohort import Cohort
from ebtrack.data_source.events.load import write_sessions
from ebtrack.operations.utils import print_matrix_summary
from ebtrack.operations.wnmf import FactorModel, fit, select_k, normalize_clusters, error_curve
from ebtrack.recipes.factorize import fit_options_for, save_model
from ebtrack.recipes.recipe_utils import require_option, check_inputs, check_output, write_manifest, derive_seed
from ebtrack.recipes.report import model_report
from ebtrack.stage_parsers import parse_stage_options, add_pipeline_args_to_parser, PipelineConfig

_logger = logging.getLogger(__name__)

MODEL_REPORTS = ('clusters', 'distribution', 'timeseries')


@benchmark_stage
def pipeline(options: Union[dict, argparse.Namespace],
             verbose: Union[bool, str] = False,
             ) -> FactorModel:
    """Sessionize, featurize, factorize and report in one run.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It accepts the keys of the sessionize, featurize
        and select-k stages, and:
            k : int, optional
                number of clusters; selected with kmax and tau when omitted
            log : bool, default False
                log10 scale for the clusters report
            out : str
                output directory
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    FactorModel
        the normalized model
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_pipeline_args_to_parser, 'pipeline')

    events_path = require_option(opts, 'events')
    inputs = [events_path] + ([opts.subjects] if opts.subjects else [])
    check_inputs(*inputs)
    out_dir = os.path.join(opts.out, '')
    check_output(out_dir)
    config = PipelineConfig.from_namespace(opts)

    def output(name: str) -> str:
        return os.path.join(out_dir, name)

    # Events -> sessions -> student-period entries -> matrix
    cohort = Cohort(verbose=verbose).load_events(events_path, raw_bloom_levels=opts.raw_bloom)
    cohort.sessionize(gap=config.gap)
    write_sessions(cohort.stepB_sessions, output('sessions.csv'))
    outputs = [output('sessions.csv')]

    cohort.group_by_period(config.calendar)
    matrix = cohort.feature_matrix(config.feature_spec)
    print_matrix_summary(matrix.X, name='feature matrix', mask=matrix.W)
    outputs += matrix.write(output('features'))
    _logger.debug("%s", cohort)

    # Factorization
    fit_options = fit_options_for(matrix, config)
    if opts.k is not None:
        seed = derive_seed(config.seed, 'fit')
        model = fit(matrix.X, matrix.W, opts.k, opts=fit_options, seed=seed, threads=config.threads,
                    row_labels=matrix.row_labels, col_labels=matrix.col_labels, progress=bool(verbose))
    else:
        seed = derive_seed(config.seed, 'select-k')
        k_star, models = select_k(matrix.X, matrix.W, k_max=opts.kmax, tau=opts.tau, opts=fit_options, seed=seed,
                                  threads=config.threads, row_labels=matrix.row_labels,
                                  col_labels=matrix.col_labels, progress=bool(verbose))
        model = models[k_star - 1]
        outputs += write_table(error_curve(models), output('model'), 'error_curve',
                               metadata={'selected_k': k_star, 'tau': opts.tau, 'kmax': opts.kmax})
        _logger.info("Selected k=%d.", k_star)
    model, _ = normalize_clusters(model)
    outputs += save_model(model, output('model.json'))

    # Reports
    report_prefix = output('report')
    for kind in MODEL_REPORTS:
        outputs += model_report(model, kind, report_prefix, log_scale=opts.log,
                                period_count=config.calendar.period_count)
    activity = pd.DataFrame(cohort.activity(), columns=['period', 'students'])
    outputs += write_table(activity, report_prefix, 'activity',
                           metadata={'dropped_sessions': cohort.dropped_sessions()})
    outputs += write_table(feature_overview(matrix), report_prefix, 'overview', metadata={'matrix_rows': matrix.n})

    write_manifest(output('pipeline'), 'pipeline', inputs=inputs, options=opts, seed=seed, outputs=outputs)
    return model
