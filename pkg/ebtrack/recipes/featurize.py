"""Group sessions into weekly student entries and build the masked feature matrix

Note
----
This stage reads a sessions CSV and writes '<out>_matrix.csv' and '<out>_mask.csv'.
"""
import logging
import argparse
from typing import Union

from ebtrack import set_verbose, benchmark_stage
from ebtrack.data_source.cohort import Cohort
from ebtrack.operations.features import FeatureMatrix
from ebtrack.operations.utils import print_matrix_summary
from ebtrack.recipes.recipe_utils import require_option, check_inputs, check_output, write_manifest
from ebtrack.stage_parsers import parse_stage_options, add_featurize_args_to_parser, PipelineConfig

_logger = logging.getLogger(__name__)


@benchmark_stage
def featurize(options: Union[dict, argparse.Namespace],
              verbose: Union[bool, str] = False,
              ) -> FeatureMatrix:
    """Build the feature matrix of a sessions file.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It can contain the following keys:
            sessions : str
                (required) sessions CSV written by the sessionize stage
            epoch : str, default '2015-01-08'
            period_length : int, default 7
            periods : int, default 112
            features : str, default '1-10'
            school_hours : str, default '08:00-16:00'
            timezone : str, default 'Europe/Copenhagen'
            subjects : str, optional
                JSON map of subject -> subject class; the packaged map by default
            out : str
                prefix of the matrix files
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    FeatureMatrix
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_featurize_args_to_parser, 'featurize')

    sessions_path = require_option(opts, 'sessions')
    check_inputs(*[p for p in (sessions_path, opts.subjects) if p is not None])
    check_output(opts.out)
    config = PipelineConfig.from_namespace(opts)

    cohort = Cohort(verbose=verbose).load_sessions(sessions_path).group_by_period(config.calendar)
    matrix = cohort.feature_matrix(config.feature_spec)
    print_matrix_summary(matrix.X, name='feature matrix', mask=matrix.W)
    outputs = matrix.write(opts.out)

    inputs = [sessions_path] + ([opts.subjects] if opts.subjects else [])
    write_manifest(opts.out, 'featurize', inputs=inputs, options=opts, outputs=outputs)
    return matrix
