"""Write one report table of a fitted model (or of a feature matrix, for the overview)

Note
----
Each report is written as '<out>_<kind>.csv' with a JSON sidecar '<out>_<kind>.json'.
"""
import logging
import argparse
from typing import Union, Tuple

from ebtrack import set_verbose, benchmark_stage
from ebtrack.analysis.reports import cluster_report, membership_distribution, membership_timeseries, \
    activity_from_labels, feature_overview, student_trajectory, write_table
from ebtrack.formatters import with_suffix
from ebtrack.operations.wnmf import FactorModel
from ebtrack.recipes.factorize import load_matrix
from ebtrack.recipes.recipe_utils import require_option, check_inputs, check_output, write_manifest
from ebtrack.stage_parsers import parse_stage_options, add_report_args_to_parser

_logger = logging.getLogger(__name__)


def model_report(model: FactorModel,
                 kind: str,
                 out: str,
                 log_scale: bool = False,
                 period_count: Union[int, None] = None,
                 student: Union[str, None] = None) -> Tuple[str, str]:
    """Compute and write one model report; returns the CSV and sidecar paths"""
    if kind == 'clusters':
        result = cluster_report(model, scale='log10' if log_scale else 'linear')
        return write_table(result.table, out, kind, metadata=result.metadata(), index=True)
    if kind == 'distribution':
        result = membership_distribution(model)
        return write_table(result.to_frame(), out, kind, metadata=result.metadata())
    if kind == 'timeseries':
        result = membership_timeseries(model, period_count=period_count)
        return write_table(result.to_frame(), out, kind, metadata=result.metadata())
    if kind == 'activity':
        if model.row_labels is None:
            raise ValueError("The model carries no row labels to count activity from.")
        return write_table(activity_from_labels(model.row_labels, period_count), out, kind)
    if kind == 'trajectory':
        if student is None:
            raise ValueError("The --student option is required for the trajectory report.")
        return write_table(student_trajectory(model, student), out, kind, metadata={'student_id': student})
    raise ValueError("Unknown model report <%s>." % kind)


@benchmark_stage
def report(options: Union[dict, argparse.Namespace],
           verbose: Union[bool, str] = False,
           ) -> Tuple[str, str]:
    """Write a report.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It can contain the following keys:
            report_kind : str
                (required) one of 'clusters', 'distribution', 'timeseries', 'activity', 'overview', 'trajectory'
            model : str
                model JSON; required except for the overview
            matrix : str
                matrix prefix; required for the overview
            student : str
                student id; required for the trajectory
            periods : int, optional
                number of periods of the timeseries and activity reports
            log : bool, default False
                log10 scale for the clusters report
            out : str
                prefix of the report files
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    tuple
        paths of the CSV and its JSON sidecar
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_report_args_to_parser, 'report')
    check_output(opts.out)

    if opts.report_kind == 'overview':
        matrix_prefix = require_option(opts, 'matrix')
        matrix = load_matrix(matrix_prefix)
        outputs = write_table(feature_overview(matrix), opts.out, 'overview', metadata={'matrix_rows': matrix.n})
        inputs = [with_suffix(matrix_prefix, 'matrix.csv'), with_suffix(matrix_prefix, 'mask.csv')]
    else:
        model_path = require_option(opts, 'model')
        check_inputs(model_path)
        model = FactorModel.from_json(model_path)
        outputs = model_report(model, opts.report_kind, opts.out, log_scale=opts.log,
                               period_count=opts.period_count, student=opts.student)
        inputs = [model_path]

    write_manifest(outputs[0], 'report', inputs=inputs, options=opts, outputs=outputs)
    return outputs
