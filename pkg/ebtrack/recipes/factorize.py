"""Factorize a feature matrix into soft clusters, for a given k or with k-selection

Note
----
Both stages read '<matrix>_matrix.csv' and '<matrix>_mask.csv', normalize the clusters of the fitted
model, and write the model JSON with its U and V exported as CSV next to it.
"""
import os
import logging
import argparse
from dataclasses import replace
from typing import Union, Tuple

from ebtrack import set_verbose, benchmark_stage
from ebtrack.analysis.reports import write_table
from ebtrack.formatters import with_suffix
from ebtrack.operations.features import FeatureMatrix
from ebtrack.operations.wnmf import FactorModel, FitOptions, fit, select_k, normalize_clusters, error_curve, \
    resolve_bounds
from ebtrack.recipes.recipe_utils import require_option, check_inputs, check_output, write_manifest, derive_seed
from ebtrack.stage_parsers import parse_stage_options, add_fit_args_to_parser, add_select_k_args_to_parser, \
    PipelineConfig

_logger = logging.getLogger(__name__)


def load_matrix(prefix: str) -> FeatureMatrix:
    """Read a matrix and its mask, checking that both files exist"""
    check_inputs(with_suffix(prefix, 'matrix.csv'), with_suffix(prefix, 'mask.csv'))
    return FeatureMatrix.read(prefix)


def fit_options_for(matrix: FeatureMatrix, config: PipelineConfig) -> FitOptions:
    """The configured fit options, with feature bounds placed on the matrix columns"""
    return replace(config.fit_options, bounds=resolve_bounds(config.feature_bounds, matrix.col_labels))


def save_model(model: FactorModel, out: str) -> Tuple[str, str, str]:
    """Write the model JSON, and U and V as CSV under the same name"""
    model.to_json(out)
    u_path, v_path = model.write_factor_csvs(os.path.splitext(out)[0])
    return out, u_path, v_path


@benchmark_stage
def fit_model(options: Union[dict, argparse.Namespace],
              verbose: Union[bool, str] = False,
              ) -> FactorModel:
    """Fit a model with k clusters.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It can contain the following keys:
            matrix : str
                (required) prefix of the matrix files
            k : int
                (required) number of clusters
            seed : int, default 42
            restarts : int, default 5
            tol : float, default 1e-6
            max_iters : int, default 500
            denom_guard : float, default 1e-12
            lin_epsilon : float, default 1e-9
            bound : list of str, default ['f10=1.0']
            threads : int, optional
            out : str
                model JSON to write
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    FactorModel
        normalized
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_fit_args_to_parser, 'fit')

    matrix_prefix = require_option(opts, 'matrix')
    k = require_option(opts, 'k')
    matrix = load_matrix(matrix_prefix)
    check_output(opts.out)
    config = PipelineConfig.from_namespace(opts)

    seed = derive_seed(config.seed, 'fit')
    model = fit(matrix.X, matrix.W, k, opts=fit_options_for(matrix, config), seed=seed, threads=config.threads,
                row_labels=matrix.row_labels, col_labels=matrix.col_labels, progress=bool(verbose))
    model, _ = normalize_clusters(model)
    outputs = save_model(model, opts.out)

    write_manifest(opts.out, 'fit', inputs=[with_suffix(matrix_prefix, 'matrix.csv'),
                                            with_suffix(matrix_prefix, 'mask.csv')],
                   options=opts, seed=seed, outputs=outputs)
    return model


@benchmark_stage
def select_k_model(options: Union[dict, argparse.Namespace],
                   verbose: Union[bool, str] = False,
                   ) -> Tuple[int, FactorModel]:
    """Fit k = 1..kmax and keep the model of the selected k.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It can contain the keys of `fit_model` except k, and:
            kmax : int, default 10
            tau : float, default 0.01
        The error curve is written as '<out without extension>_error_curve.csv'.
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    tuple
        the selected k and its normalized model
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_select_k_args_to_parser, 'select_k')

    matrix_prefix = require_option(opts, 'matrix')
    matrix = load_matrix(matrix_prefix)
    check_output(opts.out)
    config = PipelineConfig.from_namespace(opts)

    seed = derive_seed(config.seed, 'select-k')
    k_star, models = select_k(matrix.X, matrix.W, k_max=opts.kmax, tau=opts.tau,
                              opts=fit_options_for(matrix, config), seed=seed, threads=config.threads,
                              row_labels=matrix.row_labels, col_labels=matrix.col_labels, progress=bool(verbose))
    model, _ = normalize_clusters(models[k_star - 1])
    outputs = save_model(model, opts.out)
    outputs += write_table(error_curve(models), os.path.splitext(opts.out)[0], 'error_curve',
                           metadata={'selected_k': k_star, 'tau': opts.tau, 'kmax': opts.kmax})

    write_manifest(opts.out, 'select-k', inputs=[with_suffix(matrix_prefix, 'matrix.csv'),
                                                 with_suffix(matrix_prefix, 'mask.csv')],
                   options=opts, seed=seed, outputs=outputs)
    _logger.info("Selected k=%d.", k_star)
    return k_star, model
