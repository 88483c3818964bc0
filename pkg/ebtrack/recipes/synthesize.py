"""Generate a synthetic cohort with planted behaviors

Note
----
'synth matrix' writes '<out>_matrix.csv' and '<out>_mask.csv'; 'synth events' writes '<out>_events.csv'.
Both write the planted memberships as '<out>_planted_U.csv' ('synth matrix' also '<out>_planted_V.csv').
"""
import logging
import argparse
from typing import Union, List

import numpy as np
import pandas as pd

from ebtrack import set_verbose, benchmark_stage
from ebtrack.analysis.reports import write_table
from ebtrack.data_source.events.load import write_events
from ebtrack.data_source.synthetic.generator import SyntheticSpec, plant_factors, synth_matrix, synth_event_log
from ebtrack.formatters import with_suffix
from ebtrack.recipes.recipe_utils import check_output, write_manifest, derive_seed
from ebtrack.stage_parsers import parse_stage_options, add_synth_args_to_parser

_logger = logging.getLogger(__name__)


def _memberships_frame(U: np.ndarray, row_labels) -> pd.DataFrame:
    dataf = pd.DataFrame(U, columns=[f"cluster{i + 1}" for i in range(U.shape[1])])
    dataf.insert(0, 'student_id', [s for s, _ in row_labels])
    dataf.insert(1, 'period', [p for _, p in row_labels])
    return dataf


def spec_from_options(opts: argparse.Namespace) -> SyntheticSpec:
    """The cohort specification of resolved stage options; the seed is derived for the synth stage"""
    return SyntheticSpec(n_students=opts.students,
                         n_periods=opts.n_periods,
                         k_true=opts.k_true,
                         noise_sigma=opts.noise,
                         missing_rate=opts.missing_rate,
                         vacation_periods=dict(opts.vacation or []),
                         seed=derive_seed(opts.seed, 'synth'),
                         feature_ids=opts.features,
                         activity_rate=opts.activity_rate,
                         hours_scale=opts.hours_scale,
                         epoch=opts.epoch,
                         period_length=opts.period_length,
                         timezone=opts.timezone)


@benchmark_stage
def synthesize(options: Union[dict, argparse.Namespace],
               verbose: Union[bool, str] = False,
               ) -> List[str]:
    """Write a synthetic matrix or event log.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It can contain the following keys:
            synth_kind : str
                (required) 'matrix' or 'events'
            students : int, default 500
            periods : int, default 20
            k : int, default 3
                number of planted behaviors
            noise : float, default 0
            missing_rate : float, default 0
            vacation : list of str, optional
                e.g. ['5:0.2'] for period 5 at 20% activity
            activity_rate : float, default 0.9
            hours_scale : float, default 2.0
            features : str, default '1-10'
            seed : int, default 42
            out : str
                prefix of the output files
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    list
        paths written
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_synth_args_to_parser, 'synth')
    check_output(opts.out)
    spec = spec_from_options(opts)
    metadata = {'k_true': spec.k_true, 'seed': spec.seed, 'vacation_periods': spec.vacation_periods}

    if opts.synth_kind == 'matrix':
        planted = plant_factors(spec)
        matrix = synth_matrix(planted.U, planted.V, spec, planted.row_labels)
        outputs = list(matrix.write(opts.out))
        clusters = pd.DataFrame(planted.V, columns=matrix.feature_names)
        clusters.insert(0, 'cluster', [f"cluster{i + 1}" for i in range(spec.k_true)])
        outputs += write_table(clusters, opts.out, 'planted_V', metadata=metadata)
        U, row_labels = planted.U, planted.row_labels
    else:
        log = synth_event_log(spec)
        events_path = with_suffix(opts.out, 'events.csv')
        write_events(log.events, events_path)
        outputs = [events_path]
        U, row_labels = log.U, log.row_labels
    outputs += write_table(_memberships_frame(U, row_labels), opts.out, 'planted_U', metadata=metadata)

    write_manifest(opts.out, 'synth', inputs=[], options=opts, seed=spec.seed, outputs=outputs)
    return outputs
