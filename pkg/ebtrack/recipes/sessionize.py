"""Merge raw log events into sessions

Note
----
This stage parses an events CSV and writes a sessions CSV.
"""
import logging
import argparse
from typing import Union

from ebtrack import set_verbose, benchmark_stage
from ebtrack.data_source.cohort import Cohort
from ebtrack.data_source.events.load import write_sessions
from ebtrack.recipes.recipe_utils import require_option, check_inputs, check_output, write_manifest
from ebtrack.stage_parsers import parse_stage_options, add_sessionize_args_to_parser

_logger = logging.getLogger(__name__)


@benchmark_stage
def sessionize(options: Union[dict, argparse.Namespace],
               verbose: Union[bool, str] = False,
               ) -> str:
    """Build sessions from an events file.

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        Stage options specified as key:value pairs. It can contain the following keys:
            events : str
                (required) events CSV with header student_id,timestamp,subject,kind,bloom,score,duration
            gap : float, default 600
                seconds; consecutive same-subject events closer than this join one session
            raw_bloom : bool, default False
                the bloom column holds taxonomy levels 1-6
            out : str
                sessions CSV to write
            config : str, optional
                run configuration JSON
    verbose : Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    str
        path of the sessions file
    """
    set_verbose(_logger, verbose)
    _logger.debug("Parsing stage parameters...")
    opts = parse_stage_options(options, add_sessionize_args_to_parser, 'sessionize')

    events_path = require_option(opts, 'events')
    check_inputs(events_path)
    check_output(opts.out)

    cohort = Cohort(verbose=verbose).load_events(events_path, raw_bloom_levels=opts.raw_bloom)
    cohort.sessionize(gap=opts.gap)
    write_sessions(cohort.stepB_sessions, opts.out)

    write_manifest(opts.out, 'sessionize', inputs=[events_path], options=opts, outputs=[opts.out])
    return opts.out
