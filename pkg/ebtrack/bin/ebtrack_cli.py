#!/usr/bin/env python
"""Command line interface for running the behavior-tracking stages

Examples
--------
    $ ebtrack --help
    $ ebtrack sessionize --events events.csv --gap 600 --out sessions.csv
    $ ebtrack featurize --sessions sessions.csv --features experiment2 --out features
    $ ebtrack select-k --matrix features --kmax 10 --out model.json
    $ ebtrack report clusters --model model.json --log --out report
    $ ebtrack synth events --students 500 --periods 20 --k 3 --vacation 10:0.2 --out synthetic
    $ ebtrack pipeline @stage_options_example.txt
"""
import sys
import logging
import argparse
from typing import Optional, Sequence

import ebtrack
from ebtrack.stage_parsers import add_sessionize_args_to_parser, add_featurize_args_to_parser, \
    add_fit_args_to_parser, add_select_k_args_to_parser, add_report_args_to_parser, add_synth_args_to_parser, \
    add_pipeline_args_to_parser

_logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class StageArgumentParser(argparse.ArgumentParser):
    """An argument parser that exits with status 1 on usage errors, and reads argument files
    with several arguments on a line and '#' comments"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, '%s: error: %s\n' % (self.prog, message))

    def convert_arg_line_to_args(self, arg_line):
        for arg in arg_line.split():
            if not arg.strip():
                continue
            if arg[0] == '#':
                break
            yield arg


def build_parser() -> argparse.ArgumentParser:
    """The top-level parser, with one subcommand per stage"""
    parser = StageArgumentParser(prog='ebtrack',
                                 description="Track behavioral patterns of students from educational event logs",
                                 fromfile_prefix_chars='@', allow_abbrev=False)
    parser.add_argument('--version', action='version', version='%(prog)s ' + ebtrack.__version__)
    parser.add_argument('--verbose', action='store_true')

    # A separate subparser is set up for each stage to handle its specific input arguments.
    subparsers = parser.add_subparsers(title='available stage subcommands', dest='subparser_name')
    #
    add_sessionize_args_to_parser(
        subparsers.add_parser('sessionize', help='merge raw events into sessions', allow_abbrev=False))
    add_featurize_args_to_parser(
        subparsers.add_parser('featurize', help='build the weekly feature matrix of a sessions file',
                              allow_abbrev=False))
    add_fit_args_to_parser(
        subparsers.add_parser('fit', help='factorize a feature matrix with k clusters', allow_abbrev=False))
    add_select_k_args_to_parser(
        subparsers.add_parser('select-k', help='choose the number of clusters and factorize', allow_abbrev=False))
    add_report_args_to_parser(
        subparsers.add_parser('report', help='write a report table of a model or matrix', allow_abbrev=False))
    add_synth_args_to_parser(
        subparsers.add_parser('synth', help='generate a synthetic cohort with planted behaviors',
                              allow_abbrev=False))
    add_pipeline_args_to_parser(
        subparsers.add_parser('pipeline', help='run every stage from an events file to the reports',
                              allow_abbrev=False))
    return parser


def main(args: argparse.Namespace) -> int:
    """Run a selected stage with parsed options

    Parameters
    ----------
    args
        Parsed arguments

    Returns
    -------
    int
        Exit code
    """
    # Get the argument values. Then clear them from the namespace so the stages do not encounter them.
    verbosity = args.verbose
    stage_name = args.subparser_name
    del (args.verbose, args.subparser_name)

    # Run the selected stage
    if stage_name == 'sessionize':
        from ebtrack.recipes import sessionize
        sessionize(args, verbose=verbosity)

    elif stage_name == 'featurize':
        from ebtrack.recipes import featurize
        featurize(args, verbose=verbosity)

    elif stage_name == 'fit':
        from ebtrack.recipes import fit_model
        fit_model(args, verbose=verbosity)

    elif stage_name == 'select-k':
        from ebtrack.recipes import select_k_model
        select_k_model(args, verbose=verbosity)

    elif stage_name == 'report':
        from ebtrack.recipes import report
        report(args, verbose=verbosity)

    elif stage_name == 'synth':
        from ebtrack.recipes import synthesize
        synthesize(args, verbose=verbosity)

    elif stage_name == 'pipeline':
        from ebtrack.recipes import pipeline
        pipeline(args, verbose=verbosity)

    return EXIT_OK  # a clean, no-issue, exit


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse the arguments, run the stage and map failures to an exit status

    Returns
    -------
    int
        0 on success, 1 for usage and validation errors, 2 for input/output errors
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()

    # Print the help message if no arguments are supplied.
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_INVALID

    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else EXIT_INVALID
    if args.subparser_name is None:
        parser.print_usage(sys.stderr)
        _logger.error("A stage subcommand is required.")
        return EXIT_INVALID

    try:
        return main(args)
    except ValueError as err:
        _logger.error("Invalid input: %s", err)
        return EXIT_INVALID
    except OSError as err:
        _logger.error("Input/output error: %s", err)
        return EXIT_IO


def main_entry() -> None:
    sys.exit(run())


if __name__ == '__main__':
    main_entry()
