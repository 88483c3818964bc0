"""Command-line arguments of each pipeline stage, and how their values are resolved.

A value comes from, in order of precedence: an explicit flag (or dict key), the run configuration JSON
given by --config, and finally the package defaults in defaults.ini.
"""
import argparse, json, os, logging
from dataclasses import dataclass
from typing import Union, Callable, Optional, Dict, Tuple

from ebtrack import load_config_file, load_subjects_dict
from ebtrack.formatters.args import options_to_args, nullable_int, positive_int, positive_float, \
    unit_interval_float, non_negative_float, valid_fraction, valid_date_string, valid_time_window, valid_bound, \
    valid_vacation, valid_existing_path
from ebtrack.operations.features import FeatureSpec, parse_feature_ids
from ebtrack.operations.sessions import PeriodCalendar
from ebtrack.operations.wnmf import FitOptions, DEFAULT_FEATURE_BOUNDS

_logger = logging.getLogger(__name__)

REPORT_KINDS = ('clusters', 'distribution', 'timeseries', 'activity', 'overview', 'trajectory')
SYNTH_KINDS = ('matrix', 'events')

# Argument destination -> (defaults.ini section, key)
_INI_DEFAULTS = {
    'gap': ('sessions', 'gap_seconds'),
    'epoch': ('calendar', 'epoch'),
    'period_length': ('calendar', 'period_length'),
    'periods': ('calendar', 'period_count'),
    'features': ('features', 'feature_ids'),
    'school_hours': ('features', 'school_hours'),
    'timezone': ('features', 'timezone'),
    'seed': ('fit', 'seed'),
    'restarts': ('fit', 'restarts'),
    'max_iters': ('fit', 'max_iters'),
    'tol': ('fit', 'rel_tol'),
    'denom_guard': ('fit', 'denom_guard'),
    'lin_epsilon': ('fit', 'lin_epsilon'),
    'bound': ('fit', 'bounds'),
    'kmax': ('fit', 'kmax'),
    'tau': ('fit', 'tau'),
}
# Synthetic cohort sizes have no entry in defaults.ini.
_SYNTH_DEFAULTS = {
    'students': '500',
    'n_periods': '20',
    'k_true': '3',
    'noise': '0',
    'missing_rate': '0',
    'activity_rate': '0.9',
    'hours_scale': '2.0',
}
_DEFAULT_OUTPUTS = {
    'sessionize': 'sessions.csv',
    'featurize': 'features',
    'fit': 'model.json',
    'select_k': 'model.json',
    'report': 'report',
    'synth': 'synthetic',
    'pipeline': '',
}


def valid_feature_selection(features: str) -> Tuple[int, ...]:
    """Validate a feature selection such as '1-10', '6,7,8,11-14' or 'experiment2'"""
    try:
        return parse_feature_ids(features)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err))


def add_shared_arguments_for_stages(parser: argparse.ArgumentParser) -> None:
    """Add arguments common to all stages to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    parser.add_argument('--config', default=None,
                        help='JSON file of option values; explicit flags take precedence')
    parser.add_argument('--seed', default=None, type=nullable_int,
                        help='master seed; each stage derives its own seed from it. Default is 42.')
    parser.add_argument('--threads', default=None, type=positive_int,
                        help='worker threads for fit restarts. Default is all cores; 1 runs sequentially.')
    parser.add_argument('--out', default=None,
                        help='output path or prefix. Defaults to a file under the [save_path] of defaults.ini.')


def _add_calendar_and_feature_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--epoch', default=None, type=valid_date_string,
                        help='start date (UTC midnight) of period 0. Default is 2015-01-08.')
    parser.add_argument('--period-length', default=None, type=positive_int,
                        help='days per activity period. Default is 7.')
    parser.add_argument('--periods', default=None, type=positive_int,
                        help='number of activity periods. Default is 112.')
    parser.add_argument('--features', default=None, type=valid_feature_selection,
                        help="feature ids, e.g. '1-10', '6,7,8,11-14', 'experiment1' or 'experiment2'")
    parser.add_argument('--school-hours', default=None, type=valid_time_window,
                        help="local school hours, e.g. '08:00-16:00'")
    parser.add_argument('--timezone', default=None,
                        help='IANA time zone of the students. Default is Europe/Copenhagen.')
    parser.add_argument('--subjects', default=None,
                        help='JSON file mapping each subject to its class (language, societal, science)')


def _add_fit_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--restarts', default=None, type=positive_int,
                        help='seeded random initializations per fit. Default is 5.')
    parser.add_argument('--tol', default=None, type=positive_float,
                        help='relative objective decrease at which iterations stop. Default is 1e-6.')
    parser.add_argument('--max-iters', default=None, type=positive_int,
                        help='iteration limit per restart. Default is 500.')
    parser.add_argument('--denom-guard', default=None, type=positive_float)
    parser.add_argument('--lin-epsilon', default=None, type=positive_float)
    parser.add_argument('--bound', default=None, nargs='+', type=valid_bound,
                        help="upper bounds of features with missing values, e.g. 'f10=1.0'")


def _add_selection_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--kmax', default=None, type=positive_int,
                        help='largest number of clusters tried. Default is 10.')
    parser.add_argument('--tau', default=None, type=unit_interval_float,
                        help='stop when one more cluster lowers the error by less than tau * err(1). '
                             'Default is 0.01.')


def add_sessionize_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--events', default=None, help='events CSV')
    parser.add_argument('--gap', default=None, type=positive_float,
                        help='seconds; closer same-subject events join one session. Default is 600.')
    parser.add_argument('--raw-bloom', action='store_true', default=None,
                        help='the bloom column holds taxonomy levels 1-6 instead of groups 1-4')


def add_featurize_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--sessions', default=None, help='sessions CSV written by the sessionize stage')
    _add_calendar_and_feature_arguments(parser)


def add_fit_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--matrix', default=None, help='prefix of the matrix and mask CSV files')
    parser.add_argument('--k', default=None, type=positive_int, help='number of clusters')
    _add_fit_arguments(parser)


def add_select_k_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--matrix', default=None, help='prefix of the matrix and mask CSV files')
    _add_fit_arguments(parser)
    _add_selection_arguments(parser)


def add_report_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    parser.add_argument('report_kind', choices=REPORT_KINDS)
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--model', default=None, help='model JSON written by fit or select-k')
    parser.add_argument('--matrix', default=None, help='matrix prefix, for the overview report')
    parser.add_argument('--student', default=None, help='student id, for the trajectory report')
    parser.add_argument('--periods', dest='period_count', default=None, type=positive_int,
                        help='number of periods of the timeseries and activity reports. '
                             'Default is one past the last active period.')
    parser.add_argument('--log', action='store_true', default=None,
                        help='log10 scale for the clusters report')


def add_synth_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    parser.add_argument('synth_kind', choices=SYNTH_KINDS)
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--students', default=None, type=positive_int, help='Default is 500.')
    parser.add_argument('--periods', dest='n_periods', default=None, type=positive_int, help='Default is 20.')
    parser.add_argument('--k', dest='k_true', default=None, type=positive_int,
                        help='number of planted behaviors. Default is 3.')
    parser.add_argument('--noise', default=None, type=non_negative_float,
                        help='standard deviation of matrix noise. Default is 0.')
    parser.add_argument('--missing-rate', default=None, type=valid_fraction,
                        help='chance that an f10 matrix cell is masked. Default is 0.')
    parser.add_argument('--vacation', default=None, nargs='*', type=valid_vacation,
                        help="vacation periods with activity multipliers, e.g. '5:0.2'")
    parser.add_argument('--activity-rate', default=None, type=positive_float,
                        help='chance that a student is active in a regular period. Default is 0.9.')
    parser.add_argument('--hours-scale', default=None, type=positive_float,
                        help='weekly hours per unit of membership, for event logs. Default is 2.0.')
    parser.add_argument('--features', default=None, type=valid_feature_selection,
                        help='matrix columns. Default is 1-10.')
    parser.add_argument('--epoch', default=None, type=valid_date_string)
    parser.add_argument('--period-length', default=None, type=positive_int)
    parser.add_argument('--timezone', default=None)


def add_pipeline_args_to_parser(parser: argparse.ArgumentParser) -> None:
    """Add stage arguments to a parser object

    Parameters
    ----------
    parser : argparse.ArgumentParser
    """
    add_shared_arguments_for_stages(parser)
    parser.add_argument('--events', default=None, help='events CSV')
    parser.add_argument('--gap', default=None, type=positive_float)
    parser.add_argument('--raw-bloom', action='store_true', default=None)
    _add_calendar_and_feature_arguments(parser)
    parser.add_argument('--k', default=None, type=positive_int,
                        help='number of clusters; chosen by k-selection when omitted')
    _add_fit_arguments(parser)
    _add_selection_arguments(parser)
    parser.add_argument('--log', action='store_true', default=None,
                        help='log10 scale for the clusters report')


def load_run_config(path: Union[str, os.PathLike]) -> dict:
    """Read a run configuration JSON object

    Raises
    ------
    FileNotFoundError
        if the file does not exist
    ValueError
        if it does not hold a JSON object
    """
    valid_existing_path(path)
    with open(path, 'r') as f:
        try:
            config = json.load(f)
        except json.JSONDecodeError as err:
            raise ValueError("Config file <%s> is not valid JSON: %s" % (path, err))
    if not isinstance(config, dict):
        raise ValueError("Config file <%s> must hold a JSON object." % path)
    return {k.replace('-', '_'): v for k, v in config.items()}


def _convert(action: argparse.Action, value, source: str):
    """Apply an argument's type to a value that did not pass through the command line"""
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        return bool(value)
    convert = action.type or str
    try:
        if action.nargs in ('+', '*'):
            items = value.split() if isinstance(value, str) else (value if isinstance(value, list) else [value])
            return [convert(str(item)) for item in items]
        if action.choices is not None and value not in action.choices:
            raise argparse.ArgumentTypeError("invalid choice <%s>" % value)
        return convert(str(value))
    except argparse.ArgumentTypeError as err:
        raise ValueError("Invalid value for <%s> from %s: %s" % (action.dest, source, err))


def _option_names(action: argparse.Action) -> list:
    """Keys under which a run configuration may hold an argument: its destination and its long flags"""
    return [action.dest] + [o.lstrip('-').replace('-', '_') for o in action.option_strings]


def resolve_options(args: argparse.Namespace,
                    parser: argparse.ArgumentParser,
                    stage: str) -> argparse.Namespace:
    """Fill unset options from the run configuration, then from the package defaults

    Parameters
    ----------
    args : argparse.Namespace
    parser : argparse.ArgumentParser
        the stage parser that produced (or could produce) args
    stage : str

    Returns
    -------
    argparse.Namespace
        a new namespace; args is left unchanged
    """
    resolved = argparse.Namespace(**vars(args))
    run_config = load_run_config(args.config) if getattr(args, 'config', None) else {}
    ini = load_config_file()

    for action in parser._actions:
        dest = action.dest
        if dest == 'help' or getattr(resolved, dest, None) is not None:
            continue
        config_key = next((name for name in _option_names(action) if name in run_config), None)
        if config_key is not None:
            setattr(resolved, dest, _convert(action, run_config[config_key], 'the config file'))
        elif dest in _INI_DEFAULTS:
            section, key = _INI_DEFAULTS[dest]
            setattr(resolved, dest, _convert(action, ini.get(section, key, vars=os.environ), 'defaults.ini'))
        elif (stage == 'synth') and (dest in _SYNTH_DEFAULTS):
            setattr(resolved, dest, _convert(action, _SYNTH_DEFAULTS[dest], 'the synthetic defaults'))
        elif isinstance(action, argparse._StoreTrueAction):
            setattr(resolved, dest, False)
        elif dest == 'out':
            resolved.out = os.path.join(ini.get('save_path', 'value', vars=os.environ), _DEFAULT_OUTPUTS[stage])
        else:
            setattr(resolved, dest, None)

    ignored = sorted(set(run_config) - {name for a in parser._actions for name in _option_names(a)})
    if ignored:
        _logger.debug("Config keys not used by the %s stage: %s", stage, ignored)
    return resolved


def parse_stage_options(options: Union[dict, argparse.Namespace],
                        stage_argument_adder: Callable[[argparse.ArgumentParser], None],
                        stage: str
                        ) -> argparse.Namespace:
    """Parse and resolve the options of a stage execution

    Parameters
    ----------
    options : Union[dict, argparse.Namespace]
        specifications for a given stage execution
    stage_argument_adder : function
        a function that adds arguments defined for a particular stage to a parser object
    stage : str

    Returns
    -------
    a parsed argument namespace
    """
    parser = argparse.ArgumentParser(description='Run the %s stage.' % stage, allow_abbrev=False)
    stage_argument_adder(parser)

    if isinstance(options, dict):
        # In this case, the options have not yet been parsed.
        options = dict(options)
        positionals = [options.pop(a.dest) for a in parser._actions
                       if not a.option_strings and a.dest in options]
        args = parser.parse_args([str(p) for p in positionals] + options_to_args(options))
    elif isinstance(options, argparse.Namespace):
        # In this case, the options have been parsed previously.
        args = options
    else:
        raise TypeError('<%s> is an unexpected type of the stage options' % type(options))

    _logger.debug("Parsed argument parameters: %s", args)
    args = resolve_options(args, parser, stage)
    _logger.debug("Parsing is done.")
    return args


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings shared by the stages

    Attributes
    ----------
    events, sessions, matrix, model, out : str, optional
        input and output paths
    calendar : PeriodCalendar
    gap : float
    feature_spec : FeatureSpec
    fit_options : FitOptions
        bounds still keyed by feature id, see `feature_bounds`
    feature_bounds : dict
        feature id -> upper bound
    subjects : str, optional
        path of the subject map
    seed : int
    threads : int, optional
    """
    calendar: PeriodCalendar
    gap: float
    feature_spec: FeatureSpec
    fit_options: FitOptions
    feature_bounds: Dict[int, float]
    seed: int
    threads: Optional[int] = None
    events: Optional[str] = None
    sessions: Optional[str] = None
    matrix: Optional[str] = None
    model: Optional[str] = None
    out: Optional[str] = None
    subjects: Optional[str] = None

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> 'PipelineConfig':
        """Build from resolved options; options a stage does not have fall back to the package defaults"""
        ini = load_config_file()

        def option(name, convert, section_key):
            value = getattr(args, name, None)
            return value if value is not None else convert(ini.get(*section_key, vars=os.environ))

        subjects_path = getattr(args, 'subjects', None)
        bounds = getattr(args, 'bound', None)
        feature_bounds = dict(bounds) if bounds is not None else dict(DEFAULT_FEATURE_BOUNDS)
        return cls(
            calendar=PeriodCalendar(epoch=option('epoch', valid_date_string, _INI_DEFAULTS['epoch']),
                                    period_length=option('period_length', int, _INI_DEFAULTS['period_length']),
                                    period_count=option('periods', int, _INI_DEFAULTS['periods'])),
            gap=option('gap', float, _INI_DEFAULTS['gap']),
            feature_spec=FeatureSpec(feature_ids=option('features', parse_feature_ids, _INI_DEFAULTS['features']),
                                     school_hours=option('school_hours', valid_time_window,
                                                         _INI_DEFAULTS['school_hours']),
                                     subject_map=load_subjects_dict(subjects_path),
                                     timezone=option('timezone', str, _INI_DEFAULTS['timezone'])),
            fit_options=FitOptions(max_iters=option('max_iters', int, _INI_DEFAULTS['max_iters']),
                                   rel_tol=option('tol', float, _INI_DEFAULTS['tol']),
                                   denom_guard=option('denom_guard', float, _INI_DEFAULTS['denom_guard']),
                                   lin_epsilon=option('lin_epsilon', float, _INI_DEFAULTS['lin_epsilon']),
                                   restarts=option('restarts', int, _INI_DEFAULTS['restarts'])),
            feature_bounds=feature_bounds,
            seed=option('seed', int, _INI_DEFAULTS['seed']),
            threads=getattr(args, 'threads', None),
            events=getattr(args, 'events', None),
            sessions=getattr(args, 'sessions', None),
            matrix=getattr(args, 'matrix', None),
            model=getattr(args, 'model', None),
            out=getattr(args, 'out', None),
            subjects=subjects_path,
        )
