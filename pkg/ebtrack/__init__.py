"""
Python package `ebtrack` tracks behavioral patterns of students in an online educational system.
It turns raw page-access logs into sessions and weekly per-student features, soft-clusters the resulting
matrix with weighted non-negative matrix factorization, and reports how cluster membership is distributed
and how it develops over time.
A synthetic cohort generator with planted behaviors is included for verifying the whole chain.

"""
import os
import json
import time
import logging
import functools
import configparser
from typing import Union, Callable

__version__ = '1.0'

_logger = logging.getLogger(__name__)

_config_dir = os.path.join(os.path.dirname(os.path.realpath(__file__)), 'config')


def load_config_file() -> configparser.ConfigParser:
    """Read the package configuration file

    Returns
    -------
    configparser.ConfigParser
    """
    config = configparser.ConfigParser(os.environ,
                                       interpolation=configparser.ExtendedInterpolation(),
                                       comment_prefixes=('#', ';'))

    filepath = os.path.join(_config_dir, 'defaults.ini')
    config.read(filepath)

    return config


def load_subjects_dict(path: Union[str, os.PathLike, None] = None) -> dict:
    """Get the dictionary that maps each subject to its subject class

    Parameters
    ----------
    path
        a JSON file with a {subject: class} object. The packaged default map is used when None.

    Returns
    -------
    `dict`
    """
    if path is None:
        path = os.path.join(_config_dir, 'subjects_dict.json')
    with open(path, 'r') as f:
        result = json.load(f)

    return result


def set_verbose(logger: logging.Logger,
                verbose: Union[bool, str] = False
                ) -> None:
    """Set the level of the passed logger

    Parameters
    ----------
    logger: logging.Logger
    verbose: Union[bool, str]
        can be either True, False, or a string for level such as "INFO, DEBUG, etc."
    """
    logger.setLevel(validate_verbose(verbose))


def validate_verbose(verbose: Union[bool, str] = False) -> Union[int, str]:
    """Convert a verbosity argument to a logging level

    Parameters
    ----------
    verbose
        either True, False, or a string for level such as "INFO, DEBUG, etc."

    Returns
    -------
    `int` or `str`
        A logging verbosity level or string that corresponds to a verbosity level

    """
    if verbose is True:
        level_to_set = logging.DEBUG
    elif verbose is False:
        level_to_set = logging.INFO
    elif verbose is None:
        level_to_set = logging.WARN
    elif isinstance(verbose, (str, int)):
        level_to_set = verbose
    else:
        raise ValueError("Unexpected/unhandled verbose option <%s>. "
                         "Please use True, False or a string for level such as 'INFO, DEBUG, etc.'" % verbose)
    return level_to_set


def _config_logger():
    """Configure the package loggers"""
    import logging.config

    logconfig_path = os.path.join(_config_dir, 'log_config.json')
    with open(logconfig_path, 'r') as logging_configuration_file:
        config_dict = json.load(logging_configuration_file)

    logging.config.dictConfig(config_dict)


def benchmark_stage(func: Callable):
    """A decorator for pipeline stage functions that logs their wall-clock time
    to the logger of the module that defines the stage.
    """
    stage_logger = logging.getLogger(func.__module__)

    @functools.wraps(func)
    def display_time_and_call(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            returnval = func(*args, **kwargs)
        except Exception:
            stage_logger.debug('%s failed after %.3f seconds', func.__name__, time.perf_counter() - start_time)
            raise
        stage_logger.info('%s execution time (seconds): %.3f', func.__name__, time.perf_counter() - start_time)
        return returnval

    return display_time_and_call


_config_logger()
