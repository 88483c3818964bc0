# -*- coding: utf-8 -*-
"""A collection of tools for checking and summarizing the matrices of the pipeline.
Most of the routines work with numpy arrays or xarray.DataArray types.
"""
__all__ = ['print_matrix_summary', 'get_matrix_stats', 'assert_expected_shape']

import logging
from typing import Union, Sequence, Tuple

import numpy as np
import xarray as xr

_logger = logging.getLogger(__name__)


def get_matrix_stats(values: Union[np.ndarray, xr.DataArray],
                     mask: Union[np.ndarray, None] = None) -> dict:
    """Retrieve a dictionary with summary statistics over the masked-in cells

    Parameters
    ----------
    values : numpy.ndarray or xarray.DataArray
    mask : numpy.ndarray, optional
        binary; cells with 0 are left out

    Returns
    -------
    `dict`
    """
    values = np.asarray(values, dtype=float)
    if mask is not None:
        values = values[np.asarray(mask) != 0]
    if values.size == 0:
        return {'min': np.nan, 'mean': np.nan, 'max': np.nan}
    return {
        'min': float(values.min()),
        'mean': float(values.mean()),
        'max': float(values.max())
    }


def print_matrix_summary(values: Union[np.ndarray, xr.DataArray],
                         name: str = 'X',
                         mask: Union[np.ndarray, None] = None) -> None:
    """Log brief stats for a matrix

    Parameters
    ----------
    values : numpy.ndarray or xarray.DataArray
    name : `str`, default 'X'
    mask : numpy.ndarray, optional
    """
    stats_dict = get_matrix_stats(values, mask)
    missing = 0 if mask is None else int(np.sum(np.asarray(mask) == 0))

    _logger.info("Summary for <%s>%s:", name, ' (%d masked cells)' % missing if missing else '')
    _logger.info("  min: %s", str(stats_dict['min']))
    _logger.info("  mean: %s", str(stats_dict['mean']))
    _logger.info("  max: %s", str(stats_dict['max']))
    _logger.info("  shape: (" + ', '.join(str(d) for d in np.shape(values)) + ")")


def assert_expected_shape(name: str,
                          array: np.ndarray,
                          expected_shape: Sequence[Union[int, None]]
                          ) -> Tuple[int, ...]:
    """Raise a ValueError if an array's shape doesn't match the given one

    Parameters
    ----------
    name : str
        used in the error message
    array : numpy.ndarray
    expected_shape : sequence
        expected length of each dimension; None accepts any length

    Returns
    -------
    tuple
        the array's shape
    """
    shape = np.shape(array)
    if len(shape) != len(expected_shape):
        raise ValueError("<%s> must have %d dimensions, not %d." % (name, len(expected_shape), len(shape)))
    mismatched = [(i, s, e) for i, (s, e) in enumerate(zip(shape, expected_shape)) if (e is not None) and (s != e)]
    if mismatched:
        msg = ', '.join(f"dimension {i} is {s} instead of {e}" for i, s, e in mismatched)
        raise ValueError("Shape of <%s> does not conform: %s." % (name, msg))
    return shape
