"""Report tables derived from a fitted model: cluster matrix, membership distribution, per-period
membership averages, activity counts, feature overview and single-student trajectories.

Every table is written as CSV (17 significant digits) with a JSON sidecar of metadata, so that
plots can be produced by external tooling.
"""
import os
import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import xarray as xr
from scipy import stats

import ebtrack
from ebtrack.formatters import format_fixed, with_suffix
from ebtrack.operations.features import FeatureMatrix
from ebtrack.operations.wnmf import FactorModel

_logger = logging.getLogger(__name__)

LOG10_FLOOR = -4.0
HISTOGRAM_BINS = 10
SCALES = ('linear', 'log10')


def _cluster_names(k: int):
    return [f"cluster{i + 1}" for i in range(k)]


@dataclass(frozen=True)
class ClusterReport:
    """The cluster matrix

    Attributes
    ----------
    table : pandas.DataFrame
        k x m, indexed by cluster name, one column per feature
    scale : str
        'linear' or 'log10'
    sentinel : pandas.DataFrame
        True where a zero was clamped to the log10 floor
    """
    table: pd.DataFrame
    scale: str
    sentinel: pd.DataFrame

    def metadata(self) -> dict:
        return {'scale': self.scale,
                'log10_floor': LOG10_FLOOR if self.scale == 'log10' else None,
                'sentinel_cells': [[c, f] for c in self.sentinel.index for f in self.sentinel.columns
                                   if self.sentinel.loc[c, f]]}


@dataclass(frozen=True)
class MembershipDistribution:
    """Per cluster, the fraction of rows whose normalized membership falls in each width-0.1 bin

    Attributes
    ----------
    bins : numpy.ndarray
        k x 10; bin b covers [b/10, (b+1)/10), the last bin is closed
    n_rows_used : int
    n_rows_skipped : int
        rows of U that are all zero
    """
    bins: np.ndarray
    n_rows_used: int
    n_rows_skipped: int

    def to_frame(self) -> pd.DataFrame:
        edges = np.round(np.linspace(0, 1, HISTOGRAM_BINS + 1), 1)
        dataf = pd.DataFrame(self.bins.T, columns=_cluster_names(self.bins.shape[0]))
        dataf.insert(0, 'bin_low', edges[:-1])
        dataf.insert(1, 'bin_high', edges[1:])
        return dataf

    def metadata(self) -> dict:
        return {'n_rows_used': self.n_rows_used, 'n_rows_skipped': self.n_rows_skipped}


@dataclass(frozen=True)
class MembershipSeries:
    """Average (un-normalized) membership of each period

    Attributes
    ----------
    values : xarray.DataArray
        dims (period, cluster)
    empty : numpy.ndarray
        boolean per period; True for periods without rows, whose values are 0
    """
    values: xr.DataArray
    empty: np.ndarray

    @property
    def period_count(self) -> int:
        return self.values.sizes['period']

    def to_frame(self) -> pd.DataFrame:
        dataf = pd.DataFrame(self.values.values, columns=[str(c) for c in self.values['cluster'].values])
        dataf.insert(0, 'period', self.values['period'].values)
        dataf['empty'] = self.empty.astype(int)
        return dataf

    def metadata(self) -> dict:
        return {'period_count': self.period_count, 'empty_periods': [int(p) for p in np.flatnonzero(self.empty)]}


def _check_normalized(model: FactorModel, atol: float = 1e-9) -> None:
    sums = model.V.sum(axis=1)
    rescaled = ~np.array(model.degenerate, dtype=bool)
    if not np.allclose(sums[rescaled], 1.0, rtol=0, atol=atol):
        raise ValueError("Cluster rows of V must sum to one; normalize the model with normalize_clusters first.")


def membership_array(model: FactorModel,
                     row_labels: Optional[Sequence[Tuple[str, int]]] = None) -> xr.DataArray:
    """U as a labelled array with dims (row, cluster) and 'student_id'/'period' row coordinates

    Raises
    ------
    ValueError
        if labels are missing or don't match the rows of U
    """
    row_labels = model.row_labels if row_labels is None else row_labels
    if row_labels is None:
        raise ValueError("Row labels are required; the model carries none.")
    if len(row_labels) != model.n:
        raise ValueError("Got %d row labels for %d rows of U." % (len(row_labels), model.n))
    return xr.DataArray(model.U, dims=('row', 'cluster'),
                        coords={'cluster': _cluster_names(model.k),
                                'student_id': ('row', [str(s) for s, _ in row_labels]),
                                'period': ('row', [int(p) for _, p in row_labels])})


def cluster_report(model: FactorModel,
                   feature_names: Optional[Sequence[str]] = None,
                   scale: str = 'linear') -> ClusterReport:
    """Tabulate the normalized clusters

    Parameters
    ----------
    model : FactorModel
        normalized
    feature_names : sequence of str, optional
        defaults to the model's feature names
    scale : str, default 'linear'
        'log10' maps v > 0 to log10(v) clamped at -4, and zeros to -4 with a sentinel flag

    Raises
    ------
    ValueError
        for an unnormalized model, an unknown scale or a wrong number of feature names
    """
    if scale not in SCALES:
        raise ValueError("Scale must be one of %s, got <%s>." % (SCALES, scale))
    _check_normalized(model)
    feature_names = model.feature_names if feature_names is None else list(feature_names)
    if len(feature_names) != model.m:
        raise ValueError("Got %d feature names for %d features." % (len(feature_names), model.m))

    values = np.array(model.V)
    zeros = values <= 0
    if scale == 'log10':
        with np.errstate(divide='ignore'):
            values = np.maximum(np.log10(np.where(zeros, 1.0, values)), LOG10_FLOOR)
        values[zeros] = LOG10_FLOOR
    else:
        zeros = np.zeros_like(zeros)

    index = pd.Index(_cluster_names(model.k), name='cluster')
    return ClusterReport(table=pd.DataFrame(values, index=index, columns=feature_names),
                         scale=scale,
                         sentinel=pd.DataFrame(zeros, index=index, columns=feature_names))


def membership_distribution(model: FactorModel) -> MembershipDistribution:
    """Histogram the row-normalized memberships of each cluster into 10 bins over [0, 1]

    Rows of U that are all zero are skipped and counted.
    """
    sums = model.U.sum(axis=1)
    used = sums > 0
    n_skipped = int((~used).sum())
    if n_skipped:
        _logger.warning("Skipped %d all-zero membership rows.", n_skipped)

    normalized = model.U[used] / sums[used, np.newaxis]
    bin_index = np.minimum(np.floor(normalized * HISTOGRAM_BINS).astype(int), HISTOGRAM_BINS - 1)
    counts = np.zeros((model.k, HISTOGRAM_BINS))
    for cluster in range(model.k):
        counts[cluster] = np.bincount(bin_index[:, cluster], minlength=HISTOGRAM_BINS)
    n_used = int(used.sum())
    bins = counts / n_used if n_used else counts
    return MembershipDistribution(bins=bins, n_rows_used=n_used, n_rows_skipped=n_skipped)


def membership_timeseries(model: FactorModel,
                          row_labels: Optional[Sequence[Tuple[str, int]]] = None,
                          period_count: Optional[int] = None) -> MembershipSeries:
    """Mean un-normalized membership of the rows of each period

    Parameters
    ----------
    model : FactorModel
    row_labels : sequence of (student_id, period_index), optional
        defaults to the model's labels
    period_count : int, optional
        periods 0..period_count-1 are reported; defaults to one past the last labelled period

    Raises
    ------
    ValueError
        if the labels don't match the rows of U
    """
    memberships = membership_array(model, row_labels)
    means = memberships.groupby('period').mean('row')
    if period_count is None:
        period_count = int(means['period'].max()) + 1
    all_periods = np.arange(period_count)
    empty = ~np.isin(all_periods, means['period'].values)
    values = means.reindex(period=all_periods, fill_value=0.0).transpose('period', 'cluster')
    return MembershipSeries(values=values, empty=empty)


def activity_from_labels(row_labels: Sequence[Tuple[str, int]],
                         period_count: Optional[int] = None) -> pd.DataFrame:
    """Number of distinct active students per period, from the row labels of a matrix or model"""
    pairs = {(str(s), int(p)) for s, p in row_labels}
    counts = Counter(p for _, p in pairs)
    if period_count is None:
        period_count = max(counts, default=-1) + 1
    return pd.DataFrame({'period': np.arange(period_count),
                         'students': [counts.get(p, 0) for p in range(period_count)]})


def feature_overview(matrix: FeatureMatrix) -> pd.DataFrame:
    """Max, mean and variance of each feature over its observed cells

    Returns
    -------
    pandas.DataFrame
        columns 'feature', 'observed', 'max', 'mean', 'variance'
    """
    records = []
    for j, name in enumerate(matrix.feature_names):
        observed = matrix.X[matrix.W[:, j] != 0, j]
        record = {'feature': name, 'observed': observed.size, 'max': np.nan, 'mean': np.nan, 'variance': np.nan}
        if observed.size:
            summary = stats.describe(observed)
            record.update({'max': summary.minmax[1], 'mean': summary.mean,
                           'variance': summary.variance if observed.size > 1 else 0.0})
        records.append(record)
    return pd.DataFrame.from_records(records, columns=['feature', 'observed', 'max', 'mean', 'variance'])


def student_trajectory(model: FactorModel,
                       student_id: str,
                       row_labels: Optional[Sequence[Tuple[str, int]]] = None) -> pd.DataFrame:
    """Membership rows of one student, ordered by period; inactive periods are absent

    Raises
    ------
    ValueError
        if the student has no rows
    """
    memberships = membership_array(model, row_labels)
    selected = np.flatnonzero(memberships['student_id'].values == str(student_id))
    if selected.size == 0:
        raise ValueError("Student <%s> has no rows in the model." % student_id)
    rows = memberships.isel(row=selected).sortby('period')
    dataf = pd.DataFrame(rows.values, columns=[str(c) for c in rows['cluster'].values])
    dataf.insert(0, 'period', rows['period'].values.astype(int))
    return dataf


def write_table(dataf: pd.DataFrame,
                prefix: Union[str, os.PathLike],
                name: str,
                metadata: Optional[dict] = None,
                index: bool = False) -> Tuple[str, str]:
    """Write '<prefix>_<name>.csv' and its sidecar '<prefix>_<name>.json'

    Returns
    -------
    tuple
        the CSV and JSON paths
    """
    csv_path, json_path = with_suffix(prefix, f"{name}.csv"), with_suffix(prefix, f"{name}.json")
    dataf.to_csv(csv_path, index=index, float_format=format_fixed)
    sidecar = {'report': name, 'version': ebtrack.__version__, 'rows': int(len(dataf))}
    sidecar.update(metadata or {})
    with open(json_path, 'w') as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)
    _logger.info("Wrote the %s report to <%s>", name, csv_path)
    return csv_path, json_path


def read_cluster_table(path: Union[str, os.PathLike]) -> pd.DataFrame:
    """Load a cluster table written by `write_table`, indexed by cluster"""
    return pd.read_csv(path, index_col='cluster', float_precision='round_trip')
