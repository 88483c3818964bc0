"""Weighted non-negative matrix factorization with a masked Frobenius objective.

The factorization X ~ UV minimizes ||W * (X - UV)||, where the binary mask W zeroes missing cells.
U (n x k) holds soft cluster memberships of each row and V (k x m) holds the clusters.
Updates are the weighted multiplicative rules with guarded denominators; entries stuck at zero are
lifted to a small epsilon when the objective decreases in their direction, which keeps the iteration
from stalling away from a stationary point.

Missing values of a bounded column (e.g. a quiz score, which cannot exceed 1) are not completely free:
whenever the reconstruction of such a cell exceeds the bound c, the cell is temporarily observed with
value c, and it becomes free again once the reconstruction drops below c.
"""
import os
import json
import logging
import contextlib
from dataclasses import dataclass, field, replace, asdict
from typing import Dict, Mapping, Optional, Sequence, Tuple, List, Union

import dask
import numpy as np
import pandas as pd
from dask.diagnostics import ProgressBar
from tqdm import tqdm

import ebtrack
from ebtrack.formatters import format_fixed, with_suffix
from ebtrack.operations.features import FEATURE_NAMES, MISSABLE_FEATURES
from ebtrack.operations.utils import assert_expected_shape

_logger = logging.getLogger(__name__)

DEFAULT_FEATURE_BOUNDS = {10: 1.0}
EXACT_FIT_TOL = 1e-6


@dataclass(frozen=True)
class FitOptions:
    """Iteration controls of `fit`

    Attributes
    ----------
    max_iters : int
    rel_tol : float
        convergence is declared when the objective decreases by at most this fraction of its previous value
    denom_guard : float
        added to each update denominator
    lin_epsilon : float
        value given to zero entries that the objective pulls upward
    restarts : int
        number of seeded random initializations; the best final objective wins
    bounds : dict
        column index -> upper bound c of the missing values in that column
    """
    max_iters: int = 500
    rel_tol: float = 1e-6
    denom_guard: float = 1e-12
    lin_epsilon: float = 1e-9
    restarts: int = 5
    bounds: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ('rel_tol', 'denom_guard', 'lin_epsilon'):
            if not getattr(self, name) > 0:
                raise ValueError("<%s> must be positive, got %s." % (name, getattr(self, name)))
        if self.max_iters < 1:
            raise ValueError("<max_iters> must be at least 1, got %s." % self.max_iters)
        if self.restarts < 1:
            raise ValueError("<restarts> must be at least 1, got %s." % self.restarts)
        bounds = {int(j): float(c) for j, c in self.bounds.items()}
        if any(j < 0 for j in bounds) or any(not c > 0 for c in bounds.values()):
            raise ValueError("Bounds need non-negative column indices and positive values, got %s." % self.bounds)
        object.__setattr__(self, 'bounds', bounds)

    def to_dict(self) -> dict:
        options = asdict(self)
        options['bounds'] = {str(j): c for j, c in sorted(self.bounds.items())}
        return options

    @classmethod
    def from_dict(cls, options: Mapping) -> 'FitOptions':
        options = dict(options)
        options['bounds'] = {int(j): float(c) for j, c in options.get('bounds', {}).items()}
        return cls(**options)


@dataclass(frozen=True)
class DiagonalRescaling:
    """The diagonal of A in V' = AV, U' = UA^-1; degenerate rows keep a scale of 1"""
    scale: Tuple[float, ...]
    degenerate: Tuple[bool, ...]


@dataclass(frozen=True)
class FactorModel:
    """A fitted factorization

    Attributes
    ----------
    U : numpy.ndarray
        n x k memberships
    V : numpy.ndarray
        k x m clusters
    k : int
    objective_trace : tuple of float
        objective at initialization and after each iteration of the chosen restart
    seed : int
        master seed of the fit
    converged : bool
    iterations : int
    options : FitOptions
    row_labels : tuple of (student_id, period_index), optional
    col_labels : tuple of int, optional
        feature ids
    restart : int
        index of the chosen restart
    normalized : bool
        True after `normalize_clusters`
    degenerate : tuple of bool
        clusters with an all-zero row of V
    """
    U: np.ndarray
    V: np.ndarray
    k: int
    objective_trace: Tuple[float, ...]
    seed: int
    converged: bool
    iterations: int
    options: FitOptions = field(default_factory=FitOptions)
    row_labels: Optional[Tuple[Tuple[str, int], ...]] = None
    col_labels: Optional[Tuple[int, ...]] = None
    restart: int = 0
    normalized: bool = False
    degenerate: Tuple[bool, ...] = ()

    def __post_init__(self):
        for name in ('U', 'V'):
            factor = np.array(getattr(self, name), dtype=float)
            factor.flags.writeable = False
            object.__setattr__(self, name, factor)
        assert_expected_shape('U', self.U, (None, self.k))
        assert_expected_shape('V', self.V, (self.k, None))
        if np.any(self.U < 0) or np.any(self.V < 0):
            raise ValueError("Factors must be non-negative.")
        object.__setattr__(self, 'objective_trace', tuple(float(t) for t in self.objective_trace))
        if not self.degenerate:
            object.__setattr__(self, 'degenerate', (False,) * self.k)
        if self.row_labels is not None:
            object.__setattr__(self, 'row_labels', tuple((str(s), int(p)) for s, p in self.row_labels))
            if len(self.row_labels) != self.n:
                raise ValueError("Got %d row labels for %d rows." % (len(self.row_labels), self.n))
        if self.col_labels is not None:
            object.__setattr__(self, 'col_labels', tuple(int(c) for c in self.col_labels))
            if len(self.col_labels) != self.m:
                raise ValueError("Got %d column labels for %d columns." % (len(self.col_labels), self.m))

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.V.shape[1]

    @property
    def objective(self) -> float:
        """Final objective value"""
        return self.objective_trace[-1]

    @property
    def feature_names(self) -> List[str]:
        if self.col_labels is None:
            return [f"col{j}" for j in range(self.m)]
        return [FEATURE_NAMES.get(f, f"f{f}") for f in self.col_labels]

    def reconstruction(self) -> np.ndarray:
        return self.U @ self.V

    def relative_error(self, X: np.ndarray, W: Optional[np.ndarray] = None) -> float:
        """||W * (X - UV)|| / ||W * X||"""
        W = np.ones_like(X, dtype=float) if W is None else W
        return masked_objective(X, W, self.U, self.V) / np.linalg.norm(W * X)

    def to_json(self, path: Union[str, os.PathLike]) -> None:
        """Write the model as JSON (factors row-major)"""
        content = {
            'version': ebtrack.__version__,
            'k': self.k,
            'seed': self.seed,
            'options': self.options.to_dict(),
            'row_labels': None if self.row_labels is None else [list(r) for r in self.row_labels],
            'col_labels': None if self.col_labels is None else list(self.col_labels),
            'U': self.U.tolist(),
            'V': self.V.tolist(),
            'objective_trace': list(self.objective_trace),
            'converged': self.converged,
            'iterations': self.iterations,
            'restart': self.restart,
            'normalized': self.normalized,
            'degenerate': list(self.degenerate),
        }
        with open(path, 'w') as f:
            json.dump(content, f, indent=1)
        _logger.info("Wrote a k=%d model to <%s>", self.k, path)

    @classmethod
    def from_json(cls, path: Union[str, os.PathLike]) -> 'FactorModel':
        """Load a model written by `to_json`

        Raises
        ------
        ValueError
            if fields are missing or invalid
        """
        with open(path, 'r') as f:
            try:
                content = json.load(f)
            except json.JSONDecodeError as err:
                raise ValueError("Model file <%s> is not valid JSON: %s" % (path, err))
        try:
            k = int(content['k'])
            return cls(U=np.array(content['U'], dtype=float).reshape(-1, k),
                       V=np.array(content['V'], dtype=float).reshape(k, -1),
                       k=k,
                       objective_trace=content['objective_trace'],
                       seed=int(content['seed']),
                       converged=bool(content['converged']),
                       iterations=int(content.get('iterations', len(content['objective_trace']) - 1)),
                       options=FitOptions.from_dict(content.get('options', {})),
                       row_labels=content.get('row_labels'),
                       col_labels=content.get('col_labels'),
                       restart=int(content.get('restart', 0)),
                       normalized=bool(content.get('normalized', False)),
                       degenerate=tuple(content.get('degenerate', ())))
        except (KeyError, TypeError) as err:
            raise ValueError("Model file <%s> lacks a valid field: %s" % (path, err))

    def write_factor_csvs(self, prefix: Union[str, os.PathLike]) -> Tuple[str, str]:
        """Export U (with row labels) and V (with feature names) as '<prefix>_U.csv' and '<prefix>_V.csv'"""
        clusters = [f"cluster{i + 1}" for i in range(self.k)]
        u_frame = pd.DataFrame(self.U, columns=clusters)
        if self.row_labels is not None:
            u_frame.insert(0, 'student_id', [s for s, _ in self.row_labels])
            u_frame.insert(1, 'period', [p for _, p in self.row_labels])
        v_frame = pd.DataFrame(self.V, columns=self.feature_names)
        v_frame.insert(0, 'cluster', clusters)

        u_path, v_path = with_suffix(prefix, 'U.csv'), with_suffix(prefix, 'V.csv')
        u_frame.to_csv(u_path, index=False, float_format=format_fixed)
        v_frame.to_csv(v_path, index=False, float_format=format_fixed)
        return u_path, v_path


def resolve_bounds(feature_bounds: Mapping[int, float],
                   col_labels: Sequence[int]) -> Dict[int, float]:
    """Translate bounds keyed by feature id into bounds keyed by column index

    Features absent from the matrix are skipped.

    Raises
    ------
    ValueError
        for a bound on a feature that cannot hold missing values
    """
    not_missable = sorted(set(feature_bounds) - MISSABLE_FEATURES)
    if not_missable:
        raise ValueError("Bounds apply only to features that may be missing (%s), not %s."
                         % (sorted(MISSABLE_FEATURES), not_missable))
    col_labels = list(col_labels)
    return {col_labels.index(f): float(c) for f, c in sorted(feature_bounds.items()) if f in col_labels}


def _validated(X: np.ndarray, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    assert_expected_shape('X', X, (None, None))
    assert_expected_shape('W', W, X.shape)
    if not np.all(np.isfinite(X)) or np.any(X < 0):
        raise ValueError("X must be finite and non-negative.")
    if not np.all((W == 0) | (W == 1)):
        raise ValueError("W must be binary.")
    if not np.any(W):
        raise ValueError("W must hold at least one observed cell; all cells are masked.")
    return X, W


def _draw_factors(n: int, m: int, k: int,
                  seed: Union[int, np.random.SeedSequence]) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    # 1 - [0, 1) is (0, 1], so no entry starts locked at zero.
    U = 1.0 - rng.random((n, k))
    V = 1.0 - rng.random((k, m))
    return U, V


def init_factors(n: int, m: int, k: int,
                 seed: Union[int, np.random.SeedSequence]) -> Tuple[np.ndarray, np.ndarray]:
    """Random initial factors, uniform on (0, 1]

    Parameters
    ----------
    n, m, k : int
        at least 1 each
    seed : int or numpy.random.SeedSequence

    Returns
    -------
    tuple
        U (n x k) and V (k x m)
    """
    if min(n, m, k) < 1:
        raise ValueError("n, m and k must be at least 1, got (%s, %s, %s)." % (n, m, k))
    if k > min(n, m):
        _logger.warning("k=%d exceeds min(n, m)=%d; the factorization is over-parameterized.", k, min(n, m))
    return _draw_factors(n, m, k, seed)


def masked_objective(X: np.ndarray, W: np.ndarray, U: np.ndarray, V: np.ndarray) -> float:
    """Frobenius norm (not squared) of W * (X - UV)"""
    assert_expected_shape('W', W, np.shape(X))
    assert_expected_shape('U', U, (np.shape(X)[0], None))
    assert_expected_shape('V', V, (np.shape(U)[1], np.shape(X)[1]))
    return float(np.linalg.norm(W * (X - U @ V)))


def _lin_lift(factor: np.ndarray, numer: np.ndarray, denom: np.ndarray, epsilon: float) -> Tuple[np.ndarray, bool]:
    # The partial derivative is denom - numer; zeros with a negative derivative are stuck.
    stuck = (factor == 0) & (numer > denom)
    if not stuck.any():
        return factor, False
    return np.where(stuck, epsilon, factor), True


def update_step(X: np.ndarray, W: np.ndarray, U: np.ndarray, V: np.ndarray,
                opts: Optional[FitOptions] = None) -> Tuple[np.ndarray, np.ndarray]:
    """One multiplicative update of U, then of V

    U <- U * [(W*X) V^T] / [(W*(UV)) V^T + delta], then V <- V * [U^T (W*X)] / [U^T (W*(UV)) + delta],
    with zero entries lifted to epsilon beforehand where the objective's partial derivative is negative.

    Raises
    ------
    ValueError
        if the shapes don't conform, or W is all zero

    Returns
    -------
    tuple
        U' and V', non-negative
    """
    opts = FitOptions() if opts is None else opts
    if not np.any(W):
        raise ValueError("W must hold at least one observed cell; all cells are masked.")
    assert_expected_shape('W', W, np.shape(X))
    assert_expected_shape('U', U, (np.shape(X)[0], None))
    assert_expected_shape('V', V, (np.shape(U)[1], np.shape(X)[1]))
    WX = W * X

    numer = WX @ V.T
    denom = (W * (U @ V)) @ V.T
    U, lifted = _lin_lift(U, numer, denom, opts.lin_epsilon)
    if lifted:
        denom = (W * (U @ V)) @ V.T
    U = U * numer / (denom + opts.denom_guard)

    numer = U.T @ WX
    denom = U.T @ (W * (U @ V))
    V, lifted = _lin_lift(V, numer, denom, opts.lin_epsilon)
    if lifted:
        denom = U.T @ (W * (U @ V))
    V = V * numer / (denom + opts.denom_guard)
    return U, V


def apply_bound_rule(X: np.ndarray, W: np.ndarray, UV: np.ndarray,
                     bounds: Mapping[int, float], missing: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Observe originally-missing cells of bounded columns at their bound while the reconstruction exceeds it

    Parameters
    ----------
    X, W : numpy.ndarray
        data and current mask
    UV : numpy.ndarray
        current reconstruction
    bounds : dict
        column index -> c
    missing : numpy.ndarray
        boolean, True where the original mask is 0

    Returns
    -------
    tuple
        X' and W' (copies). A missing cell of a bounded column gets X' = c and W' = 1 if (UV) > c, else W' = 0.
    """
    X_out = np.array(X, dtype=float)
    W_out = np.array(W, dtype=float)
    for j, c in bounds.items():
        cells = missing[:, j]
        X_out[cells, j] = c
        W_out[cells, j] = (UV[cells, j] > c).astype(float)
    return X_out, W_out


def _single_restart(X: np.ndarray, W: np.ndarray, k: int, opts: FitOptions,
                    seed: np.random.SeedSequence) -> Tuple[np.ndarray, np.ndarray, List[float], bool]:
    U, V = _draw_factors(X.shape[0], X.shape[1], k, seed)
    missing = W == 0

    Xb, Wb = apply_bound_rule(X, W, U @ V, opts.bounds, missing)
    trace = [masked_objective(Xb, Wb, U, V)]
    converged = trace[0] == 0
    while not converged and len(trace) <= opts.max_iters:
        U, V = update_step(Xb, Wb, U, V, opts)
        Xb, Wb = apply_bound_rule(X, W, U @ V, opts.bounds, missing)
        previous, current = trace[-1], masked_objective(Xb, Wb, U, V)
        trace.append(current)
        converged = (current == 0) or (abs(previous - current) <= opts.rel_tol * previous)
    return U, V, trace, converged


def _scheduler_options(threads: Optional[int]) -> dict:
    if threads == 1:
        return {'scheduler': 'synchronous'}
    return {'scheduler': 'threads', 'num_workers': threads or os.cpu_count()}


def fit(X: np.ndarray, W: np.ndarray, k: int,
        opts: Optional[FitOptions] = None,
        seed: int = 42,
        threads: Optional[int] = 1,
        row_labels: Optional[Sequence[Tuple[str, int]]] = None,
        col_labels: Optional[Sequence[int]] = None,
        progress: bool = False) -> FactorModel:
    """Factorize X under mask W, keeping the best of several seeded restarts

    Each restart applies the bound rule, then an update step, until the relative objective decrease
    drops to `rel_tol` or `max_iters` is reached.

    Parameters
    ----------
    X : numpy.ndarray
        n x m, non-negative
    W : numpy.ndarray
        n x m, binary
    k : int
    opts : FitOptions, optional
    seed : int
        restarts use sub-seeds spawned from this seed
    threads : int, optional
        1 runs the restarts sequentially; None uses all cores
    row_labels, col_labels : optional
        carried into the model
    progress : bool, default False
        show a progress bar over the restarts

    Raises
    ------
    ValueError
        for invalid data, k < 1, or bounds on unknown columns

    Returns
    -------
    FactorModel
    """
    opts = FitOptions() if opts is None else opts
    X, W = _validated(X, W)
    n, m = X.shape
    if k < 1:
        raise ValueError("k must be at least 1, got %s." % k)
    if any(j >= m for j in opts.bounds):
        raise ValueError("Bounds name columns %s, but the matrix has %d columns." % (sorted(opts.bounds), m))
    if col_labels is not None:
        unbounded = [col_labels[j] for j in opts.bounds if col_labels[j] not in MISSABLE_FEATURES]
        if unbounded:
            raise ValueError("Bounds apply only to features that may be missing, not %s." % unbounded)
    if k > min(n, m):
        _logger.warning("k=%d exceeds min(n, m)=%d; the factorization is over-parameterized.", k, min(n, m))

    sub_seeds = np.random.SeedSequence(seed).spawn(opts.restarts)
    tasks = [dask.delayed(_single_restart, pure=False)(X, W, k, opts, s) for s in sub_seeds]
    with ProgressBar() if progress else contextlib.nullcontext():
        results = dask.compute(*tasks, **_scheduler_options(threads))

    best = min(range(len(results)), key=lambda i: (results[i][2][-1], i))
    U, V, trace, converged = results[best]
    if not converged:
        _logger.warning("Fit with k=%d stopped at max_iters=%d before converging (objective %s).",
                        k, opts.max_iters, trace[-1])
    _logger.debug("k=%d: restart %d of %d chosen, objective %s after %d iterations.",
                  k, best, opts.restarts, trace[-1], len(trace) - 1)
    return FactorModel(U=U, V=V, k=k, objective_trace=trace, seed=seed, converged=converged,
                       iterations=len(trace) - 1, options=opts, row_labels=row_labels,
                       col_labels=col_labels, restart=best)


def normalize_clusters(model: FactorModel) -> Tuple[FactorModel, DiagonalRescaling]:
    """Rescale so that every cluster (row of V) sums to one, with U absorbing the inverse scaling

    Rows of V that sum to 0 are left unchanged and flagged degenerate.
    """
    sums = model.V.sum(axis=1)
    degenerate = sums <= 0
    divisor = np.where(degenerate, 1.0, sums)

    V = model.V / divisor[:, np.newaxis]
    U = model.U * divisor[np.newaxis, :]
    if degenerate.any():
        _logger.warning("Clusters %s are all zero and stay unnormalized.", list(np.flatnonzero(degenerate) + 1))

    rescaling = DiagonalRescaling(scale=tuple(float(s) for s in 1.0 / divisor),
                                  degenerate=tuple(bool(d) for d in degenerate))
    return replace(model, U=U, V=V, normalized=True, degenerate=rescaling.degenerate), rescaling


def select_k(X: np.ndarray, W: np.ndarray,
             k_max: int = 10,
             tau: float = 0.01,
             opts: Optional[FitOptions] = None,
             seed: int = 42,
             threads: Optional[int] = 1,
             row_labels: Optional[Sequence[Tuple[str, int]]] = None,
             col_labels: Optional[Sequence[int]] = None,
             progress: bool = False,
             exact_tol: float = EXACT_FIT_TOL) -> Tuple[int, List[FactorModel]]:
    """Fit k = 1..k_max and pick the smallest k after which an extra cluster barely lowers the error

    The chosen k is the smallest with (err(k) - err(k+1)) / err(1) < tau, where err is the final objective.
    When err(1) is at most exact_tol * ||W * X||, one cluster already fits the data and k* = 1.

    Returns
    -------
    tuple
        k* and the models for k = 1..k_max
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1, got %s." % k_max)
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1), got %s." % tau)

    models = [fit(X, W, k, opts=opts, seed=seed, threads=threads, row_labels=row_labels, col_labels=col_labels)
              for k in tqdm(range(1, k_max + 1), desc='k', disable=not progress)]
    errors = [model.objective for model in models]

    if errors[0] <= exact_tol * np.linalg.norm(np.asarray(W, dtype=float) * np.asarray(X, dtype=float)):
        _logger.info("One cluster fits the data (error %s); selected k=1.", format_fixed(errors[0]))
        return 1, models
    for k in range(1, k_max):
        if (errors[k - 1] - errors[k]) / errors[0] < tau:
            _logger.info("Selected k=%d (errors %s).", k, [format_fixed(e) for e in errors])
            return k, models
    _logger.warning("The error decrease never fell below tau=%s up to k_max=%d; using k=%d.", tau, k_max, k_max)
    return k_max, models


def error_curve(models: Sequence[FactorModel]) -> pd.DataFrame:
    """Final error per k, and the decrease from k to k+1 relative to err(1)

    Returns
    -------
    pandas.DataFrame
        columns 'k', 'error', 'relative_decrease' (NaN for the largest k, and when err(1) is 0)
    """
    errors = np.array([model.objective for model in models], dtype=float)
    decrease = np.full(len(errors), np.nan)
    if len(errors) and errors[0] > 0:
        decrease[:-1] = (errors[:-1] - errors[1:]) / errors[0]
    return pd.DataFrame({'k': [model.k for model in models], 'error': errors, 'relative_decrease': decrease})
