"""Score how well a fitted model recovers planted clusters."""
import logging
import itertools
from typing import Tuple

import numpy as np
from sklearn.metrics.pairwise import cosine_distances

from ebtrack.operations.wnmf import FactorModel

_logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_K = 8
MATCHINGS = ('exhaustive', 'greedy')


def _exhaustive_matching(distances: np.ndarray) -> Tuple[int, ...]:
    k = distances.shape[0]
    rows = np.arange(k)
    return min(itertools.permutations(range(k)), key=lambda perm: distances[rows, list(perm)].sum())


def _greedy_matching(distances: np.ndarray) -> Tuple[int, ...]:
    k = distances.shape[0]
    matching = [-1] * k
    remaining = np.array(distances, dtype=float)
    for _ in range(k):
        fitted, planted = np.unravel_index(np.argmin(remaining), remaining.shape)
        matching[fitted] = int(planted)
        remaining[fitted, :] = np.inf
        remaining[:, planted] = np.inf
    return tuple(matching)


def aligned_recovery_error(model: FactorModel,
                           U_true: np.ndarray,
                           V_true: np.ndarray,
                           matching: str = 'exhaustive') -> float:
    """Mean cosine distance between fitted and planted clusters under the best cluster matching

    The score compares cluster rows only. It depends on V and V_true and ignores the scale of each row,
    so the model need not be normalized; U_true is only checked for its number of clusters.

    Parameters
    ----------
    model : FactorModel
    U_true : numpy.ndarray
        planted memberships, n x k
    V_true : numpy.ndarray
        planted clusters, k x m
    matching : str, default 'exhaustive'
        'exhaustive' tries all k! permutations (k <= 8); 'greedy' repeatedly pairs the closest remaining clusters

    Raises
    ------
    ValueError
        for shape mismatches, an unknown matching, or exhaustive matching with k > 8

    Returns
    -------
    float
        0 for a perfect recovery up to permutation and scaling, at most 1 for non-negative clusters
    """
    if matching not in MATCHINGS:
        raise ValueError("Matching must be one of %s, got <%s>." % (MATCHINGS, matching))
    V_true = np.asarray(V_true, dtype=float)
    U_true = np.asarray(U_true, dtype=float)
    if V_true.shape != model.V.shape:
        raise ValueError("Planted clusters have shape %s, the model's %s." % (V_true.shape, model.V.shape))
    if U_true.shape[1] != model.k:
        raise ValueError("Planted memberships have %d clusters, the model %d." % (U_true.shape[1], model.k))
    if matching == 'exhaustive' and model.k > EXHAUSTIVE_MAX_K:
        raise ValueError("Exhaustive matching is limited to k <= %d; use matching='greedy' for k=%d."
                         % (EXHAUSTIVE_MAX_K, model.k))

    distances = cosine_distances(model.V, V_true)
    permutation = _exhaustive_matching(distances) if matching == 'exhaustive' else _greedy_matching(distances)
    error = float(distances[np.arange(model.k), list(permutation)].mean())
    _logger.debug("Cluster matching %s gives a recovery error of %s.", permutation, error)
    return error
