'''
Stratified rank-based ABC estimate of the Bayes factor.

The reference table of simulated datasets is processed one stratum at a
time. For every query, each stratum keeps its nearest survivors; the
survivors of all strata are merged and the global nearest ``final_keep``
datasets vote with their model labels.
'''

import numpy as np
from dataclasses import dataclass
from typing import Callable, List, Union
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist
from .env import num_threads
from .errors import InvalidParameterError, ShapeMismatchError
from .logger import logger
from .models import ModelPair, simulate_mixture
from .rngdist import RngStream
from .utility import fan_out, log_interval

DISTANCES = ('euclidean', 'euclidean_on_sorted')

@dataclass(frozen = True)
class AbcConfig(object):
    '''
    ``total_samples`` reference datasets split into ``strata`` equal strata.
    ``summary`` is ``'identity'`` or a function mapping a (rows, n) matrix
    of datasets to a (rows, d) matrix of summaries.
    '''

    total_samples : int = 100000
    strata : int = 100
    per_stratum_keep : int = 10
    final_keep : int = 100
    summary : Union[str, Callable[[NDArray[np.float64]], NDArray[np.float64]]] = 'identity'
    distance : str = 'euclidean'

    def __post_init__(self):
        if min(self.total_samples, self.strata, self.per_stratum_keep, self.final_keep) < 1:
            raise InvalidParameterError('ABC sizes must be positive')
        if self.total_samples % self.strata != 0:
            raise InvalidParameterError(f'strata ({self.strata}) must divide total_samples ({self.total_samples})')
        if self.final_keep < 2:
            raise InvalidParameterError(f'final_keep must be at least 2, got {self.final_keep}')
        if self.strata * self.per_stratum_keep < self.final_keep:
            raise InvalidParameterError('strata x per_stratum_keep must be at least final_keep')
        if self.per_stratum_keep > self.stratum_size:
            raise InvalidParameterError(f'per_stratum_keep ({self.per_stratum_keep}) exceeds the stratum size ({self.stratum_size})')
        if self.distance not in DISTANCES:
            raise InvalidParameterError(f'unknown distance {self.distance!r}, expected one of {DISTANCES}')
        if isinstance(self.summary, str) and self.summary != 'identity':
            raise InvalidParameterError(f'unknown summary {self.summary!r}; pass a function for a custom statistic')

    @property
    def stratum_size(self) -> int:
        return self.total_samples // self.strata

    @classmethod
    def full_scale(cls, **kwargs) -> 'AbcConfig':
        return cls(total_samples = 1200000, strata = 1200, per_stratum_keep = 5, final_keep = 120, **kwargs)

    @classmethod
    def grid_scale(cls, **kwargs) -> 'AbcConfig':
        return cls(total_samples = 1000000, strata = 1000, per_stratum_keep = 5, final_keep = 100, **kwargs)

@dataclass(frozen = True)
class AbcResult(object):
    estimate : float
    n1 : int
    n2 : int
    exact : bool

@dataclass(frozen = True)
class Survivors(object):
    distances : NDArray[np.float64]
    labels : NDArray[np.int64]
    indices : NDArray[np.int64]

def _topk_rows(distances : NDArray[np.float64], keep : int) -> NDArray[np.int64]:
    '''Column indices of the ``keep`` smallest entries per row, ordered by (distance, index).'''
    rows, size = distances.shape
    if keep >= size:
        candidates = np.broadcast_to(np.arange(size), (rows, size))
    else:
        candidates = np.sort(np.argpartition(distances, keep - 1, axis = 1)[:, :keep], axis = 1)
        threshold = np.take_along_axis(distances, candidates, axis = 1).max(axis = 1)
        # rows with ties at the threshold: argpartition may have picked the wrong tied indices
        tied = np.flatnonzero((distances <= threshold[:, None]).sum(axis = 1) > keep)
        if len(tied) > 0:
            candidates = candidates.copy()
            for i in tied:
                candidates[i] = np.sort(np.argsort(distances[i], kind = 'stable')[:keep])
    values = np.take_along_axis(distances, candidates, axis = 1)
    order = np.lexsort((candidates, values), axis = -1)
    return np.take_along_axis(candidates, order, axis = 1)[:, :keep]

def stratum_topk(distances : ArrayLike, labels : ArrayLike, keep : int) -> Survivors:
    '''The ``keep`` entries of smallest distance; ties go to the smaller index.'''
    distances = np.asarray(distances, dtype = np.float64)
    labels = np.asarray(labels, dtype = np.int64)
    if distances.shape != labels.shape or distances.ndim != 1:
        raise ShapeMismatchError(f'distances {distances.shape} and labels {labels.shape} must be equal-length vectors')
    if not 1 <= keep <= len(distances):
        raise InvalidParameterError(f'keep must lie in [1, {len(distances)}], got {keep}')
    index = _topk_rows(distances[None, :], keep)[0]
    return Survivors(distances[index], labels[index], index)

def _summarize(data : NDArray[np.float64], cfg : AbcConfig) -> NDArray[np.float64]:
    if cfg.distance == 'euclidean_on_sorted':
        data = np.sort(data, axis = 1)
    if callable(cfg.summary):
        data = np.asarray(cfg.summary(data), dtype = np.float64).reshape(len(data), -1)
    return data

def rate_ratio(pair : ModelPair, n1 : int, n2 : int) -> float:
    '''Acceptance-count Bayes factor BF_12, +1 smoothed and divided by the prior odds.'''
    return (pair.prior_m2 * (n1 + 1)) / (pair.prior_m1 * (n2 + 1))

def abc_estimate_batch(pair : ModelPair, queries : ArrayLike, cfg : AbcConfig, rng : RngStream) -> List[AbcResult]:
    '''
    Rank-based ABC Bayes factors BF_12 for every row of ``queries``.

    Stratum j simulates its datasets from ``rng.substream(j)``, so results do
    not depend on the number of worker threads. The estimate is
    ``prior_m2 (n1 + 1) / (prior_m1 (n2 + 1))`` for n1 (n2) accepted M1 (M2) datasets.
    '''
    queries = np.asarray(queries, dtype = np.float64)
    if queries.ndim == 1:
        queries = queries[None, :]
    if queries.ndim != 2 or queries.size == 0:
        raise InvalidParameterError('ABC needs at least one query dataset')
    num_queries, n = queries.shape
    summaries = _summarize(queries, cfg)
    size, keep = cfg.stratum_size, cfg.per_stratum_keep

    survivor_dist = np.empty((cfg.strata, num_queries, keep))
    survivor_label = np.empty((cfg.strata, num_queries, keep), dtype = np.int64)
    survivor_index = np.empty((cfg.strata, num_queries, keep), dtype = np.int64)
    interval = log_interval(cfg.strata)

    def worker(j):
        data, labels = simulate_mixture(pair, size, n, rng.substream(j))
        distances = cdist(summaries, _summarize(data, cfg), 'euclidean')
        index = _topk_rows(distances, keep)
        survivor_dist[j] = np.take_along_axis(distances, index, axis = 1)
        survivor_label[j] = labels[index]
        survivor_index[j] = index
        if (j + 1) % interval == 0:
            logger.info(f'ABC stratum {j + 1}/{cfg.strata} done.')

    logger.info(f'ABC with {cfg.total_samples} reference datasets in {cfg.strata} strata for {num_queries} queries.')
    fan_out(worker, cfg.strata, num_threads())

    stratum = np.broadcast_to(np.arange(cfg.strata)[:, None, None], survivor_dist.shape)

    def flat(a):
        return np.moveaxis(a, 0, 1).reshape(num_queries, cfg.strata * keep)

    dist, label, within, strat = flat(survivor_dist), flat(survivor_label), flat(survivor_index), flat(stratum)
    order = np.lexsort((within, strat, dist), axis = -1)[:, :cfg.final_keep]
    accepted = np.take_along_axis(label, order, axis = 1)
    accepted_strata = np.take_along_axis(strat, order, axis = 1)

    results = []
    for q in range(num_queries):
        n1 = int(accepted[q].sum())
        n2 = cfg.final_keep - n1
        contributions = np.bincount(accepted_strata[q], minlength = cfg.strata)
        exact = keep == size or not bool(np.any(contributions >= keep))
        results.append(AbcResult(rate_ratio(pair, n1, n2), n1, n2, exact))
    return results
