'''
Seeded random streams and the distributions the simulators draw from.

A stream is a numpy ``Generator`` over the counter-based Philox bit generator,
keyed by ``SeedSequence(seed, spawn_key = (stream_id, ...))``. Child streams
extend the spawn key, so workers can each own a reproducible substream.
'''

import numpy as np
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union
from numpy.typing import ArrayLike
from .errors import InvalidParameterError

UINT64_MAX = (1 << 64) - 1

class RngStream(object):
    '''
    Single-owner random stream.

    Identical (seed, stream_id) reproduce identical draws. A stream must not
    be shared between threads; use ``substream`` to hand one to each worker.
    '''

    def __init__(self, seed : int, stream_id : int = 0, _key : Optional[Tuple[int, ...]] = None):
        for name, value in (('seed', seed), ('stream_id', stream_id)):
            if not 0 <= int(value) <= UINT64_MAX:
                raise InvalidParameterError(f'{name} must be a 64-bit unsigned integer, got {value}')
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.key = (self.stream_id, ) if _key is None else tuple(_key)
        sequence = np.random.SeedSequence(self.seed, spawn_key = self.key)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def substream(self, index : int) -> 'RngStream':
        '''Independent child stream; depends only on (seed, key, index), not on draws made so far.'''
        return RngStream(self.seed, self.stream_id, _key = self.key + (int(index), ))

    def uniform(self, size = None) -> Union[float, np.ndarray]:
        return self.generator.random(size)

    def __repr__(self) -> str:
        return f'RngStream(seed={self.seed}, key={self.key})'

def new_stream(seed : int, stream_id : int = 0) -> RngStream:
    return RngStream(seed, stream_id)

KINDS = ('uniform01', 'normal', 'gamma', 'beta', 'exponential', 'poisson', 'neg_binomial', 'binomial', 'categorical')

@dataclass(frozen = True)
class DistSpec(object):
    '''
    A distribution family with its parameters.

    Parameters may be arrays; they then broadcast against the requested
    sample size, which is how the simulators draw one observation vector per
    parameter row. Gamma and exponential are parametrized by rate.
    '''

    kind : str
    params : Tuple = field(default = ())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f'unknown distribution kind {self.kind!r}')
        self.validate()

    @classmethod
    def uniform01(cls):
        return cls('uniform01')

    @classmethod
    def normal(cls, mean : ArrayLike, sd : ArrayLike):
        return cls('normal', (mean, sd))

    @classmethod
    def gamma(cls, shape : ArrayLike, rate : ArrayLike):
        return cls('gamma', (shape, rate))

    @classmethod
    def beta(cls, a : ArrayLike, b : ArrayLike):
        return cls('beta', (a, b))

    @classmethod
    def exponential(cls, rate : ArrayLike):
        return cls('exponential', (rate, ))

    @classmethod
    def poisson(cls, mean : ArrayLike):
        return cls('poisson', (mean, ))

    @classmethod
    def neg_binomial(cls, r : ArrayLike, p : ArrayLike):
        return cls('neg_binomial', (r, p))

    @classmethod
    def binomial(cls, trials : ArrayLike, p : ArrayLike):
        return cls('binomial', (trials, p))

    @classmethod
    def categorical(cls, weights : ArrayLike):
        return cls('categorical', (tuple(np.asarray(weights, dtype = np.float64).ravel()), ))

    def validate(self):
        values = [np.asarray(p, dtype = np.float64) for p in self.params]
        if any(not np.all(np.isfinite(v)) for v in values):
            raise InvalidParameterError(f'{self.kind} parameters must be finite', data = self.params)

        def positive(v, name):
            if not np.all(v > 0):
                raise InvalidParameterError(f'{self.kind}: {name} must be strictly positive', data = self.params)

        def probability(v, name):
            if not np.all((v >= 0) & (v <= 1)):
                raise InvalidParameterError(f'{self.kind}: {name} must lie in [0, 1]', data = self.params)

        if self.kind == 'normal':
            positive(values[1], 'sd')
        elif self.kind == 'gamma':
            positive(values[0], 'shape')
            positive(values[1], 'rate')
        elif self.kind == 'beta':
            positive(values[0], 'a')
            positive(values[1], 'b')
        elif self.kind == 'exponential':
            positive(values[0], 'rate')
        elif self.kind == 'poisson':
            if not np.all(values[0] >= 0):
                raise InvalidParameterError('poisson: mean must be nonnegative', data = self.params)
        elif self.kind == 'neg_binomial':
            positive(values[0], 'r')
            probability(values[1], 'p')
            if not np.all(values[1] > 0):
                raise InvalidParameterError('neg_binomial: p must be positive', data = self.params)
        elif self.kind == 'binomial':
            if not np.all((values[0] >= 0) & (values[0] == np.floor(values[0]))):
                raise InvalidParameterError('binomial: trials must be a nonnegative integer', data = self.params)
            probability(values[1], 'p')
        elif self.kind == 'categorical':
            weights = values[0]
            if weights.size == 0 or np.any(weights < 0) or weights.sum() <= 0:
                raise InvalidParameterError('categorical: weights must be nonnegative with positive sum', data = self.params)

def sample(spec : DistSpec, rng : RngStream, size = None):
    '''Draw from ``spec``; ``size = None`` returns a scalar when all parameters are scalar.

    Count distributions are returned as float64 so that every data vector
    travels through one numeric path.
    '''
    g = rng.generator
    p = spec.params
    if spec.kind == 'uniform01':
        out = g.random(size)
    elif spec.kind == 'normal':
        out = g.normal(p[0], p[1], size)
    elif spec.kind == 'gamma':
        out = g.gamma(p[0], 1.0 / np.asarray(p[1], dtype = np.float64), size)
    elif spec.kind == 'beta':
        out = g.beta(p[0], p[1], size)
    elif spec.kind == 'exponential':
        out = g.exponential(1.0 / np.asarray(p[0], dtype = np.float64), size)
    elif spec.kind == 'poisson':
        out = g.poisson(p[0], size)
    elif spec.kind == 'neg_binomial':
        # failures before the r-th success: P(Y=y) = p(1-p)^y for r = 1
        out = g.negative_binomial(p[0], p[1], size)
    elif spec.kind == 'binomial':
        out = g.binomial(np.asarray(p[0], dtype = np.int64), p[1], size)
    else:
        weights = np.asarray(p[0], dtype = np.float64)
        index = g.choice(len(weights), size = size, p = weights / weights.sum())
        return int(index) if size is None else index

    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype = np.float64)
