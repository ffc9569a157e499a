'''
Simulator-defined Bayesian models and the built-in model pairs.

Samplers are vectorized: ``prior_sampler(rng, size)`` returns a (size, d)
parameter matrix and ``conditional_sampler(theta, n, rng)`` one length-n
data vector per parameter row. Marginal likelihood oracles accept a data
vector or a (rows, n) matrix and reduce over the last axis.
'''

import numpy as np
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple
from numpy.typing import ArrayLike, NDArray
from scipy.special import betaln, gammaln, logsumexp
from .errors import InvalidParameterError, NoOracleError, UnsupportedModelError
from .mpt import MptSpec
from .rngdist import DistSpec, RngStream, sample

SUPPORTS = ('nonneg_integers', 'reals', 'nonneg_reals', 'counts_bounded')

@dataclass(frozen = True)
class Support(object):
    kind : str
    trials : Optional[int] = None

    def __post_init__(self):
        if self.kind not in SUPPORTS:
            raise InvalidParameterError(f'unknown support {self.kind!r}')
        if self.kind == 'counts_bounded' and (self.trials is None or self.trials < 0):
            raise InvalidParameterError('counts_bounded support needs a nonnegative number of trials')

    def contains(self, y : ArrayLike) -> bool:
        y = np.asarray(y, dtype = np.float64)
        if not np.all(np.isfinite(y)):
            return False
        if self.kind == 'reals':
            return True
        if self.kind == 'nonneg_reals':
            return bool(np.all(y >= 0))
        integral = bool(np.all((y >= 0) & (y == np.floor(y))))
        if self.kind == 'nonneg_integers':
            return integral
        return integral and bool(np.all(y <= self.trials))

@dataclass(frozen = True)
class ModelSpec(object):
    id : str
    param_dim : int
    prior_sampler : Callable[[RngStream, int], NDArray[np.float64]]
    conditional_sampler : Callable[[NDArray[np.float64], int, RngStream], NDArray[np.float64]]
    support : Support
    exact_log_marginal : Optional[Callable[[NDArray[np.float64]], Any]] = None
    posterior_predictive : Optional[Callable[[NDArray[np.float64], int, RngStream], NDArray[np.float64]]] = None
    data_length : Optional[int] = None

@dataclass(frozen = True)
class ModelPair(object):
    '''
    Two competing models with prior model probabilities.

    ``name`` and ``hyperparams`` record how a built-in pair was made, so that
    checkpoints can rebuild it.
    '''

    m1 : ModelSpec
    m2 : ModelSpec
    prior_m1 : float = 0.5
    prior_m2 : float = 0.5
    name : str = 'custom'
    hyperparams : Mapping[str, Any] = field(default_factory = dict)

    def __post_init__(self):
        if not (0 < self.prior_m1 < 1 and 0 < self.prior_m2 < 1):
            raise InvalidParameterError('prior model probabilities must lie in (0, 1)')
        if abs(self.prior_m1 + self.prior_m2 - 1) > 1e-12:
            raise InvalidParameterError(f'prior model probabilities must sum to 1, got {self.prior_m1} + {self.prior_m2}')
        if self.m1.support != self.m2.support:
            raise InvalidParameterError(f'models declare different supports: {self.m1.support} vs {self.m2.support}')

    @property
    def priors(self) -> Tuple[float, float]:
        return self.prior_m1, self.prior_m2

    def swapped(self) -> 'ModelPair':
        return replace(self, m1 = self.m2, m2 = self.m1, prior_m1 = self.prior_m2, prior_m2 = self.prior_m1)

    def describe(self) -> Dict[str, Any]:
        return {'name' : self.name, 'hyperparams' : dict(self.hyperparams), 'priors' : [self.prior_m1, self.prior_m2]}

# Simulation.

def simulate_batch(model : ModelSpec, size : int, n : int, rng : RngStream, return_params : bool = False):
    '''``size`` datasets of length ``n``, each from its own prior draw.'''
    if n < 1:
        raise InvalidParameterError(f'dataset length must be positive, got {n}')
    if model.data_length is not None and n != model.data_length:
        raise InvalidParameterError(f'model {model.id} produces data vectors of length {model.data_length}, got n = {n}')
    theta = np.asarray(model.prior_sampler(rng, size), dtype = np.float64).reshape(size, model.param_dim)
    data = np.asarray(model.conditional_sampler(theta, n, rng), dtype = np.float64).reshape(size, n)
    return (data, theta) if return_params else data

def simulate_dataset(model : ModelSpec, n : int, rng : RngStream) -> NDArray[np.float64]:
    return simulate_batch(model, 1, n, rng)[0]

def simulate_mixture(pair : ModelPair, size : int, n : int, rng : RngStream):
    '''Datasets from the prior-weighted mixture; labels are 1 for M1 and 0 for M2.'''
    labels = (rng.uniform(size) < pair.prior_m1).astype(np.int64)
    data = np.empty((size, n), dtype = np.float64)
    n1 = int(labels.sum())
    if n1 > 0:
        data[labels == 1] = simulate_batch(pair.m1, n1, n, rng)
    if n1 < size:
        data[labels == 0] = simulate_batch(pair.m2, size - n1, n, rng)
    return data, labels

# Exact marginals and Bayes factors.

def exact_log_marginal(model : ModelSpec, y : ArrayLike):
    if model.exact_log_marginal is None:
        raise NoOracleError(f'model {model.id} has no exact marginal likelihood')
    return model.exact_log_marginal(np.asarray(y, dtype = np.float64))

def exact_log_bf(pair : ModelPair, y : ArrayLike):
    '''log BF_12(y); vectorized over the rows of a (rows, n) matrix.'''
    y = np.asarray(y, dtype = np.float64)
    return exact_log_marginal(pair.m1, y) - exact_log_marginal(pair.m2, y)

def has_exact_bf(pair : ModelPair, n : int) -> bool:
    '''Whether ``exact_log_bf`` works for datasets of length ``n``.'''
    if pair.m1.exact_log_marginal is None or pair.m2.exact_log_marginal is None:
        return False
    try:
        exact_log_bf(pair, np.zeros(n))
    except NoOracleError:
        return False
    return True

def exact_log_pbf(pair : ModelPair, y : ArrayLike, split : Sequence[int]):
    '''log PBF_12(Z|X) for X = y[split], via BF_12(Y) BF_21(X).'''
    y = np.asarray(y, dtype = np.float64)
    return exact_log_bf(pair, y) - exact_log_bf(pair, y[..., list(split)])

def exact_log_posterior_bf(pair : ModelPair, y : ArrayLike):
    y = np.asarray(y, dtype = np.float64)
    return exact_log_pbf(pair, np.concatenate([y, y], axis = -1), range(y.shape[-1]))

def posterior_predictive_sample(model : ModelSpec, y_obs : ArrayLike, m : int, rng : RngStream) -> NDArray[np.float64]:
    '''``m`` draws, each from its own conjugate-posterior parameter draw.'''
    if model.posterior_predictive is None:
        raise UnsupportedModelError(f'model {model.id} has no conjugate posterior predictive')
    if m < 1:
        raise InvalidParameterError(f'number of predictive draws must be positive, got {m}')
    return np.asarray(model.posterior_predictive(np.asarray(y_obs, dtype = np.float64), m, rng), dtype = np.float64)

def _stats(y):
    return y.shape[-1], y.sum(axis = -1)

# data1: NB(1, p) with p ~ Beta(a1, b1) against Poisson(lam) with lam ~ Gamma(a2, b2).

def _data1(alpha1, beta1, alpha2, beta2):
    def prior1(rng, size):
        return sample(DistSpec.beta(alpha1, beta1), rng, size)[:, None]

    def cond1(theta, n, rng):
        return sample(DistSpec.neg_binomial(1, theta), rng, (len(theta), n))

    def marginal1(y):
        n, s = _stats(y)
        return betaln(alpha1 + n, beta1 + s) - betaln(alpha1, beta1)

    def predictive1(y_obs, m, rng):
        n, s = _stats(y_obs)
        p = sample(DistSpec.beta(alpha1 + n, beta1 + s), rng, m)
        return sample(DistSpec.neg_binomial(1, p), rng, m)

    def prior2(rng, size):
        return sample(DistSpec.gamma(alpha2, beta2), rng, size)[:, None]

    def cond2(theta, n, rng):
        return sample(DistSpec.poisson(theta), rng, (len(theta), n))

    def marginal2(y):
        n, s = _stats(y)
        return (alpha2 * np.log(beta2) + gammaln(s + alpha2) - gammaln(alpha2)
                - (s + alpha2) * np.log(n + beta2) - gammaln(y + 1).sum(axis = -1))

    def predictive2(y_obs, m, rng):
        n, s = _stats(y_obs)
        lam = sample(DistSpec.gamma(alpha2 + s, beta2 + n), rng, m)
        return sample(DistSpec.poisson(lam), rng, m)

    support = Support('nonneg_integers')
    m1 = ModelSpec('data1.M1', 1, prior1, cond1, support, marginal1, predictive1)
    m2 = ModelSpec('data1.M2', 1, prior2, cond2, support, marginal2, predictive2)
    return m1, m2

# data2: two-component Gaussian mixture against a single Gaussian, Gaussian priors on the means.

def _group_log_density(k, sum_r, sumsq_r, sigma2, tau2):
    '''log N(r; 0, sigma2 I_k + tau2 11') from the sufficient statistics of r.'''
    return (-0.5 * k * np.log(2 * np.pi * sigma2) - 0.5 * np.log1p(k * tau2 / sigma2)
            - 0.5 * (sumsq_r - tau2 * sum_r ** 2 / (sigma2 + k * tau2)) / sigma2)

def _data2(mu11_mean, mu12_mean, mu1_sd, comp_sd, mix_weight, mu2_mean, mu2_sd, m2_sd, exhaustive_limit):
    sigma2, tau2 = comp_sd ** 2, mu1_sd ** 2
    limit = int(exhaustive_limit)

    def prior1(rng, size):
        return np.stack([
            sample(DistSpec.normal(mu11_mean, mu1_sd), rng, size),
            sample(DistSpec.normal(mu12_mean, mu1_sd), rng, size),
        ], axis = 1)

    def cond1(theta, n, rng):
        first = sample(DistSpec.uniform01(), rng, (len(theta), n)) < mix_weight
        means = np.where(first, theta[:, 0:1], theta[:, 1:2])
        return sample(DistSpec.normal(means, comp_sd), rng, means.shape)

    def marginal1(y):
        n = y.shape[-1]
        if n > limit:
            raise NoOracleError(f'data2 M1 marginal enumerates 2^n assignments; n = {n} exceeds the limit {limit}')
        rows = y.reshape(-1, n)
        r1, r2 = rows - mu11_mean, rows - mu12_mean
        q1, q2 = r1 ** 2, r2 ** 2
        total = np.full(len(rows), -np.inf)
        chunk = 1 << 14
        assignments = np.array(list(product((1., 0.), repeat = n)), dtype = np.float64) if n <= 14 else None
        for start in range(0, 1 << n, chunk):
            if assignments is not None:
                masks = assignments[start : start + chunk]
            else:
                codes = np.arange(start, min(start + chunk, 1 << n))
                masks = ((codes[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.float64)
            k = masks.sum(axis = 1)[:, None]
            rest = 1. - masks
            log_w = k * np.log(mix_weight) + (n - k) * np.log1p(-mix_weight)
            term = (log_w
                    + _group_log_density(k, masks @ r1.T, masks @ q1.T, sigma2, tau2)
                    + _group_log_density(n - k, rest @ r2.T, rest @ q2.T, sigma2, tau2))
            total = np.logaddexp(total, logsumexp(term, axis = 0))
        return total.reshape(y.shape[:-1]) if y.ndim > 1 else total[0]

    def prior2(rng, size):
        return sample(DistSpec.normal(mu2_mean, mu2_sd), rng, size)[:, None]

    def cond2(theta, n, rng):
        return sample(DistSpec.normal(theta, m2_sd), rng, (len(theta), n))

    def marginal2(y):
        r = y - mu2_mean
        return _group_log_density(y.shape[-1], r.sum(axis = -1), (r ** 2).sum(axis = -1), m2_sd ** 2, mu2_sd ** 2)

    def predictive2(y_obs, m, rng):
        n, s = _stats(y_obs)
        precision = 1 / mu2_sd ** 2 + n / m2_sd ** 2
        mean = (mu2_mean / mu2_sd ** 2 + s / m2_sd ** 2) / precision
        mu = sample(DistSpec.normal(mean, np.sqrt(1 / precision)), rng, m)
        return sample(DistSpec.normal(mu, m2_sd), rng, m)

    support = Support('reals')
    m1 = ModelSpec('data2.M1', 2, prior1, cond1, support, marginal1, None)
    m2 = ModelSpec('data2.M2', 1, prior2, cond2, support, marginal2, predictive2)
    return m1, m2

# data3: Exp(lam) with lam ~ Gamma(a, b) against Exp(fixed_rate).

def _data3(prior_shape, prior_rate, fixed_rate):
    def prior1(rng, size):
        return sample(DistSpec.gamma(prior_shape, prior_rate), rng, size)[:, None]

    def cond1(theta, n, rng):
        return sample(DistSpec.exponential(theta), rng, (len(theta), n))

    def marginal1(y):
        n, s = _stats(y)
        return (prior_shape * np.log(prior_rate) + gammaln(n + prior_shape) - gammaln(prior_shape)
                - (n + prior_shape) * np.log(s + prior_rate))

    def predictive1(y_obs, m, rng):
        n, s = _stats(y_obs)
        lam = sample(DistSpec.gamma(prior_shape + n, prior_rate + s), rng, m)
        return sample(DistSpec.exponential(lam), rng, m)

    def prior2(rng, size):
        return np.full((size, 1), float(fixed_rate))

    def cond2(theta, n, rng):
        return sample(DistSpec.exponential(theta), rng, (len(theta), n))

    def marginal2(y):
        n, s = _stats(y)
        return n * np.log(fixed_rate) - fixed_rate * s

    def predictive2(y_obs, m, rng):
        # fixed parameter: the observed data carry no information
        return sample(DistSpec.exponential(fixed_rate), rng, m)

    support = Support('nonneg_reals')
    m1 = ModelSpec('data3.M1', 1, prior1, cond1, support, marginal1, predictive1)
    m2 = ModelSpec('data3.M2', 1, prior2, cond2, support, marginal2, predictive2)
    return m1, m2

def _mpt(trials_per_cell, n_participants, layout, abc_priors):
    specs = [MptSpec(tree, int(trials_per_cell), int(n_participants), layout, abc_priors) for tree in ('PD', 'Stroop')]
    support = Support('counts_bounded', specs[0].max_count)
    models = []
    for spec in specs:
        models.append(ModelSpec(f'mpt.{spec.tree}', 3,
                                lambda rng, size, spec = spec: spec.prior_sample(rng, size),
                                lambda theta, n, rng, spec = spec: spec.counts(theta, rng),
                                support, data_length = spec.vector_length))
    return tuple(models)

BUILTIN_DEFAULTS = {
    'data1' : {'alpha1' : 1., 'beta1' : 1., 'alpha2' : 1., 'beta2' : 1.},
    'data2' : {'mu11_mean' : 2., 'mu12_mean' : -2., 'mu1_sd' : 1.5, 'comp_sd' : 2., 'mix_weight' : 0.5,
               'mu2_mean' : 0., 'mu2_sd' : 1., 'm2_sd' : 2.5, 'exhaustive_limit' : 20},
    'data3' : {'prior_shape' : 2., 'prior_rate' : 2., 'fixed_rate' : 3.},
    'mpt'   : {'trials_per_cell' : 36, 'n_participants' : 42, 'layout' : 'summed',
               'abc_priors' : {'A' : (1., 1.), 'B' : (1., 1.), 'C' : (1., 1.)}},
}
BUILDERS = {'data1' : _data1, 'data2' : _data2, 'data3' : _data3, 'mpt' : _mpt}
OUTLIERS = {'data1' : 18., 'data2' : 10., 'data3' : 2.5}

def make_builtin_pair(name : str, hyperparams : Optional[Mapping[str, Any]] = None, priors : Sequence[float] = (0.5, 0.5)) -> ModelPair:
    '''Built-in pair ``name`` with ``hyperparams`` overriding the family defaults.'''
    if name not in BUILDERS:
        raise InvalidParameterError(f'unknown model pair {name!r}, expected one of {sorted(BUILDERS)}')
    params = dict(BUILTIN_DEFAULTS[name])
    for key, value in (hyperparams or {}).items():
        if key not in params:
            raise InvalidParameterError(f'unknown hyperparameter {key!r} for {name}, expected a subset of {sorted(params)}')
        params[key] = value
    if name != 'mpt':
        for key, value in params.items():
            if not np.isfinite(value):
                raise InvalidParameterError(f'hyperparameter {key} must be finite, got {value}')
            if key not in ('mu11_mean', 'mu12_mean', 'mu2_mean') and value <= 0:
                raise InvalidParameterError(f'hyperparameter {key} must be positive, got {value}')
        if name == 'data2' and not params['mix_weight'] < 1:
            raise InvalidParameterError('mix_weight must lie in (0, 1)')
    m1, m2 = BUILDERS[name](**params)
    return ModelPair(m1, m2, float(priors[0]), float(priors[1]), name, params)

def outlier_dataset(name : str, n : int) -> NDArray[np.float64]:
    '''Constant dataset that is implausible under the named pair's models.'''
    if name not in OUTLIERS:
        raise InvalidParameterError(f'no planted outlier for {name!r}')
    return np.full(n, OUTLIERS[name])
