'''
Contrastive model criticism.

For each replicate a quadratic logistic classifier is fitted to tell the
observed data (label 1) from posterior-predictive fakes (label 0), then
scored on a second, independent set of fakes. If the model fits, fakes are
indistinguishable from the data and the scores centre on 0.5.
'''

import numpy as np
import pandas as pd
from dataclasses import dataclass
from typing import Dict, Optional
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit
from .env import num_threads
from .errors import InvalidParameterError
from .logger import logger
from .models import ModelSpec, posterior_predictive_sample
from .rngdist import RngStream
from .utility import fan_out, log_interval

MIN_REPLICATES = 100

@dataclass(frozen = True)
class QuadLogit(object):
    '''d(y) = sigmoid(a + b y + c y^2).'''

    a : float
    b : float
    c : float

    def logit(self, y : ArrayLike) -> NDArray[np.float64]:
        y = np.asarray(y, dtype = np.float64)
        return self.a + self.b * y + self.c * y * y

    def __call__(self, y : ArrayLike) -> NDArray[np.float64]:
        return expit(self.logit(y))

def _balanced_objective(w, x_real, x_fake):
    t_real, t_fake = x_real @ w, x_fake @ w
    value = -np.mean(np.logaddexp(0., -t_real)) - np.mean(np.logaddexp(0., t_fake))
    grad = x_real.T @ (1 - expit(t_real)) / len(t_real) - x_fake.T @ expit(t_fake) / len(t_fake)
    return value, grad

def fit_quadratic_logit(real_obs : ArrayLike, fake : ArrayLike, rng : Optional[RngStream] = None,
                        max_steps : int = 5000, tol : float = 1e-6) -> QuadLogit:
    '''
    Maximize mean log d(real) + mean log(1 - d(fake)).

    Gradient ascent with backtracking on standardized features (pooled mean
    and sd), stopping when the gradient norm drops below ``tol``. An ``rng``
    adds a small jitter to the zero starting point.
    '''
    real_obs = np.asarray(real_obs, dtype = np.float64).ravel()
    fake = np.asarray(fake, dtype = np.float64).ravel()
    if real_obs.size == 0 or fake.size == 0:
        raise InvalidParameterError('both the observed and the fake set must be non-empty')
    if not (np.all(np.isfinite(real_obs)) and np.all(np.isfinite(fake))):
        raise InvalidParameterError('criticism inputs must be finite')
    pooled = np.concatenate([real_obs, fake])
    mu = pooled.mean()
    sd = pooled.std()
    if sd == 0:
        sd = 1.

    def features(y):
        z = (y - mu) / sd
        return np.stack([np.ones_like(z), z, z * z], axis = 1)

    x_real, x_fake = features(real_obs), features(fake)
    w = np.zeros(3) if rng is None else rng.generator.normal(0., 1e-3, 3)
    value, grad = _balanced_objective(w, x_real, x_fake)
    step = 1.
    for _ in range(max_steps):
        norm2 = grad @ grad
        if np.sqrt(norm2) < tol:
            break
        while True:
            candidate = w + step * grad
            new_value, new_grad = _balanced_objective(candidate, x_real, x_fake)
            if new_value >= value + 1e-4 * step * norm2 or step < 1e-12:
                break
            step /= 2
        w, value, grad = candidate, new_value, new_grad
        step *= 2

    w0, w1, w2 = w
    return QuadLogit(float(w0 - w1 * mu / sd + w2 * mu * mu / sd ** 2),
                     float(w1 / sd - 2 * w2 * mu / sd ** 2),
                     float(w2 / sd ** 2))

def z_statistic(d : QuadLogit, fake : ArrayLike) -> float:
    fake = np.asarray(fake, dtype = np.float64)
    if fake.size == 0:
        raise InvalidParameterError('the fake set must be non-empty')
    return float(np.mean(d(fake)))

@dataclass(frozen = True)
class ZReport(object):
    z_samples : NDArray[np.float64]
    lower : float
    upper : float
    contains_half : bool
    level : float = 0.95

    @classmethod
    def from_samples(cls, z : ArrayLike, level : float = 0.95) -> 'ZReport':
        z = np.asarray(z, dtype = np.float64)
        alpha = (1 - level) / 2
        lower = float(np.quantile(z, alpha, method = 'lower'))
        upper = float(np.quantile(z, 1 - alpha, method = 'higher'))
        return cls(z, lower, upper, bool(lower <= 0.5 <= upper), level)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'replicate' : np.arange(len(self.z_samples)), 'z' : self.z_samples})

    def summary(self) -> Dict:
        return {'replicates' : len(self.z_samples), 'level' : self.level, 'lower' : self.lower,
                'upper' : self.upper, 'contains_half' : self.contains_half, 'mean' : float(np.mean(self.z_samples))}

def criticize(model : ModelSpec, y_obs : ArrayLike, replicates : int, rng : RngStream, level : float = 0.95) -> ZReport:
    '''
    Z-statistic distribution of ``model`` against ``y_obs``.

    Replicate r draws from ``rng.substream(r)``: a training fake set, a fresh
    classifier, and a second fake set on which Z is evaluated.
    '''
    y_obs = np.asarray(y_obs, dtype = np.float64).ravel()
    if replicates < MIN_REPLICATES:
        raise InvalidParameterError(f'criticism needs at least {MIN_REPLICATES} replicates, got {replicates}')
    if y_obs.size == 0:
        raise InvalidParameterError('observed data must be non-empty')
    n = len(y_obs)
    z = np.empty(replicates)
    interval = log_interval(replicates)

    def worker(r):
        sub = rng.substream(r)
        train_fake = posterior_predictive_sample(model, y_obs, n, sub)
        d = fit_quadratic_logit(y_obs, train_fake, sub)
        z[r] = z_statistic(d, posterior_predictive_sample(model, y_obs, n, sub))
        if (r + 1) % interval == 0:
            logger.info(f'Criticism replicate {r + 1}/{replicates} done.')

    # fail before spawning workers when the model has no predictive
    posterior_predictive_sample(model, y_obs, 1, rng.substream(replicates))
    fan_out(worker, replicates, num_threads())
    report = ZReport.from_samples(z, level)
    logger.info(f'Z interval [{report.lower:.4f}, {report.upper:.4f}], contains 0.5: {report.contains_half}.')
    return report
