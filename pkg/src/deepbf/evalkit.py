'''
Evaluation of Bayes factor estimators.

Estimation metrics compare estimated against exact log Bayes factors on
datasets simulated from each model (MSE, prior-weighted Spearman rho, KL
between kernel density estimates). Inference metrics look at the estimated
Bayes factor as a statistic: estimated model priors, surprise tails and
ROC/AUC between the two models. All log Bayes factors are natural logs.
'''

import numpy as np
import pandas as pd
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence, Tuple
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit
from scipy.stats import gaussian_kde, norm, rankdata, spearmanr
from .errors import InvalidParameterError, NoOracleError, NumericError
from .estimator import BfEstimator, estimate_log_bf_batch
from .logger import logger
from .models import ModelPair, exact_log_bf, has_exact_bf, simulate_batch, simulate_mixture
from .rankabc import abc_estimate_batch
from .rngdist import RngStream

KL_FLOOR = 1e-12
GRID_POINTS = 512
GRID_SPAN = 4.
FALLBACK_BANDWIDTH = 1e-3

# Evaluators: anything with a dataset length ``n`` and ``log_bf(datasets)``.

class EstimatorEvaluator(object):
    def __init__(self, est : BfEstimator):
        self.est = est
        self.n = est.n

    def log_bf(self, datasets):
        return estimate_log_bf_batch(self.est, datasets)

class ExactEvaluator(object):
    def __init__(self, pair : ModelPair, n : int):
        self.pair = pair
        self.n = n

    def log_bf(self, datasets):
        return np.asarray(exact_log_bf(self.pair, datasets), dtype = np.float64).reshape(len(datasets))

class ConstantEvaluator(object):
    def __init__(self, n : int, bf : float):
        self.n = n
        with np.errstate(divide = 'ignore'):
            self.value = float(np.log(bf))

    def log_bf(self, datasets):
        return np.full(len(datasets), self.value)

class AbcEvaluator(object):
    '''Rank-based ABC estimates; every call draws a fresh reference table from ``rng``.'''

    def __init__(self, pair : ModelPair, n : int, cfg, rng : RngStream):
        self.pair, self.n, self.cfg, self.rng = pair, n, cfg, rng
        self.calls = 0

    def log_bf(self, datasets):
        results = abc_estimate_batch(self.pair, datasets, self.cfg, self.rng.substream(self.calls))
        self.calls += 1
        return np.log([r.estimate for r in results])

def as_evaluator(est):
    return EstimatorEvaluator(est) if isinstance(est, BfEstimator) else est

# Estimation metrics.

@dataclass
class BfSampleSet(object):
    '''Estimated (and, when an oracle exists, exact) log BFs of datasets simulated from each model.'''

    est_m1 : NDArray[np.float64]
    est_m2 : NDArray[np.float64]
    true_m1 : Optional[NDArray[np.float64]] = None
    true_m2 : Optional[NDArray[np.float64]] = None
    priors : Tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        self.est_m1 = np.asarray(self.est_m1, dtype = np.float64)
        self.est_m2 = np.asarray(self.est_m2, dtype = np.float64)
        if self.est_m1.size == 0 or self.est_m2.size == 0:
            raise InvalidParameterError('every model needs at least one simulated dataset')
        for name in ('true_m1', 'true_m2'):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, np.asarray(value, dtype = np.float64))
        if (self.true_m1 is None) != (self.true_m2 is None):
            raise InvalidParameterError('exact values must be given for both models or neither')
        if self.true_m1 is not None and (self.true_m1.shape != self.est_m1.shape or self.true_m2.shape != self.est_m2.shape):
            raise InvalidParameterError('exact and estimated values must pair up')

    @property
    def has_truth(self) -> bool:
        return self.true_m1 is not None

    def per_model(self):
        return ((self.true_m1, self.est_m1, self.priors[0]), (self.true_m2, self.est_m2, self.priors[1]))

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for model, (true, est, _) in enumerate(self.per_model(), 1):
            frames.append(pd.DataFrame({
                'model' : model,
                'true_log_bf' : true if true is not None else np.nan,
                'est_log_bf' : est,
            }))
        return pd.concat(frames, ignore_index = True)

@dataclass(frozen = True)
class MetricValue(object):
    value : float
    excluded : int = 0
    degenerate : bool = False

    def __float__(self):
        return self.value

def _require_truth(s : BfSampleSet):
    if not s.has_truth:
        raise NoOracleError('this metric needs exact log Bayes factors')

def mse_log_bf(s : BfSampleSet) -> MetricValue:
    '''Prior-weighted mean squared error of the estimated log BF; infinite estimates are excluded and counted.'''
    _require_truth(s)
    total, excluded = 0., 0
    for true, est, prior in s.per_model():
        keep = np.isfinite(est) & np.isfinite(true)
        excluded += int((~keep).sum())
        if not keep.any():
            raise NumericError('no finite estimate left for the MSE of one model')
        total += prior * np.mean((true[keep] - est[keep]) ** 2)
    return MetricValue(float(total), excluded)

def spearman_weighted(s : BfSampleSet) -> MetricValue:
    '''Prior-weighted per-model Spearman rho; a constant vector counts as rho = 0 and sets ``degenerate``.'''
    _require_truth(s)
    total, degenerate = 0., False
    for true, est, prior in s.per_model():
        keep = ~(np.isnan(true) | np.isnan(est))
        true, est = true[keep], est[keep]
        if len(true) < 2:
            raise InvalidParameterError('Spearman rho needs at least two points per model')
        if np.all(true == true[0]) or np.all(est == est[0]):
            degenerate = True
            logger.warning('Constant vector in Spearman rho; counted as 0.')
            continue
        total += prior * spearmanr(true, est).correlation
    return MetricValue(float(total), 0, degenerate)

class Kde(object):
    '''
    ``scipy.stats.gaussian_kde`` with Silverman's bandwidth 1.06 sd N^(-1/5).

    Non-finite samples are dropped and counted in ``excluded``. Samples with
    zero spread get a single kernel of width ``FALLBACK_BANDWIDTH``.
    '''

    def __init__(self, samples : ArrayLike, bandwidth : Optional[float] = None):
        samples = np.asarray(samples, dtype = np.float64).ravel()
        self.samples = samples[np.isfinite(samples)]
        self.excluded = int(samples.size - self.samples.size)
        if self.samples.size == 0:
            raise InvalidParameterError('KDE needs at least one finite sample')
        sd = np.std(self.samples, ddof = 1) if self.samples.size > 1 else 0.
        if bandwidth is None:
            bandwidth = 1.06 * sd * self.samples.size ** -0.2 if sd > 0 else FALLBACK_BANDWIDTH
        self.bandwidth = float(bandwidth)
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InvalidParameterError(f'KDE bandwidth must be positive, got {bandwidth}')
        if sd > 0:
            # gaussian_kde scales its factor by the sample standard deviation
            self._density = gaussian_kde(self.samples, bw_method = self.bandwidth / sd)
        else:
            self._density = norm(loc = self.samples[0], scale = self.bandwidth).pdf

    def __call__(self, grid : ArrayLike) -> NDArray[np.float64]:
        return self._density(np.asarray(grid, dtype = np.float64))

def kde_grid(*kdes : Kde, points : int = GRID_POINTS, span : float = GRID_SPAN) -> NDArray[np.float64]:
    '''Evenly spaced grid over the pooled sample range widened by ``span`` bandwidths.'''
    width = span * max(k.bandwidth for k in kdes)
    low = min(k.samples.min() for k in kdes) - width
    high = max(k.samples.max() for k in kdes) + width
    return np.linspace(low, high, points)

def kl_between_samples(a : ArrayLike, b : ArrayLike, grid : Optional[ArrayLike] = None) -> float:
    '''KL(KDE_a || KDE_b) by a Riemann sum over ``grid``, densities floored at 1e-12.'''
    kde_a, kde_b = Kde(a), Kde(b)
    grid = kde_grid(kde_a, kde_b) if grid is None else np.asarray(grid, dtype = np.float64)
    step = grid[1] - grid[0]
    pa = np.maximum(kde_a(grid), KL_FLOOR)
    pb = np.maximum(kde_b(grid), KL_FLOOR)
    return float(np.sum(pa * np.log(pa / pb)) * step)

def kl_weighted(s : BfSampleSet) -> Tuple[float, Tuple[float, float]]:
    '''Per-model KL between the exact and estimated log BF distributions, and their prior-weighted sum.'''
    _require_truth(s)
    per_model = tuple(kl_between_samples(true, est) for true, est, _ in s.per_model())
    return float(s.priors[0] * per_model[0] + s.priors[1] * per_model[1]), per_model

# Priors and surprise.

def posterior_model_prob(bf : ArrayLike, priors : Sequence[float]):
    '''pi(M1 | Y) = bf pi(M1) / (bf pi(M1) + pi(M2)); 1 at bf = inf.'''
    bf = np.asarray(bf, dtype = np.float64)
    if np.any(bf < 0):
        raise InvalidParameterError('Bayes factors must be nonnegative')
    with np.errstate(invalid = 'ignore'):
        prob = np.where(np.isinf(bf), 1., bf * priors[0] / (bf * priors[0] + priors[1]))
    return float(prob) if prob.ndim == 0 else prob

def posterior_model_prob_log(log_bf : ArrayLike, priors : Sequence[float]):
    return expit(np.asarray(log_bf, dtype = np.float64) + np.log(priors[0]) - np.log(priors[1]))

def estimated_prior(est, pair : ModelPair, T0 : int, rng : RngStream) -> float:
    '''Average posterior probability of M1 over T0 datasets from the prior-weighted model mixture.'''
    if T0 < 1:
        raise InvalidParameterError(f'T0 must be positive, got {T0}')
    evaluator = as_evaluator(est)
    datasets, _ = simulate_mixture(pair, T0, evaluator.n, rng)
    return float(np.mean(posterior_model_prob_log(evaluator.log_bf(datasets), pair.priors)))

@dataclass(frozen = True)
class SurprisePair(object):
    p1 : float
    p2 : float

def _tail_greater(values : NDArray[np.float64], reference : NDArray[np.float64]) -> NDArray[np.float64]:
    ordered = np.sort(reference)
    return 1. - np.searchsorted(ordered, values, side = 'right') / len(ordered)

def _tail_less_equal(values : NDArray[np.float64], reference : NDArray[np.float64]) -> NDArray[np.float64]:
    ordered = np.sort(reference)
    return np.searchsorted(ordered, values, side = 'right') / len(ordered)

def surprise(bf_obs : float, sims_m1 : ArrayLike, sims_m2 : ArrayLike) -> SurprisePair:
    '''p1 = share of M1 simulations above bf_obs, p2 = share of M2 simulations at or below it.

    Any strictly increasing scale works, as long as all three inputs share it.
    '''
    sims_m1 = np.asarray(sims_m1, dtype = np.float64)
    sims_m2 = np.asarray(sims_m2, dtype = np.float64)
    if sims_m1.size == 0 or sims_m2.size == 0:
        raise InvalidParameterError('surprise needs simulations under both models')
    observed = np.array([bf_obs], dtype = np.float64)
    return SurprisePair(float(_tail_greater(observed, sims_m1)[0]), float(_tail_less_equal(observed, sims_m2)[0]))

def mse_surprise_from_samples(s : BfSampleSet) -> float:
    '''
    Prior-weighted mean squared difference between exact and estimated surprise.

    For a dataset from model j, the exact tail uses exact log BFs for both the
    statistic and the reference sample; the estimated tail uses estimates for both.
    '''
    _require_truth(s)
    p1_exact = _tail_greater(s.true_m1, s.true_m1)
    p1_est = _tail_greater(s.est_m1, s.est_m1)
    p2_exact = _tail_less_equal(s.true_m2, s.true_m2)
    p2_est = _tail_less_equal(s.est_m2, s.est_m2)
    return float(s.priors[0] * np.mean((p1_exact - p1_est) ** 2) + s.priors[1] * np.mean((p2_exact - p2_est) ** 2))

def simulate_samples(est, pair : ModelPair, T0 : int, rng : RngStream, exact = None) -> BfSampleSet:
    '''T0 datasets per model from substreams 0 and 1 of ``rng``, scored by ``est`` and, if given, ``exact``.'''
    evaluator = as_evaluator(est)
    datasets = [simulate_batch(model, T0, evaluator.n, rng.substream(j)) for j, model in enumerate((pair.m1, pair.m2))]
    estimates = [evaluator.log_bf(d) for d in datasets]
    truth = [None, None]
    if exact is not None:
        truth = [as_evaluator(exact).log_bf(d) for d in datasets]
    return BfSampleSet(estimates[0], estimates[1], truth[0], truth[1], pair.priors)

def mse_surprise(est, exact, pair : ModelPair, T0 : int, rng : RngStream) -> float:
    return mse_surprise_from_samples(simulate_samples(est, pair, T0, rng, exact))

# ROC.

@dataclass(frozen = True)
class RocResult(object):
    fpr : NDArray[np.float64]
    tpr : NDArray[np.float64]
    thresholds : NDArray[np.float64]
    auc : float

    def curve(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

def roc_auc(scores_m1 : ArrayLike, scores_m2 : ArrayLike) -> RocResult:
    '''
    ROC of "score > c" as a detector of M1, swept over +inf, every distinct
    score in decreasing order, and -inf. AUC is the Mann-Whitney statistic
    with ties counted one half.
    '''
    s1 = np.asarray(scores_m1, dtype = np.float64).ravel()
    s2 = np.asarray(scores_m2, dtype = np.float64).ravel()
    if s1.size == 0 or s2.size == 0:
        raise InvalidParameterError('ROC needs scores under both models')
    thresholds = np.concatenate([[np.inf], np.unique(np.concatenate([s1, s2]))[::-1], [-np.inf]])
    tpr = 1. - np.searchsorted(np.sort(s1), thresholds, side = 'right') / s1.size
    fpr = 1. - np.searchsorted(np.sort(s2), thresholds, side = 'right') / s2.size
    ranks = rankdata(np.concatenate([s1, s2]))
    u = ranks[:s1.size].sum() - s1.size * (s1.size + 1) / 2
    return RocResult(fpr, tpr, thresholds, float(u / (s1.size * s2.size)))

# Report.

@dataclass
class EvalReport(object):
    method : str
    n : int
    seed : int
    T0 : int
    priors : Tuple[float, float]
    estimated_prior_m1 : float
    auc_estimated : float
    mse_log_bf : Optional[float] = None
    mse_excluded : Optional[int] = None
    spearman : Optional[float] = None
    spearman_degenerate : Optional[bool] = None
    kl : Optional[float] = None
    kl_m1 : Optional[float] = None
    kl_m2 : Optional[float] = None
    auc_exact : Optional[float] = None
    mse_surprise : Optional[float] = None
    extras : Dict[str, float] = field(default_factory = dict)

    @property
    def estimated_prior_m2(self) -> float:
        return 1. - self.estimated_prior_m1

    def rows(self):
        yield 'estimated_prior', self.estimated_prior_m1, 1
        yield 'estimated_prior', self.estimated_prior_m2, 2
        yield 'auc_estimated', self.auc_estimated, 0
        for name in ('mse_log_bf', 'mse_excluded', 'spearman', 'kl', 'auc_exact', 'mse_surprise'):
            value = getattr(self, name)
            if value is not None:
                yield name, float(value), 0
        if self.kl_m1 is not None:
            yield 'kl', self.kl_m1, 1
            yield 'kl', self.kl_m2, 2

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{'name' : name, 'value' : value, 'model' : model, 'n' : self.n, 'seed' : self.seed}
                             for name, value, model in self.rows()], columns = ['name', 'value', 'model', 'n', 'seed'])

    def summary(self) -> Dict:
        document = asdict(self)
        document['priors'] = list(self.priors)
        document['estimated_prior_m2'] = self.estimated_prior_m2
        return document

def evaluate(est, pair : ModelPair, T0 : int, rng : RngStream, seed : int = 0, method : str = 'deepbf'):
    '''
    All metrics for ``est`` on T0 datasets per model.

    Estimation metrics are filled in when the pair has exact marginals for
    this dataset length. Returns the report and the underlying samples.
    '''
    evaluator = as_evaluator(est)
    exact = ExactEvaluator(pair, evaluator.n) if has_exact_bf(pair, evaluator.n) else None
    samples = simulate_samples(evaluator, pair, T0, rng, exact)
    prior = estimated_prior(evaluator, pair, T0, rng.substream(2))
    report = EvalReport(method, evaluator.n, seed, T0, pair.priors, prior, roc_auc(samples.est_m1, samples.est_m2).auc)
    if samples.has_truth:
        mse = mse_log_bf(samples)
        rho = spearman_weighted(samples)
        kl, (kl1, kl2) = kl_weighted(samples)
        report.mse_log_bf, report.mse_excluded = mse.value, mse.excluded
        report.spearman, report.spearman_degenerate = rho.value, rho.degenerate
        report.kl, report.kl_m1, report.kl_m2 = kl, kl1, kl2
        report.auc_exact = roc_auc(samples.true_m1, samples.true_m2).auc
        report.mse_surprise = mse_surprise_from_samples(samples)
    else:
        logger.warning('No exact Bayes factors for this pair and n; estimation metrics are skipped.')
    return report, samples
