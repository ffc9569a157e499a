'''
Deep Bayes factor estimation.

A discriminator is trained to tell datasets simulated under M1 (label 1)
from datasets simulated under M2 (label 0), on fresh mini-batches every
iteration. Its output D turns into a Bayes factor via D / (1 - D).
'''

import numpy as np
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import comb
from typing import Any, Dict, Optional, Sequence
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit, logsumexp
from . import __version__
from .env import num_threads
from .errors import ConfigError, InvalidParameterError, NumericError, ShapeMismatchError
from .logger import logger
from .models import ModelPair, make_builtin_pair, simulate_batch
from .nn import AdamState, ArchSpec, Network, adam_step, backward, build_network, forward_logits, objective
from .nn import adam_from_dict, adam_to_dict, network_from_dict, network_to_dict
from .nn.checkpoint import decode_array, encode_array
from .rngdist import RngStream, new_stream
from .utility import config_hash, fan_out, log_interval, read_json, write_json

REFERENCE_STREAM = 5
CHECKPOINT_FORMAT = 'deepbf-checkpoint'
MODES = ('arithmetic', 'geometric')

@dataclass(frozen = True)
class TrainConfig(object):
    '''
    Training budget and discriminator settings.

    Each of the ``iterations`` Adam steps sees ``minibatch_per_model`` fresh
    datasets from each model. With ``restarts`` > 1 the network with the best
    accuracy on ``holdout`` simulated datasets is kept.
    '''

    iterations : int = 40000
    minibatch_per_model : int = 200
    arch : ArchSpec = field(default_factory = ArchSpec)
    seed : int = 0
    eval_reference_batch : int = 200
    restarts : int = 1
    holdout : int = 3000
    learning_rate : float = 0.01

    def __post_init__(self):
        if isinstance(self.arch, dict):
            object.__setattr__(self, 'arch', ArchSpec.from_dict(self.arch))
        if self.iterations < 1:
            raise InvalidParameterError(f'iterations must be at least 1, got {self.iterations}')
        if self.minibatch_per_model < 2:
            raise InvalidParameterError(f'minibatch_per_model must be at least 2, got {self.minibatch_per_model}')
        if self.eval_reference_batch < 2:
            raise InvalidParameterError('eval_reference_batch must be at least 2')
        if self.restarts < 1:
            raise InvalidParameterError(f'restarts must be at least 1, got {self.restarts}')
        if self.holdout < 0 or (self.restarts > 1 and self.holdout < 2):
            raise InvalidParameterError('holdout must be nonnegative, and at least 2 when restarts > 1')
        if not self.learning_rate > 0:
            raise InvalidParameterError(f'learning_rate must be positive, got {self.learning_rate}')

    @classmethod
    def full_scale(cls, **kwargs) -> 'TrainConfig':
        '''Full budget: 400000 iterations of 200 datasets per model.'''
        return cls(iterations = 400000, minibatch_per_model = 200, **kwargs)

    def to_dict(self) -> Dict:
        document = asdict(self)
        document['arch'] = self.arch.to_dict()
        return document

class BfEstimator(object):
    '''
    A frozen discriminator with the transform to Bayes factors.

    ``direction`` 1 means M1 carried label 1 and the estimator targets
    BF_12; direction 2 targets BF_21.
    '''

    def __init__(self, net : Network, n : int, direction : int = 1, eps : float = 0.,
                 pair : Optional[ModelPair] = None, config : Optional[TrainConfig] = None,
                 reference : Optional[NDArray[np.float64]] = None, adam : Optional[AdamState] = None,
                 diagnostics : Optional[Dict[str, Any]] = None):
        if direction not in (1, 2):
            raise InvalidParameterError(f'direction must be 1 or 2, got {direction}')
        if not (np.isfinite(eps) and eps >= 0):
            raise InvalidParameterError(f'eps must be a nonnegative real, got {eps}')
        if n < 1:
            raise InvalidParameterError(f'dataset length must be positive, got {n}')
        if net.arch.kind == 'BNN' and reference is None:
            raise InvalidParameterError('a batch-norm estimator needs a reference batch for evaluation')
        if reference is not None:
            reference = np.array(reference, dtype = np.float64)
            if reference.ndim != 2 or reference.shape[1] != n:
                raise ShapeMismatchError(f'reference batch of shape {reference.shape} for datasets of length {n}')
            reference.flags.writeable = False
        self.net = net if net.frozen else net.freeze()
        self.n = int(n)
        self.direction = direction
        self.eps = float(eps)
        self.pair = pair
        self.config = config
        self.reference = reference
        self.adam = adam
        self.diagnostics = diagnostics or {}

    def with_eps(self, eps : float) -> 'BfEstimator':
        return BfEstimator(self.net, self.n, self.direction, eps, self.pair, self.config, self.reference, self.adam, self.diagnostics)

    def __repr__(self):
        return f'BfEstimator({self.net.arch.kind}, n={self.n}, direction={self.direction}, eps={self.eps})'

def bf_transform(d : ArrayLike, eps : float = 0.):
    '''(d + eps) / ((1 - d) + eps); 1 at d = 0.5 for every eps, +inf at d = 1 when eps = 0.'''
    d = np.asarray(d, dtype = np.float64)
    with np.errstate(divide = 'ignore'):
        return (d + eps) / ((1 - d) + eps)

def _log_bf_from_logits(logits : NDArray[np.float64], eps : float) -> NDArray[np.float64]:
    if eps == 0:
        return logits
    d = expit(logits)
    return np.log(d + eps) - np.log((1 - d) + eps)

def _bf_from_logits(logits : NDArray[np.float64], eps : float) -> NDArray[np.float64]:
    if eps == 0:
        with np.errstate(over = 'ignore'):
            return np.exp(logits)
    return bf_transform(expit(logits), eps)

def discriminator_logits(est : BfEstimator, datasets : ArrayLike) -> NDArray[np.float64]:
    '''Discriminator logits for a (rows, n) matrix of datasets.

    Batch-norm networks evaluate each dataset appended to the stored
    reference batch, so every row sees the same normalization statistics
    regardless of what else is being evaluated.
    '''
    datasets = np.asarray(datasets, dtype = np.float64)
    if datasets.ndim != 2 or datasets.shape[1] != est.n:
        raise ShapeMismatchError(f'estimator was trained for datasets of length {est.n}, got shape {datasets.shape}')
    if est.net.arch.kind != 'BNN':
        return forward_logits(est.net, datasets)
    logits = np.empty(len(datasets))

    def worker(i):
        logits[i] = forward_logits(est.net, np.vstack([est.reference, datasets[i : i + 1]]))[-1]

    fan_out(worker, len(datasets), num_threads())
    return logits

def estimate_log_bf_batch(est : BfEstimator, datasets : ArrayLike) -> NDArray[np.float64]:
    return _log_bf_from_logits(discriminator_logits(est, datasets), est.eps)

def estimate_bf_batch(est : BfEstimator, datasets : ArrayLike) -> NDArray[np.float64]:
    return _bf_from_logits(discriminator_logits(est, datasets), est.eps)

def _single(y : ArrayLike) -> NDArray[np.float64]:
    y = np.asarray(y, dtype = np.float64)
    if y.ndim != 1:
        raise ShapeMismatchError(f'expected one data vector, got shape {y.shape}')
    return y[None, :]

def estimate_bf(est : BfEstimator, y : ArrayLike) -> float:
    return float(estimate_bf_batch(est, _single(y))[0])

def estimate_log_bf(est : BfEstimator, y : ArrayLike) -> float:
    return float(estimate_log_bf_batch(est, _single(y))[0])

# Training.

def _reference_batch(pair : ModelPair, n : int, size : int, seed : int) -> NDArray[np.float64]:
    rng = new_stream(seed, REFERENCE_STREAM)
    half = size // 2
    return np.vstack([simulate_batch(pair.m1, half, n, rng), simulate_batch(pair.m2, size - half, n, rng)])

def _labelled_batch(positive, negative, size : int, n : int, rng : RngStream):
    x = np.vstack([simulate_batch(positive, size, n, rng), simulate_batch(negative, size, n, rng)])
    labels = np.concatenate([np.ones(size, dtype = np.int64), np.zeros(size, dtype = np.int64)])
    return x, labels

def _holdout_score(net : Network, x, labels, reference):
    if net.arch.kind == 'BNN':
        logits = np.array([forward_logits(net, np.vstack([reference, x[i : i + 1]]))[-1] for i in range(len(x))])
    else:
        logits = forward_logits(net, x)
    loss = float(objective(logits, labels))
    accuracy = float(np.mean((logits > 0) == (labels == 1)))
    return loss, accuracy

def _train_once(positive, negative, n : int, cfg : TrainConfig, rng : RngStream, restart : int):
    net = build_network(cfg.arch, n, rng.substream(0))
    state = AdamState.zeros_like(net, lr = cfg.learning_rate)
    sim_rng = rng.substream(1)
    interval = log_interval(cfg.iterations)
    trace = []
    for t in range(cfg.iterations):
        x, labels = _labelled_batch(positive, negative, cfg.minibatch_per_model, n, sim_rng)
        loss, grads = backward(net, x, labels)
        if not np.isfinite(loss):
            raise NumericError(f'non-finite training loss at iteration {t + 1} of restart {restart}',
                               data = {'iteration' : t + 1, 'restart' : restart, 'loss' : str(loss)})
        adam_step(net, grads, state)
        if (t + 1) % interval == 0 or t + 1 == cfg.iterations:
            trace.append([t + 1, loss])
            logger.info(f'Restart {restart}: iteration {t + 1}/{cfg.iterations}, loss = {loss:.6f}, lr = {state.learning_rate(state.t):.6g}.')
    return net, state, trace

def train(pair : ModelPair, n : int, cfg : TrainConfig, rng : RngStream, direction : int = 1, eps : float = 0.) -> BfEstimator:
    '''
    Train a discriminator for datasets of length ``n``.

    Parameters
    ----------
    pair : ModelPair
        Models to contrast.
    n : int
        Dataset length.
    cfg : TrainConfig
        Budget and architecture.
    rng : RngStream
        Source of all randomness; restart r uses substream r + 1 and the
        held-out set substream 0.
    direction : int
        1 to estimate BF_12, 2 to estimate BF_21.
    eps : float
        Transform offset of the returned estimator.
    '''
    if n < 1:
        raise InvalidParameterError(f'dataset length must be positive, got {n}')
    if direction not in (1, 2):
        raise InvalidParameterError(f'direction must be 1 or 2, got {direction}')
    positive, negative = (pair.m1, pair.m2) if direction == 1 else (pair.m2, pair.m1)
    reference = _reference_batch(pair, n, cfg.eval_reference_batch, cfg.seed) if cfg.arch.kind == 'BNN' else None
    if cfg.holdout > 0:
        holdout_x, holdout_labels = _labelled_batch(positive, negative, cfg.holdout // 2, n, rng.substream(0))

    logger.info(f'Train {cfg.arch.kind} discriminator for n = {n}, direction = {direction}: '
                f'{cfg.iterations} iterations x {cfg.minibatch_per_model} datasets per model, {cfg.restarts} restart(s).')
    best = None
    accuracies = []
    for r in range(cfg.restarts):
        net, state, trace = _train_once(positive, negative, n, cfg, rng.substream(r + 1), r)
        if cfg.holdout > 0:
            loss, accuracy = _holdout_score(net, holdout_x, holdout_labels, reference)
            accuracies.append(accuracy)
            logger.info(f'Restart {r}: held-out loss = {loss:.6f}, accuracy = {accuracy:.4f}.')
        else:
            loss, accuracy = None, None
        if best is None or (accuracy is not None and accuracy > best[0]):
            best = (accuracy, r, net, state, trace, loss)

    accuracy, r, net, state, trace, loss = best
    diagnostics = {
        'loss_trace' : trace,
        'holdout_loss' : loss,
        'holdout_accuracy' : accuracy,
        'restart_accuracy' : accuracies,
        'selected_restart' : r,
        'steps' : state.t,
    }
    return BfEstimator(net, n, direction, eps, pair, cfg, reference, state, diagnostics)

# Variants.

def _check_direction(full : BfEstimator, rev : BfEstimator):
    if full.direction == rev.direction:
        raise InvalidParameterError('the training-portion estimator must run in the reverse direction')

def partial_bf(est_full : BfEstimator, est_rev_sub : BfEstimator, y : ArrayLike, split : Sequence[int]) -> float:
    '''PBF_12(Z | X) for X = y[split], as BF_12(y) BF_21(X).'''
    y = np.asarray(y, dtype = np.float64)
    split = [int(i) for i in split]
    if est_full.n != len(y):
        raise ShapeMismatchError(f'full-data estimator expects length {est_full.n}, got {len(y)}')
    if est_rev_sub.n != len(split):
        raise ShapeMismatchError(f'training-portion estimator expects length {est_rev_sub.n}, got {len(split)} indices')
    if any(i < 0 or i >= len(y) for i in split):
        raise InvalidParameterError(f'split indices must lie in [0, {len(y)})')
    _check_direction(est_full, est_rev_sub)
    return estimate_bf(est_full, y) * estimate_bf(est_rev_sub, y[split])

def posterior_bf(est_double : BfEstimator, est_rev : BfEstimator, y : ArrayLike) -> float:
    '''Partial Bayes factor with both portions equal to the full data.'''
    y = np.asarray(y, dtype = np.float64)
    if est_double.n != 2 * len(y):
        raise ShapeMismatchError(f'doubled-data estimator expects length {est_double.n}, got 2 x {len(y)}')
    return partial_bf(est_double, est_rev, np.concatenate([y, y]), range(len(y)))

def training_subsets(n : int, n_x : int, subset_limit : int, rng : Optional[RngStream] = None) -> NDArray[np.int64]:
    '''All size-n_x subsets in lexicographic order, or ``subset_limit`` distinct random ones.'''
    if not 1 <= n_x < n:
        raise InvalidParameterError(f'training size must satisfy 1 <= n_x < n, got n_x = {n_x}, n = {n}')
    if subset_limit < 1:
        raise InvalidParameterError(f'subset_limit must be positive, got {subset_limit}')
    if comb(n, n_x) <= subset_limit:
        return np.array(list(combinations(range(n), n_x)), dtype = np.int64)
    if rng is None:
        raise InvalidParameterError('sampling training subsets needs a random stream')
    seen, subsets = set(), []
    while len(subsets) < subset_limit:
        subset = tuple(sorted(int(i) for i in rng.generator.choice(n, n_x, replace = False)))
        if subset not in seen:
            seen.add(subset)
            subsets.append(subset)
    return np.array(subsets, dtype = np.int64)

def intrinsic_bf(est_full : BfEstimator, est_rev_sub : BfEstimator, y : ArrayLike, n_x : int,
                 mode : str = 'arithmetic', subset_limit : int = 1000, rng : Optional[RngStream] = None) -> float:
    '''
    Arithmetic or geometric intrinsic Bayes factor.

    BF_12(y) times the arithmetic (or geometric) mean of BF_21 over training
    subsets of size ``n_x``, averaged in log space.
    '''
    if mode not in MODES:
        raise InvalidParameterError(f'unknown intrinsic mode {mode!r}, expected one of {MODES}')
    y = np.asarray(y, dtype = np.float64)
    if est_full.n != len(y):
        raise ShapeMismatchError(f'full-data estimator expects length {est_full.n}, got {len(y)}')
    if est_rev_sub.n != n_x:
        raise ShapeMismatchError(f'training-portion estimator expects length {est_rev_sub.n}, got n_x = {n_x}')
    _check_direction(est_full, est_rev_sub)
    subsets = training_subsets(len(y), n_x, subset_limit, rng)
    logs = estimate_log_bf_batch(est_rev_sub, y[subsets])
    if mode == 'arithmetic':
        average = logsumexp(logs) - np.log(len(logs))
    else:
        average = np.mean(logs)
    total = estimate_log_bf(est_full, y) + average
    if np.isnan(total):
        raise NumericError('intrinsic Bayes factor is undefined: the full-data and training-portion estimates saturate in opposite directions')
    with np.errstate(over = 'ignore'):
        return float(np.exp(total))

# Checkpoints.

def checkpoint_document(est : BfEstimator, cfg_hash : Optional[str] = None) -> Dict[str, Any]:
    pair = est.pair.describe() if est.pair is not None else None
    train_config = est.config.to_dict() if est.config is not None else None
    if cfg_hash is None:
        cfg_hash = config_hash({'pair' : pair, 'n' : est.n, 'train' : train_config, 'direction' : est.direction})
    return {
        'format' : CHECKPOINT_FORMAT,
        'version' : __version__,
        'config_hash' : cfg_hash,
        'seed' : est.config.seed if est.config is not None else None,
        'train' : train_config,
        'pair' : pair,
        'n' : est.n,
        'direction' : est.direction,
        'eps' : est.eps,
        'network' : network_to_dict(est.net),
        'adam' : adam_to_dict(est.adam) if est.adam is not None else None,
        'reference' : encode_array(est.reference) if est.reference is not None else None,
        'diagnostics' : est.diagnostics,
    }

def save_estimator(est : BfEstimator, path, cfg_hash : Optional[str] = None):
    write_json(path, checkpoint_document(est, cfg_hash))

def estimator_from_document(document : Dict[str, Any]) -> BfEstimator:
    if document.get('format') != CHECKPOINT_FORMAT:
        raise ConfigError(f'not a deepbf checkpoint (format {document.get("format")!r})')
    try:
        pair = None
        if document['pair'] is not None and document['pair']['name'] != 'custom':
            pair = make_builtin_pair(document['pair']['name'], document['pair']['hyperparams'], document['pair']['priors'])
        config = TrainConfig(**document['train']) if document['train'] is not None else None
        reference = decode_array(document['reference']) if document['reference'] is not None else None
        net = network_from_dict(document['network'])
        return BfEstimator(net, document['n'], document['direction'], document['eps'],
                           pair, config, reference, adam_from_dict(document['adam'], net), document['diagnostics'])
    except (KeyError, TypeError) as error:
        raise ConfigError(f'malformed checkpoint: {error!r}')

def load_estimator(path) -> BfEstimator:
    return estimator_from_document(read_json(path))
