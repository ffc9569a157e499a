'''
FNN, BNN and DeepSet discriminators.

The final dense layer emits one logit per row; probabilities are its
sigmoid. Training objective and gradients are taken with respect to the
logit so that saturated outputs never produce NaNs.
'''

import numpy as np
import torch
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple
from numpy.typing import ArrayLike, NDArray
from ..errors import InvalidParameterError, ShapeMismatchError
from ..rngdist import RngStream
from .layers import BatchNorm, Dense, ObservationSplit, ReLU, SetMeanPool

ARCHS = ('FNN', 'BNN', 'DeepSet')
MODES = ('train', 'eval')
CLAMP = 1e-7

@dataclass(frozen = True)
class ArchSpec(object):
    '''
    Discriminator architecture.

    ``width``/``depth`` shape the fully connected head shared by FNN and
    DeepSet. BNN starts at ``first_width`` (``max(64, 2 * input_dim)`` when
    unset) and shrinks by ``reduction_ratio`` per layer down to ``floor``.
    DeepSet maps each observation through ``inner_widths`` to ``q`` features.
    '''

    kind : str = 'FNN'
    width : int = 64
    depth : int = 2
    first_width : Optional[int] = None
    reduction_ratio : float = 0.5
    floor : int = 16
    q : int = 2
    inner_widths : Tuple[int, ...] = (64, 64)

    def __post_init__(self):
        object.__setattr__(self, 'inner_widths', tuple(int(w) for w in self.inner_widths))
        if self.kind not in ARCHS:
            raise InvalidParameterError(f'unknown architecture {self.kind!r}, expected one of {ARCHS}')
        if self.width < 1 or self.depth < 0 or self.floor < 1 or self.q < 1:
            raise InvalidParameterError('architecture widths must be positive and depth nonnegative')
        if not 0 < self.reduction_ratio <= 1:
            raise InvalidParameterError(f'reduction_ratio must lie in (0, 1], got {self.reduction_ratio}')
        if self.first_width is not None and self.first_width < 1:
            raise InvalidParameterError(f'first_width must be positive, got {self.first_width}')
        if any(w < 1 for w in self.inner_widths):
            raise InvalidParameterError('DeepSet inner widths must be positive')

    def bnn_widths(self, input_dim : int) -> List[int]:
        widths = [self.first_width or max(64, 2 * input_dim)]
        for _ in range(self.depth):
            widths.append(max(int(widths[-1] * self.reduction_ratio), self.floor))
        return widths

    def to_dict(self) -> Dict:
        document = asdict(self)
        document['inner_widths'] = list(self.inner_widths)
        return document

    @classmethod
    def from_dict(cls, document : Dict) -> 'ArchSpec':
        return cls(**document)

class Network(torch.nn.Module):
    def __init__(self, arch : ArchSpec, input_dim : int, layers : Sequence[torch.nn.Module]):
        super().__init__()
        self.arch = arch
        self.input_dim = int(input_dim)
        self.layers = torch.nn.Sequential(*layers)
        self.frozen = False

    def forward(self, x : torch.Tensor) -> torch.Tensor:
        return self.layers(x)[:, 0]

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def freeze(self) -> 'Network':
        '''Stop gradient tracking and pin evaluation mode; the network can then be shared between readers.'''
        self.requires_grad_(False)
        self.train(False)
        self.frozen = True
        return self

    def extra_repr(self) -> str:
        return f'{self.arch.kind}, input_dim={self.input_dim}, parameters={self.parameter_count()}'

def _fnn_head(fan_in : int, width : int, depth : int, rng : RngStream) -> List[torch.nn.Module]:
    layers = [Dense(fan_in, width, rng), ReLU()]
    for _ in range(depth):
        layers += [Dense(width, width, rng), ReLU()]
    return layers + [Dense(width, 1, rng)]

def build_network(arch : ArchSpec, input_dim : int, rng : Optional[RngStream]) -> Network:
    '''Fresh network for datasets of length ``input_dim``; ``rng = None`` gives all-zero weights.'''
    if input_dim < 1:
        raise InvalidParameterError(f'input_dim must be positive, got {input_dim}')
    if arch.kind == 'FNN':
        layers = _fnn_head(input_dim, arch.width, arch.depth, rng)
    elif arch.kind == 'BNN':
        layers, fan_in = [], input_dim
        for width in arch.bnn_widths(input_dim):
            layers += [Dense(fan_in, width, rng), BatchNorm(width), ReLU()]
            fan_in = width
        layers.append(Dense(fan_in, 1, rng))
    else:
        layers, fan_in = [ObservationSplit()], 1
        for width in arch.inner_widths:
            layers += [Dense(fan_in, width, rng), ReLU()]
            fan_in = width
        layers += [Dense(fan_in, arch.q, rng), SetMeanPool()]
        layers += _fnn_head(arch.q, arch.width, arch.depth, rng)
    return Network(arch, input_dim, layers)

def _as_batch(net : Network, x : ArrayLike) -> torch.Tensor:
    x = np.asarray(x, dtype = np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f'expected a (batch, features) matrix, got shape {x.shape}')
    if net.arch.kind != 'DeepSet' and x.shape[1] != net.input_dim:
        raise ShapeMismatchError(f'network expects {net.input_dim} features, got {x.shape[1]}')
    if x.shape[1] < 1:
        raise ShapeMismatchError('datasets must hold at least one observation')
    return torch.from_numpy(np.ascontiguousarray(x))

def forward_logits(net : Network, x : ArrayLike, mode : str = 'eval') -> NDArray[np.float64]:
    if mode not in MODES:
        raise InvalidParameterError(f'unknown mode {mode!r}')
    if mode == 'train' and net.frozen:
        raise InvalidParameterError('a frozen network cannot run in training mode')
    batch = _as_batch(net, x)
    if not net.frozen:
        net.train(mode == 'train')
    with torch.no_grad():
        return net(batch).numpy()

def forward(net : Network, x : ArrayLike, mode : str = 'eval') -> NDArray[np.float64]:
    '''Per-row classifier probabilities.'''
    logits = forward_logits(net, x, mode)
    return torch.sigmoid(torch.from_numpy(logits)).numpy()

def objective(logits, labels : ArrayLike) -> torch.Tensor:
    '''
    Balanced cross-entropy with D clamped to [1e-7, 1 - 1e-7].

    ``-(mean log D over label-1 rows + mean log(1 - D) over label-0 rows)``;
    a class without rows contributes nothing. Gradients vanish where the clamp
    is active.
    '''
    logits = torch.as_tensor(logits, dtype = torch.float64)
    labels = np.asarray(labels)
    if labels.shape != tuple(logits.shape):
        raise ShapeMismatchError(f'labels of shape {labels.shape} for {tuple(logits.shape)} logits')
    if not np.all((labels == 0) | (labels == 1)):
        raise InvalidParameterError('labels must be 0 or 1')
    d = torch.sigmoid(logits).clamp(CLAMP, 1 - CLAMP)
    pos = torch.from_numpy(labels == 1)
    loss = torch.zeros((), dtype = torch.float64)
    if pos.any():
        loss = loss - torch.log(d[pos]).mean()
    if (~pos).any():
        loss = loss - torch.log1p(-d[~pos]).mean()
    return loss

def backward(net : Network, x : ArrayLike, labels : ArrayLike) -> Tuple[float, Dict[str, NDArray[np.float64]]]:
    '''Training-mode forward pass, loss, and parameter gradients keyed like ``net.named_parameters()``.'''
    if net.frozen:
        raise InvalidParameterError('a frozen network cannot be trained')
    batch = _as_batch(net, x)
    net.train(True)
    loss = objective(net(batch), labels)
    names, params = zip(*net.named_parameters())
    grads = torch.autograd.grad(loss, params)
    return float(loss), {name : g.numpy() for name, g in zip(names, grads)}
