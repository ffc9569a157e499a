'''
Discriminator building blocks as float64 ``torch.nn`` modules.

Weights are drawn from an ``RngStream`` rather than torch's global
generator, so a network is a function of the run seed alone.
'''

import numpy as np
import torch
import torch.nn.functional as F
from ..errors import InvalidParameterError, ShapeMismatchError
from ..rngdist import RngStream

class Dense(torch.nn.Linear):
    '''Affine map with weights uniform on +-sqrt(6 / fan_in) and zero biases.'''

    def __init__(self, fan_in : int, fan_out : int, rng : RngStream = None):
        if fan_in < 1 or fan_out < 1:
            raise InvalidParameterError(f'dense layer needs positive widths, got {fan_in} -> {fan_out}')
        super().__init__(int(fan_in), int(fan_out), dtype = torch.float64)
        bound = np.sqrt(6. / fan_in)
        if rng is None:
            weight = np.zeros((fan_out, fan_in))
        else:
            weight = rng.generator.uniform(-bound, bound, (fan_out, fan_in))
        with torch.no_grad():
            self.weight.copy_(torch.from_numpy(weight))
            self.bias.zero_()

class BatchNorm(torch.nn.BatchNorm1d):
    '''
    Batch normalization that always uses the statistics of the current batch.

    Running statistics are still tracked in training mode and saved with
    the network, but evaluation never reads them.
    '''

    def __init__(self, width : int, eps : float = 1e-5, momentum : float = 0.1):
        super().__init__(int(width), eps = eps, momentum = momentum, dtype = torch.float64)

    def forward(self, x : torch.Tensor) -> torch.Tensor:
        if x.shape[0] < 2:
            raise ShapeMismatchError('batch normalization needs at least 2 rows')
        if self.training:
            self.num_batches_tracked.add_(1)
            return F.batch_norm(x, self.running_mean, self.running_var, self.weight, self.bias, True, self.momentum, self.eps)
        return F.batch_norm(x, None, None, self.weight, self.bias, True, 0., self.eps)

class ObservationSplit(torch.nn.Module):
    '''(batch, n) -> (batch, n, 1): every observation becomes a one-feature set element.'''

    def forward(self, x : torch.Tensor) -> torch.Tensor:
        return x.unsqueeze(-1)

class SetMeanPool(torch.nn.Module):
    '''Mean over the observation axis of a (batch, n, q) input.

    Each feature column is sorted before summation, so the result does not
    depend on the order of the observations.
    '''

    def forward(self, x : torch.Tensor) -> torch.Tensor:
        return torch.sort(x, dim = 1).values.mean(dim = 1)

ReLU = torch.nn.ReLU
