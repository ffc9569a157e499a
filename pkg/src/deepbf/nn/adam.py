import numpy as np
import torch
from typing import Dict
from numpy.typing import NDArray
from torch.optim.lr_scheduler import LambdaLR
from ..errors import InvalidParameterError, ShapeMismatchError
from .network import Network

class AdamState(object):
    '''
    ``torch.optim.Adam`` with a stepped learning-rate schedule.

    ``t`` counts the steps taken. Step ``t`` uses learning rate
    ``lr * decay ** (t // decay_every)``.
    '''

    def __init__(self, net : Network, lr : float = 0.01, beta1 : float = 0.9, beta2 : float = 0.999,
                 eps : float = 1e-8, decay : float = 0.99, decay_every : int = 1000):
        self.lr, self.beta1, self.beta2, self.eps = float(lr), float(beta1), float(beta2), float(eps)
        self.decay, self.decay_every = float(decay), int(decay_every)
        self.t = 0
        self.params = list(net.parameters())
        self.optimizer = torch.optim.Adam(self.params, lr = self.lr, betas = (self.beta1, self.beta2), eps = self.eps)
        # the scheduler has stepped t times before step t + 1
        self.scheduler = LambdaLR(self.optimizer, lambda epoch : self.decay ** ((epoch + 1) // self.decay_every))

    @classmethod
    def zeros_like(cls, net : Network, **kwargs) -> 'AdamState':
        return cls(net, **kwargs)

    def learning_rate(self, t : int) -> float:
        return self.lr * self.decay ** (t // self.decay_every)

    def hyperparameters(self) -> Dict:
        return {'lr' : self.lr, 'beta1' : self.beta1, 'beta2' : self.beta2, 'eps' : self.eps,
                'decay' : self.decay, 'decay_every' : self.decay_every}

    def resume(self, t : int):
        '''Position the schedule after ``t`` completed steps.'''
        self.t = int(t)
        self.scheduler.last_epoch = self.t
        for group in self.optimizer.param_groups:
            group['lr'] = self.learning_rate(self.t + 1)

def adam_step(net : Network, grads : Dict[str, NDArray[np.float64]], state : AdamState):
    '''One bias-corrected Adam update, applied to ``net`` in place.'''
    if net.frozen:
        raise InvalidParameterError('a frozen network cannot be trained')
    named = list(net.named_parameters())
    if len(named) != len(state.params) or any(p is not q for (_, p), q in zip(named, state.params)):
        raise ShapeMismatchError('optimizer state does not belong to this network')
    if set(grads) != {name for name, _ in named}:
        raise ShapeMismatchError('gradients do not match the network parameters')
    for name, p in named:
        g = torch.as_tensor(grads[name], dtype = torch.float64)
        if g.shape != p.shape:
            raise ShapeMismatchError(f'gradient for {name} has shape {tuple(g.shape)}, parameter {tuple(p.shape)}')
        p.grad = g.clone()
    state.optimizer.step()
    state.scheduler.step()
    state.t += 1
    state.optimizer.zero_grad(set_to_none = True)
    return net, state
