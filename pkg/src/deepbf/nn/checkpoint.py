'''
JSON encoding of networks and optimizer state.

Arrays are stored as base64 of their little-endian float64 bytes plus a
shape, so a save/load cycle reproduces every value bit for bit.
'''

import base64
import numpy as np
import torch
from typing import Dict, Optional
from numpy.typing import ArrayLike, NDArray
from ..errors import ConfigError
from .adam import AdamState
from .network import ArchSpec, Network, build_network

def encode_array(a : ArrayLike) -> Dict:
    if isinstance(a, torch.Tensor):
        a = a.detach().numpy()
    a = np.ascontiguousarray(a, dtype = '<f8')
    return {'shape' : list(a.shape), 'data' : base64.b64encode(a.tobytes()).decode('ascii')}

def decode_array(document : Dict) -> NDArray[np.float64]:
    try:
        raw = base64.b64decode(document['data'].encode('ascii'), validate = True)
        return np.frombuffer(raw, dtype = '<f8').astype(np.float64).reshape(document['shape'])
    except (KeyError, ValueError, TypeError, AttributeError) as error:
        raise ConfigError(f'malformed array in checkpoint: {error}')

def network_to_dict(net : Network) -> Dict:
    return {
        'arch' : net.arch.to_dict(),
        'input_dim' : net.input_dim,
        'state' : {name : encode_array(t) for name, t in net.state_dict().items()},
    }

def network_from_dict(document : Dict) -> Network:
    try:
        net = build_network(ArchSpec.from_dict(document['arch']), document['input_dim'], None)
        stored = {name : decode_array(a) for name, a in document['state'].items()}
    except (KeyError, TypeError, AttributeError) as error:
        raise ConfigError(f'malformed network in checkpoint: {error!r}')
    expected = net.state_dict()
    if set(stored) != set(expected):
        raise ConfigError(f'checkpoint tensors {sorted(stored)} do not match the architecture {sorted(expected)}')
    for name, target in expected.items():
        if tuple(stored[name].shape) != tuple(target.shape):
            raise ConfigError(f'checkpoint tensor {name} has shape {stored[name].shape}, architecture expects {tuple(target.shape)}')
    net.load_state_dict({name : torch.from_numpy(a).to(expected[name].dtype) for name, a in stored.items()})
    return net

def adam_to_dict(state : AdamState) -> Dict:
    moments = state.optimizer.state_dict()['state']
    document = state.hyperparameters()
    document['t'] = state.t
    document['moments'] = [
        {'m' : encode_array(moments[i]['exp_avg']), 'v' : encode_array(moments[i]['exp_avg_sq'])} if i in moments else None
        for i in range(len(state.params))
    ]
    return document

def adam_from_dict(document : Optional[Dict], net : Network) -> Optional[AdamState]:
    '''Optimizer state bound to the parameters of ``net``.'''
    if document is None:
        return None
    try:
        hyper = {k : document[k] for k in ('lr', 'beta1', 'beta2', 'eps', 'decay', 'decay_every')}
        moments, t = document['moments'], int(document['t'])
    except (KeyError, TypeError, ValueError) as error:
        raise ConfigError(f'malformed optimizer state in checkpoint: {error!r}')
    state = AdamState(net, **hyper)
    if len(moments) != len(state.params):
        raise ConfigError(f'optimizer state holds {len(moments)} parameters, network has {len(state.params)}')
    saved = state.optimizer.state_dict()
    for i, (entry, p) in enumerate(zip(moments, state.params)):
        if entry is None:
            continue
        m, v = decode_array(entry['m']), decode_array(entry['v'])
        if m.shape != tuple(p.shape) or v.shape != tuple(p.shape):
            raise ConfigError(f'optimizer moments of parameter {i} do not match its shape {tuple(p.shape)}')
        saved['state'][i] = {'step' : torch.tensor(float(t)), 'exp_avg' : torch.from_numpy(m), 'exp_avg_sq' : torch.from_numpy(v)}
    state.optimizer.load_state_dict(saved)
    state.resume(t)
    return state
