import json
import numpy as np
import pytest
import torch
from deepbf.estimator import BfEstimator
from deepbf.models import make_builtin_pair
from deepbf.nn import ArchSpec, build_network
from deepbf.rngdist import new_stream

@pytest.fixture
def data1():
    return make_builtin_pair('data1')

@pytest.fixture
def data3():
    return make_builtin_pair('data3')

@pytest.fixture
def rng():
    return new_stream(7, 0)

@pytest.fixture
def write_config(tmp_path):
    def write(document, name = 'config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding = 'utf-8')
        return path
    return write

def _small_net(n, seed):
    return build_network(ArchSpec(width = 8, depth = 1), n, new_stream(seed, 0))

@pytest.fixture
def constant_estimator():
    '''FNN estimator whose discriminator logit is log(bf) for every input.'''
    def make(n, bf = 1., direction = 1, eps = 0.):
        net = _small_net(n, 0)
        last = net.layers[-1]
        with torch.no_grad(), np.errstate(divide = 'ignore'):
            last.weight.zero_()
            last.bias.fill_(float(np.log(bf)))
        return BfEstimator(net, n, direction, eps)
    return make

@pytest.fixture
def random_estimator():
    '''FNN estimator with random weights; finite, input-dependent outputs.'''
    def make(n, direction = 1, seed = 0, eps = 0.):
        return BfEstimator(_small_net(n, seed), n, direction, eps)
    return make
