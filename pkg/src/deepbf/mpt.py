'''
Multinomial processing trees for the weapon-identification task.

A is the probability of automatic stereotype activation, B of a guess
(towards "tool"), C of controlled processing. Cells are ordered
White Tool, White Gun, Black Tool, Black Gun, Neutral Tool, Neutral Gun;
each cell probability is the chance of a correct response on that trial type.
'''

import numpy as np
from dataclasses import dataclass, field
from typing import Dict, Tuple
from numpy.typing import ArrayLike, NDArray
from .errors import InvalidParameterError
from .rngdist import DistSpec, RngStream, sample

CELLS = ('white_tool', 'white_gun', 'black_tool', 'black_gun', 'neutral_tool', 'neutral_gun')
TREES = ('PD', 'Stroop')
LAYOUTS = ('full', 'summed')

def pd_cells(A : ArrayLike, B : ArrayLike, C : ArrayLike) -> NDArray[np.float64]:
    '''Process dissociation with guessing: control first, then stereotype, then guess.'''
    A, B, C = (np.asarray(x, dtype = np.float64) for x in (A, B, C))
    return np.stack([
        C + (1 - C) * (A + (1 - A) * B),
        C + (1 - C) * (1 - A) * (1 - B),
        C + (1 - C) * (1 - A) * B,
        C + (1 - C) * (A + (1 - A) * (1 - B)),
        C + (1 - C) * B,
        C + (1 - C) * (1 - B),
    ], axis = -1)

def stroop_cells(A : ArrayLike, B : ArrayLike, C : ArrayLike) -> NDArray[np.float64]:
    '''Stroop model with guessing: stereotype first, then control, then guess.'''
    A, B, C = (np.asarray(x, dtype = np.float64) for x in (A, B, C))
    return np.stack([
        A + (1 - A) * (C + (1 - C) * B),
        (1 - A) * (C + (1 - C) * (1 - B)),
        (1 - A) * (C + (1 - C) * B),
        A + (1 - A) * (C + (1 - C) * (1 - B)),
        C + (1 - C) * B,
        C + (1 - C) * (1 - B),
    ], axis = -1)

def cell_probabilities(tree : str, A : ArrayLike, B : ArrayLike, C : ArrayLike) -> NDArray[np.float64]:
    '''Shape (..., 6) cell probabilities for the named tree.'''
    if tree == 'PD':
        return pd_cells(A, B, C)
    if tree == 'Stroop':
        return stroop_cells(A, B, C)
    raise InvalidParameterError(f'unknown MPT tree {tree!r}, expected one of {TREES}')

@dataclass(frozen = True)
class MptSpec(object):
    '''
    Experimental design of an MPT model.

    ``abc_priors`` maps each of A, B, C to Beta(a, b) parameters;
    Beta(1, 1) is the uniform default.
    '''

    tree : str = 'PD'
    trials_per_cell : int = 36
    n_participants : int = 42
    layout : str = 'summed'
    abc_priors : Dict[str, Tuple[float, float]] = field(default_factory = lambda: {'A' : (1., 1.), 'B' : (1., 1.), 'C' : (1., 1.)})

    def __post_init__(self):
        if self.tree not in TREES:
            raise InvalidParameterError(f'unknown MPT tree {self.tree!r}, expected one of {TREES}')
        if self.layout not in LAYOUTS:
            raise InvalidParameterError(f'unknown MPT layout {self.layout!r}, expected one of {LAYOUTS}')
        if self.trials_per_cell < 1 or self.n_participants < 1:
            raise InvalidParameterError('trials_per_cell and n_participants must be positive')
        if set(self.abc_priors) != {'A', 'B', 'C'}:
            raise InvalidParameterError('abc_priors must name exactly A, B and C')
        for name, (a, b) in self.abc_priors.items():
            if not (a > 0 and b > 0):
                raise InvalidParameterError(f'prior on {name} must have positive Beta parameters')

    @property
    def vector_length(self) -> int:
        return 6 * self.n_participants if self.layout == 'full' else 12

    @property
    def max_count(self) -> int:
        '''Largest count any entry of the data vector can take.'''
        return self.trials_per_cell if self.layout == 'full' else self.trials_per_cell * self.n_participants

    def prior_sample(self, rng : RngStream, size : int) -> NDArray[np.float64]:
        '''Shape (size, 3) draws of (A, B, C) from independent Beta priors.'''
        return np.stack([sample(DistSpec.beta(*self.abc_priors[name]), rng, size) for name in 'ABC'], axis = 1)

    def counts(self, theta : NDArray[np.float64], rng : RngStream) -> NDArray[np.float64]:
        '''Simulate one data vector per parameter row ``theta[i] = (A, B, C)``.

        Parameters are shared by all participants of a dataset.
        '''
        p = np.clip(cell_probabilities(self.tree, theta[:, 0], theta[:, 1], theta[:, 2]), 0., 1.)
        if self.layout == 'full':
            success = sample(DistSpec.binomial(self.trials_per_cell, p[:, None, :]), rng, (len(theta), self.n_participants, 6))
            return success.reshape(len(theta), -1)
        trials = self.trials_per_cell * self.n_participants
        success = sample(DistSpec.binomial(trials, p), rng, p.shape)
        return np.concatenate([success, trials - success], axis = 1)
