import torch

# Training runs must be bitwise reproducible; worker parallelism comes from DEEPBF_THREADS instead.
torch.use_deterministic_algorithms(True)
torch.set_num_threads(1)

from .adam import AdamState, adam_step
from .checkpoint import adam_from_dict, adam_to_dict, network_from_dict, network_to_dict
from .layers import BatchNorm, Dense, ObservationSplit, ReLU, SetMeanPool
from .network import ArchSpec, Network, backward, build_network, forward, forward_logits, objective
