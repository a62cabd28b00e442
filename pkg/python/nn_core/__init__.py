"""
nn_core package

Dense networks with exact reverse-mode gradients, an Adam optimizer and
bit-exact checkpoints. Shared by the diffusion discriminator and SAC.
拡散判別器と SAC が共有する全結合ネットワーク基盤。
"""

from nn_core.adam import AdamState, ParamVector, adam_init, adam_step
from nn_core.dense import (
    DenseGradients,
    DenseNet,
    backward,
    forward,
    forward_cache,
    init_dense,
    param_count,
    penultimate,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "DenseGradients",
    "DenseNet",
    "ParamVector",
    "adam_init",
    "adam_step",
    "backward",
    "forward",
    "forward_cache",
    "init_dense",
    "param_count",
    "penultimate",
]
