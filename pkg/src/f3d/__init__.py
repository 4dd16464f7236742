"""Desk-scale 3D-dynamics-aware manipulation policy learning.

Subpackages:
    tensor      dense float tensors + reverse-mode autodiff
    nn, optim   layers and Adam
    world       synthetic RGB-D environment and oracles
    data        episode container, dataset files, sampling
    model       encoders, token layout/mask, backbone, decoders, policy
    objectives  training losses
    harness     datagen / train / eval / bench / ablate + CLI
"""

from . import tensor
from .tensor import Tensor, Tape, param, constant

__all__ = ["tensor", "Tensor", "Tape", "param", "constant"]
__version__ = "0.1.0"
