"""Minimal float64 autodiff substrate: tensors, layers, Adam, grad checks, checkpoints."""

from . import functional
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .gradcheck import grad_check, numerical_grad
from .module import Embedding, LayerNorm, Linear, Module
from .optim import Adam, OptimizerState, adam_step
from .tensor import Parameter, Tensor

__all__ = [
    "Adam",
    "Checkpoint",
    "Embedding",
    "LayerNorm",
    "Linear",
    "Module",
    "OptimizerState",
    "Parameter",
    "Tensor",
    "adam_step",
    "functional",
    "grad_check",
    "load_checkpoint",
    "numerical_grad",
    "save_checkpoint",
]
