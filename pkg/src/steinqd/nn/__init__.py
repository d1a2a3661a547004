from . import backend
from .adam import AdamState, adam_step
from .mlp import MlpParams, mlp_forward, mlp_param_count, orthogonal
from .tape import Tape, Var, backward, grad_of

__all__ = [
    "backend", "AdamState", "adam_step", "MlpParams", "mlp_forward",
    "mlp_param_count", "orthogonal", "Tape", "Var", "backward", "grad_of",
]
