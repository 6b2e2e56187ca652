"""Reverse-mode automatic differentiation over dense float64 tensors."""

from vacgan.autodiff.gradcheck import GradCheckResult, grad_check
from vacgan.autodiff.io import load_tensor, save_tensor
from vacgan.autodiff.ops import forward_primitive
from vacgan.autodiff.tensor import Tape, Tensor, active_tape, backward, child_seeds, make_rng

__all__ = [
    "GradCheckResult",
    "Tape",
    "Tensor",
    "active_tape",
    "backward",
    "child_seeds",
    "forward_primitive",
    "grad_check",
    "load_tensor",
    "make_rng",
    "save_tensor",
]
