"""Numeric substrate: tensors with reverse-mode autodiff, FFTs, AdamW."""
from .autodiff import Tape, Tensor, as_tensor, make_op
from .fft import fft_along, ifft_along
from .optim import AdamW, OptimizerState, adamw_step, cosine_lr
from .rng import box_muller, make_rng
from .serialize import load_tensor, read_tensor, save_tensor, write_tensor
from . import autodiff as ops


def backward(tape: Tape, loss: Tensor, params):
    """Map each parameter's name (or position) to d loss / d param."""
    grads = tape.gradient(loss, params)
    return {(p.name if p.name is not None else i): g for i, (p, g) in enumerate(zip(params, grads))}


__all__ = [
    "Tape", "Tensor", "as_tensor", "make_op", "ops", "backward",
    "fft_along", "ifft_along", "AdamW", "OptimizerState", "adamw_step", "cosine_lr",
    "box_muller", "make_rng", "load_tensor", "read_tensor", "save_tensor", "write_tensor",
]
