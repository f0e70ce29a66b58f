"""State-Fourier discrete diffusion language model."""

from ._core import (
    Checkpoint,
    InputError,
    NumericalError,
    Vocab,
    forward_step,
    forward_to_step,
    grad_check,
    linear_schedule,
    marginal_survival,
    match_probability,
    noise_sim,
    ssm_kernel,
    train,
)

__all__ = [
    "Checkpoint",
    "InputError",
    "NumericalError",
    "Vocab",
    "forward_step",
    "forward_to_step",
    "grad_check",
    "linear_schedule",
    "marginal_survival",
    "match_probability",
    "noise_sim",
    "ssm_kernel",
    "train",
]
