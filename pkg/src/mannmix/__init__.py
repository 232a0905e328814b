"""Stochastic Mann iteration for contractive real maps under strongly mixing errors."""
from ._accel import backend_name
from .core import (
    FixedPointProblem,
    IterationTrace,
    MannConfig,
    mann_step,
    pathwise_error_bound,
    picard_run,
    run_mann,
)
from .noise import NoiseSpec, generate_noise_sequence

__version__ = "0.1.0"
