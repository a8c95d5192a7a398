"""Local time at zero of Brownian motion reflected on [0, b]: closed forms and Monte Carlo."""

__version__ = "0.1.0"

from .core_math import RateEval, alpha_star, alpha_star_prime, big_v, lambda_star, scaling_check, v_star
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InsufficientTailSamples,
    UnknownFunctional,
    VarianceError,
)
from .mgf import MgfQuery, MgfValue, f_hat, f_hat_decomposition, hitting_laplace, ode_residual
from .params import ReflectionParams
from .simulator import McEstimate, PathSample, SimConfig, mc_functional, simulate_path

__all__ = [
    "ConfigError", "ConvergenceError", "DomainError", "InsufficientTailSamples", "McEstimate",
    "MgfQuery", "MgfValue", "PathSample", "RateEval", "ReflectionParams", "SimConfig",
    "UnknownFunctional", "VarianceError", "alpha_star", "alpha_star_prime", "big_v", "f_hat",
    "f_hat_decomposition", "hitting_laplace", "lambda_star", "mc_functional", "ode_residual",
    "scaling_check", "simulate_path", "v_star",
]
