"""Remote estimation of an Ornstein-Uhlenbeck signal over a random-delay FCFS channel."""

from .channel import FcfsChannel, NoiseModel, ServiceModel
from .errors import BracketFailure, DomainError, NonConvergence
from .evaluation import mse_upper_bound, noise_term_lemma1, policy_report, simulate_long_run
from .policy import OptimalThreshold, Periodic, ZeroWait, threshold_v
from .process import OuParams, mse_lower_bound
from .solver import simulate_cycles, solve_beta

__version__ = "0.1.0"

__all__ = [
    "BracketFailure",
    "DomainError",
    "FcfsChannel",
    "NoiseModel",
    "NonConvergence",
    "OptimalThreshold",
    "OuParams",
    "Periodic",
    "ServiceModel",
    "ZeroWait",
    "mse_lower_bound",
    "mse_upper_bound",
    "noise_term_lemma1",
    "policy_report",
    "simulate_cycles",
    "simulate_long_run",
    "solve_beta",
    "threshold_v",
]
