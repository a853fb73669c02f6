"""Slack-ancilla QAOA laboratory for constrained Markowitz portfolio selection."""

from .instance import PortfolioInstance, generate_instance
from .qaoa import ExperimentRecord, QaoaParams, ScheduleConfig, run_schedule

__version__ = "0.1.0"

__all__ = [
    "PortfolioInstance",
    "generate_instance",
    "ExperimentRecord",
    "QaoaParams",
    "ScheduleConfig",
    "run_schedule",
    "__version__",
]
