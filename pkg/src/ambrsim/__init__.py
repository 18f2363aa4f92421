"""Discrete-event simulator for monitor-based ad hoc routing (AMBR) and baselines."""

from .analytic import (
    AnalyticParams,
    eval_pb,
    eval_pf0,
    eval_pf1,
    eval_pk_distribution,
    eval_pn,
    eval_pr,
    eval_ps,
    monte_carlo_pb,
)
from .config import SimConfig, load_config
from .kernel import Kernel, RngStreams
from .simulation import Simulation, run_simulation

__all__ = [
    "AnalyticParams",
    "Kernel",
    "RngStreams",
    "SimConfig",
    "Simulation",
    "eval_pb",
    "eval_pf0",
    "eval_pf1",
    "eval_pk_distribution",
    "eval_pn",
    "eval_pr",
    "eval_ps",
    "load_config",
    "monte_carlo_pb",
    "run_simulation",
]

__version__ = "0.1.0"
