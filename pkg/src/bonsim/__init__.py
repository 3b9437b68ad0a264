"""Simulator and analysis toolkit for balanced overlay networks.

An overlay whose in-degrees encode free compute capacity places jobs with
short greedy random walks.  The package covers the graph structure, node
model, walk protocol, workload generation, the simulation loop with a
central baseline, and the closed-form predictions used to check runs.
"""
from .analytics import AnalyticModel, FitReport, bandwidth_model, binomial_degree_dist, fit_degree_distribution
from .config import ConfigError, Constant, Poisson, PowerLaw, ScenarioConfig, load_config, parse_config
from .engine import RunReport, Simulation, run, run_birth_death
from .graph import OverlayGraph
from .node import Job, NodeState
from .protocol import WalkParams, pick_target, place_job, rebalance

__version__ = "0.1.0"

__all__ = [
    "AnalyticModel", "FitReport", "bandwidth_model", "binomial_degree_dist", "fit_degree_distribution",
    "ConfigError", "Constant", "Poisson", "PowerLaw", "ScenarioConfig", "load_config", "parse_config",
    "RunReport", "Simulation", "run", "run_birth_death",
    "OverlayGraph", "Job", "NodeState", "WalkParams", "pick_target", "place_job", "rebalance",
]
