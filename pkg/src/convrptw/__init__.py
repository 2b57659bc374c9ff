"""Consistent multi-day vehicle routing with time windows.

Each customer keeps a single driver over the whole horizon; the solver
minimizes the number of drivers first.
"""
from .construction import ConstructionParams, construct
from .elimination import EliminationParams, eliminate_routes
from .estimator import ConsistentRoutingSolver, check_instance
from .io import (
    GeneratorConfig,
    generate_convrptw,
    load_bundled_solomon,
    read_instance,
    read_solution,
    write_instance,
    write_solution,
)
from .local_search import PenaltyParams, penalty, reoptimize
from .model import (
    ConVRPTWError,
    InfeasibleInstanceError,
    Instance,
    InstanceError,
    Solution,
    evaluate_route,
    evaluate_solution,
)
from .oracle import OracleLimitError, exact_min_vehicles, export_milp
from .rolling import daily_plan, update_solution
from .solver import solve

__version__ = "0.1.0"

__all__ = [
    "ConVRPTWError", "ConsistentRoutingSolver", "ConstructionParams", "EliminationParams",
    "GeneratorConfig", "InfeasibleInstanceError", "Instance", "InstanceError",
    "OracleLimitError", "PenaltyParams", "Solution", "check_instance", "construct",
    "daily_plan", "eliminate_routes", "evaluate_route", "evaluate_solution",
    "exact_min_vehicles", "export_milp", "generate_convrptw", "load_bundled_solomon",
    "penalty", "read_instance", "read_solution", "reoptimize", "solve", "update_solution",
    "write_instance", "write_solution",
]
