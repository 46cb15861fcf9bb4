"""Minimum-cost linear network mixing on directed acyclic networks."""

from netmix.centralized import SolveOutcome, brute_force_oracle, solve_centralized, solve_with_expansion
from netmix.instances import builtin, parse_instance, serialize_instance, write_solution
from netmix.mixing import MixingSolution, check_mixing_feasible, propagate_mixing, solution_cost, verify_solution
from netmix.network import NetworkInstance, topological_order, validate

__all__ = [
    "MixingSolution",
    "NetworkInstance",
    "SolveOutcome",
    "brute_force_oracle",
    "builtin",
    "check_mixing_feasible",
    "parse_instance",
    "propagate_mixing",
    "serialize_instance",
    "solution_cost",
    "solve_centralized",
    "solve_with_expansion",
    "topological_order",
    "validate",
    "verify_solution",
    "write_solution",
]
