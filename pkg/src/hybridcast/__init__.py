"""Hybrid multicast/unicast channelization for publish-subscribe systems."""
from .model import (ChannelizationSolution, CostReport, CostWeights, HybridSolution,
                    ProblemInstance, all_unicast_cost, brute_force_optimum, hybrid_cost,
                    is_feasible, minimal_user_membership, multicast_cost,
                    perfect_multicast_cost)
from .channelizers import SolverConfig, solve
from .hybrid import HeuristicConfig, run_pipeline

__version__ = "0.1.0"

__all__ = ["ChannelizationSolution", "CostReport", "CostWeights", "HybridSolution",
           "ProblemInstance", "all_unicast_cost", "brute_force_optimum", "hybrid_cost",
           "is_feasible", "minimal_user_membership", "multicast_cost", "perfect_multicast_cost",
           "SolverConfig", "solve", "HeuristicConfig", "run_pipeline"]
