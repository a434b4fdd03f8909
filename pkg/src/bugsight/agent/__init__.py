from .agent import (
    Action,
    AgentConfig,
    AgentState,
    apply_action,
    greedy_action,
    new_agent,
    sample_cone,
    sample_target,
    step,
    walk,
)
from .coverage import CoverageError, coverage_counts, coverage_fraction, coverage_map, write_coverage
from .navgrid import NavGrid, build_navgrid, path_length, shortest_path

__all__ = [
    "Action", "AgentConfig", "CoverageError", "AgentState", "NavGrid", "apply_action", "build_navgrid",
    "coverage_counts", "coverage_fraction", "coverage_map", "greedy_action", "new_agent",
    "path_length", "sample_cone", "sample_target", "shortest_path", "step", "walk", "write_coverage",
]
