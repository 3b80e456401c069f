"""Rooted graph-transformation engine for GP 2 programs.

The package executes GP 2 programs on host graphs under the
deletion-before-insertion (double-pushout with relabelling) discipline,
with two switchable graph-storage iteration backends: live-node chains
that skip deleted records in one step, and legacy index scans over the
slot array.
"""

from .engine import ExecConfig, Outcome, run_program
from .graph import Graph, graphs_isomorphic
from .textio import SourceError, parse_host_graph, parse_program, print_graph, validate

__all__ = [
    "ExecConfig", "Graph", "Outcome", "SourceError", "graphs_isomorphic",
    "parse_host_graph", "parse_program", "print_graph", "run_program",
    "validate",
]

__version__ = "0.1.0"
