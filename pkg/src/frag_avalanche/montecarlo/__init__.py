"""Exact event-driven simulators, random streams and replica orchestration."""
from ._backend import BACKEND, compiled_available, use_backend
from .events import Event, EventKind, EventLog, Trajectory
from .rng import RngStream, stream
from .simulate import run_replicas, simulate_branching, simulate_chain, simulate_sde
from .sizes import SizeSequence, merge_sizes, project_sizes, simulate_sizes

__all__ = [
    "BACKEND",
    "Event",
    "EventKind",
    "EventLog",
    "RngStream",
    "SizeSequence",
    "Trajectory",
    "compiled_available",
    "merge_sizes",
    "project_sizes",
    "run_replicas",
    "simulate_branching",
    "simulate_chain",
    "simulate_sde",
    "simulate_sizes",
    "stream",
    "use_backend",
]
