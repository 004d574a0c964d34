"""Decreasing size sequences and their finite projections.

A size sequence stands for the point measure putting one unit at each entry.
Only its restriction to ``[d_level, 1]`` is ever simulated; deeper levels
refine it consistently, which is what the projection tests check.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

from ..kernels import ClipPolicy
from ..model import Configuration, ModelParams
from .rng import RngStream
from .simulate import DEFAULT_CAP, simulate_branching


@dataclass(frozen=True)
class SizeSequence:
    """Finitely many sizes in ``(0, 1]``, stored in decreasing order."""

    sizes: tuple[float, ...] = ()
    level: int | None = None

    def __post_init__(self):
        s = tuple(sorted((float(v) for v in self.sizes), reverse=True))
        for v in s:
            if not 0.0 < v <= 1.0:
                raise ValueError(f"sizes must lie in (0, 1], got {v}")
        object.__setattr__(self, "sizes", s)

    def __len__(self) -> int:
        return len(self.sizes)

    @property
    def max_size(self) -> float:
        return self.sizes[0] if self.sizes else 0.0

    @classmethod
    def of(cls, sizes: Iterable[float], level: int | None = None) -> "SizeSequence":
        return cls(tuple(sizes), level)


def project_sizes(x: SizeSequence, level: int, params: ModelParams) -> Configuration:
    """Keep the entries ``>= d_level``; each kept entry becomes its own root."""
    edge = params.at_level(level).floor
    return Configuration.from_sizes(v for v in x.sizes if v >= edge)


def merge_sizes(x: SizeSequence, y: SizeSequence) -> SizeSequence:
    """Decreasing rearrangement of the union of both sequences."""
    merged = heapq.merge(x.sizes, y.sizes, key=lambda v: -v)
    level = x.level if x.level == y.level else None
    return SizeSequence(tuple(merged), level)


def simulate_sizes(x0: SizeSequence, level: int, t_end: float, params: ModelParams,
                   policy: ClipPolicy | str, stream: RngStream, cap: int = DEFAULT_CAP,
                   backend: str | None = None) -> SizeSequence:
    """Level-``level`` projection of the size-sequence process at time ``t_end``."""
    p = params.at_level(level)
    config0 = project_sizes(x0, level, params)
    final, _ = simulate_branching(config0, t_end, p, policy, stream, cap=cap, backend=backend)
    return SizeSequence(tuple(final.values(p)), level)
