"""Event records shared by all simulators."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..model import FractalCoord


class EventKind(enum.IntEnum):
    POISSON_ARRIVAL = 0  # Poisson atom that did not move the particle
    JUMP = 1
    HOLD = 2
    SDE_ATOM = 3  # Poisson atom that moved the particle
    BRANCH = 4
    CLIP = 5  # branch whose offspring were clipped to the band edge

    @property
    def label(self) -> str:
        return {
            0: "PoissonArrival",
            1: "Jump",
            2: "Hold",
            3: "SdeAtom",
            4: "Branch",
            5: "Clip",
        }[int(self)]


@dataclass(frozen=True, slots=True)
class Event:
    time: float
    kind: EventKind
    size_before: float
    size_after: float
    coord_before: FractalCoord
    coord_after: FractalCoord
    particle: int = 0


@dataclass
class Trajectory:
    """Piecewise-constant path of a single particle."""

    initial: FractalCoord
    initial_size: float
    roots: tuple[float, ...]
    t_end: float
    events: list[Event] = field(default_factory=list)

    @property
    def final_size(self) -> float:
        return self.events[-1].size_after if self.events else self.initial_size

    def size_at(self, t: float) -> float:
        x = self.initial_size
        for e in self.events:
            if e.time > t:
                break
            x = e.size_after
        return x

    @property
    def final(self) -> FractalCoord:
        return self.events[-1].coord_after if self.events else self.initial

    def state_at(self, t: float) -> FractalCoord:
        """Coordinate at time ``t`` (right-continuous)."""
        c = self.initial
        for e in self.events:
            if e.time > t:
                break
            c = e.coord_after
        return c


@dataclass
class EventLog:
    """Events of one branching replica, in time order."""

    events: list[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)
