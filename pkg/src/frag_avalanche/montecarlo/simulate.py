"""Exact event-driven simulators and the replica runner.

No time discretization is involved anywhere: the chain and the SDE are driven
by exponential inter-arrival gaps and the branching system by a next-event
queue of per-particle clocks.
"""
from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

from ..errors import OutOfUnit
from ..kernels import ClipPolicy
from ..model import Configuration, FractalCoord, ModelParams, band_of, coord_value
from . import _backend
from .events import Event, EventKind, EventLog, Trajectory
from .rng import RngStream

DEFAULT_CAP = 10**6


def _coerce_start(x0, roots: Sequence[float] | None) -> tuple[FractalCoord, tuple[float, ...]]:
    if isinstance(x0, FractalCoord):
        if roots is None:
            raise ValueError("a FractalCoord start needs its root sizes")
        return x0, tuple(float(r) for r in roots)
    return FractalCoord(0), (float(x0),)


def _check_time(t_end: float) -> None:
    if not t_end >= 0.0 or math.isinf(t_end):
        raise ValueError(f"t_end must be finite and nonnegative, got {t_end}")


def _trajectory(coord, roots, x0, t_end, params, result, edge, moved_kind) -> Trajectory:
    times, kinds, iis, jjs = result
    beta, gbeta = params.beta, params.gbeta
    base = roots[coord.root]
    events = []
    c, x = coord, x0
    for t, k, i, j in zip(times, kinds, iis, jjs):
        if k == moved_kind:
            nc = FractalCoord(coord.root, i, j)
            nx = base * beta**i * gbeta**j
        else:
            nc, nx = c, x
        events.append(Event(t, EventKind(k), x, nx, c, nc))
        c, x = nc, nx
    return Trajectory(coord, x0, roots, t_end, events)


def simulate_chain(x0, t_end: float, params: ModelParams, stream: RngStream,
                   roots: Sequence[float] | None = None, backend: str | None = None) -> Trajectory:
    """Uniformized banded chain started at ``x0``.

    Arrivals come at rate ``lambda0``; each one draws a step from the banded
    kernel and is logged as a Jump or a Hold.

    Parameters
    ----------
    x0 : float or FractalCoord
        Start size in ``[d_depth, 1]``.  A coordinate needs ``roots``.
    t_end : float
        Horizon.
    stream : RngStream
        Owned by this call for its duration.
    backend : {"python", "compiled"}, optional
        Override the active kernel backend.
    """
    coord, roots = _coerce_start(x0, roots)
    _check_time(t_end)
    x = coord_value(coord, roots, params)
    band = band_of(x, params)
    edge = params.thresholds[band]
    result = _backend.kernels(backend).chain(
        stream.generator, roots[coord.root], coord.i, coord.j, coord.clipped,
        float(t_end), params.beta, params.lambda0, edge)
    return _trajectory(coord, roots, x, t_end, params, result, edge, EventKind.JUMP)


def simulate_sde(x0, t_end: float, params: ModelParams, stream: RngStream,
                 roots: Sequence[float] | None = None, banded: bool = True,
                 backend: str | None = None) -> Trajectory:
    """Jump SDE driven by a Poisson random measure on ``[0, t] x [0, 1] x [0, lambda0]``.

    Each atom draws the inert ``u`` mark and a level ``s``; the size moves to
    ``beta x`` when ``s < lambda0 beta x``, to ``(1 - beta) x`` when
    ``s < lambda0 x`` and stays put otherwise.  Atoms above ``lambda0`` can
    never act because sizes stay at most 1, so the window is exact.

    With ``banded`` (the default) a displacement that would leave the current
    band is suppressed, which is the process whose law matches the banded
    chain.  ``banded=False`` gives the whole-interval equation and accepts
    any start in ``[0, 1]``.
    """
    coord, roots = _coerce_start(x0, roots)
    _check_time(t_end)
    x = coord_value(coord, roots, params)
    if not 0.0 <= x <= 1.0:
        raise OutOfUnit(f"start size {x} outside [0, 1]")
    if banded:
        edge = params.thresholds[band_of(x, params)]
    else:
        if coord.clipped:
            raise ValueError("clipped coordinates only exist in the banded model")
        edge = 0.0
    result = _backend.kernels(backend).sde(
        stream.generator, roots[coord.root], coord.i, coord.j, coord.clipped,
        float(t_end), params.beta, params.lambda0, edge)
    return _trajectory(coord, roots, x, t_end, params, result, edge, EventKind.SDE_ATOM)


def _as_tuple(c: FractalCoord) -> tuple[int, int, int, int]:
    return (c.root, c.i, c.j, -1 if c.clipped_band is None else c.clipped_band)


def _as_coord(root: int, i: int, j: int, cb: int) -> FractalCoord:
    return FractalCoord(root, i, j, None if cb < 0 else cb)


def simulate_branching(config0: Configuration, t_end: float, params: ModelParams,
                       policy: ClipPolicy | str, stream: RngStream, cap: int = DEFAULT_CAP,
                       backend: str | None = None) -> tuple[Configuration, EventLog]:
    """Branching particle system on finite configurations.

    Every particle carries a motion clock (rate ``lambda0``, one banded step
    per tick) and a branching clock (rate 1).  At a branching time the particle
    is replaced by two particles at a common position drawn from the offspring
    law.  Particle ids are assigned in creation order; queue ties are broken
    by id, then by clock kind.

    Returns
    -------
    (Configuration, EventLog)
        Survivors in id order and every motion, branch and clip event.

    Raises
    ------
    PopulationCap
        When the population exceeds ``cap``.
    """
    policy = ClipPolicy.parse(policy)
    _check_time(t_end)
    roots = tuple(float(r) for r in config0.roots)
    for c in config0.coords:
        band_of(coord_value(c, roots, params), params)
    particles = [_as_tuple(c) for c in config0.coords]
    final, raw = _backend.kernels(backend).branching(
        stream.generator, roots, particles, float(t_end), params.beta, params.lambda0,
        params.thresholds, policy is ClipPolicy.EDGE, int(cap))

    current = {pid: c for pid, c in enumerate(config0.coords)}
    next_pid = len(current)
    events = []
    for t, kind, pid, x, y, root, i, j, cb in raw:
        before = current[pid]
        after = _as_coord(root, i, j, cb)
        events.append(Event(t, EventKind(kind), x, y, before, after, pid))
        if kind in (EventKind.BRANCH, EventKind.CLIP):
            del current[pid]
            current[next_pid] = current[next_pid + 1] = after
            next_pid += 2
        else:
            current[pid] = after
    config = Configuration(tuple(_as_coord(*f) for f in final), roots)
    return config, EventLog(events)


# -- replica runner -----------------------------------------------------------

def available_workers() -> int:
    """CPUs this process may run on."""
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def _run_chunk(fn: Callable, seed: int, tag: int, start: int, stop: int, args: tuple,
               backend: str) -> list:
    _backend.use_backend(backend)
    return [fn(RngStream(seed, k, tag), *args) for k in range(start, stop)]


def run_replicas(fn: Callable[..., Any], replicas: int, seed: int, tag: int, args: tuple = (),
                 workers: int = 1, chunk: int | None = None) -> list:
    """Run ``fn(stream, *args)`` for replica indices ``0..replicas-1``.

    Replica ``k`` always receives ``RngStream(seed, k, tag)``, so the returned
    list (in replica order) does not depend on ``workers``.  ``fn`` must be a
    module-level function when ``workers > 1``.
    """
    if replicas < 0:
        raise ValueError("replicas must be nonnegative")
    if workers <= 1 or replicas < 2:
        return _run_chunk(fn, seed, tag, 0, replicas, args, _backend.BACKEND)
    if chunk is None:
        chunk = max(1, math.ceil(replicas / (4 * workers)))
    bounds = [(s, min(s + chunk, replicas)) for s in range(0, replicas, chunk)]
    ctx = multiprocessing.get_context("spawn")
    out: list = []
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(_run_chunk, fn, seed, tag, a, b, args, _backend.BACKEND)
                   for a, b in bounds]
        for f in futures:
            out.extend(f.result())
    return out
