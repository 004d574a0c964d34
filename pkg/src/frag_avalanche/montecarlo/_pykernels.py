"""Pure-Python simulation kernels.

Reference implementation and fallback for :mod:`._ckernels`.  Both modules
consume uniforms in exactly the same order and evaluate sizes with the same
floating-point expressions, so a given stream yields identical results on
either backend.

Kinds: 0 inert Poisson atom, 1 jump, 2 hold, 3 acting SDE atom, 4 branch,
5 clipped branch.  Coordinates travel as ``(root, i, j, clipped_band)`` with
``clipped_band = -1`` for lattice points.
"""
import heapq
import math

from ..errors import PopulationCap
from ..kernels import offspring_exponents


def _lattice(base, i, j, beta, gbeta):
    return base * beta**i * gbeta**j


def chain(gen, base, i, j, frozen, t_end, beta, lambda0, edge):
    """Uniformized chain from ``(i, j)``; returns ``(times, kinds, is, js)``."""
    random = gen.random
    gbeta = 1.0 - beta
    x = edge if frozen else _lattice(base, i, j, beta, gbeta)
    times, kinds, iis, jjs = [], [], [], []
    t = 0.0
    while True:
        t += -math.log(1.0 - random()) / lambda0
        if t > t_end:
            break
        u = random()
        kind = 2
        if not frozen:
            small = _lattice(base, i + 1, j, beta, gbeta)
            big = _lattice(base, i, j + 1, beta, gbeta)
            ps = beta * x if small >= edge else 0.0
            pb = gbeta * x if big >= edge else 0.0
            if u < ps:
                i += 1
                x = small
                kind = 1
            elif u < ps + pb:
                j += 1
                x = big
                kind = 1
        times.append(t)
        kinds.append(kind)
        iis.append(i)
        jjs.append(j)
    return times, kinds, iis, jjs


def sde(gen, base, i, j, frozen, t_end, beta, lambda0, edge):
    """Poisson-measure equation on the window ``[0, t_end] x [0, 1] x [0, lambda0]``.

    Atoms arrive at rate ``lambda0``; the ``u`` mark is drawn and ignored.
    Returns ``(times, kinds, is, js)``.
    """
    random = gen.random
    gbeta = 1.0 - beta
    lam_b = lambda0 * beta
    x = edge if frozen else _lattice(base, i, j, beta, gbeta)
    times, kinds, iis, jjs = [], [], [], []
    t = 0.0
    while True:
        t += -math.log(1.0 - random()) / lambda0
        if t > t_end:
            break
        random()  # u mark, inert on the window
        s = lambda0 * random()
        kind = 0
        if not frozen:
            if s < lam_b * x:
                small = _lattice(base, i + 1, j, beta, gbeta)
                if small >= edge:
                    i += 1
                    x = small
                    kind = 3
            elif s < lambda0 * x:
                big = _lattice(base, i, j + 1, beta, gbeta)
                if big >= edge:
                    j += 1
                    x = big
                    kind = 3
        times.append(t)
        kinds.append(kind)
        iis.append(i)
        jjs.append(j)
    return times, kinds, iis, jjs


def _band(x, thresholds):
    for k, d in enumerate(thresholds):
        if x >= d:
            return k
    return len(thresholds) - 1


def branching(gen, roots, particles, t_end, beta, lambda0, thresholds, edge_policy, cap):
    """Branching particle system with per-particle competing clocks.

    ``particles`` is a sequence of ``(root, i, j, clipped_band)``.  Motion
    clocks tick at rate ``lambda0``, branching clocks at rate 1.  The event
    queue is ordered by ``(time, particle id, kind)``.

    Returns ``(final, events)``: final coordinates in particle-id order and
    event tuples ``(time, kind, pid, size_before, size_after, root, i, j, cb)``.
    """
    random = gen.random
    gbeta = 1.0 - beta
    log_b, log_g = math.log(beta), math.log(gbeta)
    state = {}  # pid -> [root, i, j, cb, value, band]
    heap = []
    events = []
    next_pid = 0

    def spawn(now, root, i, j, cb):
        nonlocal next_pid
        pid = next_pid
        next_pid += 1
        value = thresholds[cb] if cb >= 0 else _lattice(roots[root], i, j, beta, gbeta)
        state[pid] = [root, i, j, cb, value, _band(value, thresholds)]
        tm = now + -math.log(1.0 - random()) / lambda0
        tb = now + -math.log(1.0 - random())
        heapq.heappush(heap, (tm, pid, 0))
        heapq.heappush(heap, (tb, pid, 1))

    for root, i, j, cb in particles:
        spawn(0.0, root, i, j, cb)
    if len(state) > cap:
        raise PopulationCap(f"population {len(state)} exceeds cap {cap}")

    while heap:
        t, pid, kind = heapq.heappop(heap)
        if t > t_end:
            break
        p = state.get(pid)
        if p is None:
            continue
        root, i, j, cb, x, band = p
        if kind == 0:
            u = random()
            ev = 2
            if cb < 0:
                edge = thresholds[band]
                base = roots[root]
                small = _lattice(base, i + 1, j, beta, gbeta)
                big = _lattice(base, i, j + 1, beta, gbeta)
                ps = beta * x if small >= edge else 0.0
                pb = gbeta * x if big >= edge else 0.0
                if u < ps:
                    p[1] = i + 1
                    p[4] = small
                    ev = 1
                elif u < ps + pb:
                    p[2] = j + 1
                    p[4] = big
                    ev = 1
            events.append((t, ev, pid, x, p[4], root, p[1], p[2], cb))
            heapq.heappush(heap, (t + -math.log(1.0 - random()) / lambda0, pid, 0))
        else:
            cr, ci, cj, ccb = offspring_exponents(random, roots, thresholds, root, i, j, cb, band,
                                        beta, log_b, log_g, edge_policy)
            del state[pid]
            y = thresholds[ccb] if ccb >= 0 else _lattice(roots[cr], ci, cj, beta, gbeta)
            events.append((t, 5 if ccb >= 0 else 4, pid, x, y, cr, ci, cj, ccb))
            spawn(t, cr, ci, cj, ccb)
            spawn(t, cr, ci, cj, ccb)
            if len(state) > cap:
                raise PopulationCap(f"population {len(state)} exceeds cap {cap}")

    final = [tuple(state[pid][:4]) for pid in sorted(state)]
    return final, events
