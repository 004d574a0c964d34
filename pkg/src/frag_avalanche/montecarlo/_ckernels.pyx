# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
# distutils: language = c++
"""Compiled simulation kernels.

Line-for-line counterpart of ``_pykernels.py``.  Uniforms are read directly
from the numpy bit generator behind the stream's Generator, which is the same
``next_double`` that ``Generator.random()`` calls, so both backends see the
same numbers and make the same decisions.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport floor, log, pow
from libcpp.vector cimport vector
from numpy.random cimport bitgen_t

from frag_avalanche.errors import InternalError, PopulationCap

cdef long MAX_PROPOSALS = 1000000


cdef bitgen_t* _bitgen(gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("generator does not expose a numpy BitGenerator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _u(bitgen_t* rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _lattice(double base, long i, long j, double beta, double gbeta) noexcept nogil:
    return base * pow(beta, <double> i) * pow(gbeta, <double> j)


def chain(gen, double base, long i, long j, bint frozen, double t_end, double beta,
          double lambda0, double edge):
    cdef bitgen_t* rng = _bitgen(gen)
    cdef double gbeta = 1.0 - beta
    cdef double x = edge if frozen else _lattice(base, i, j, beta, gbeta)
    cdef double t = 0.0, u, small, big, ps, pb
    cdef int kind
    times, kinds, iis, jjs = [], [], [], []
    with gen.bit_generator.lock:
        while True:
            t += -log(1.0 - _u(rng)) / lambda0
            if t > t_end:
                break
            u = _u(rng)
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


def sde(gen, double base, long i, long j, bint frozen, double t_end, double beta,
        double lambda0, double edge):
    cdef bitgen_t* rng = _bitgen(gen)
    cdef double gbeta = 1.0 - beta
    cdef double lam_b = lambda0 * beta
    cdef double x = edge if frozen else _lattice(base, i, j, beta, gbeta)
    cdef double t = 0.0, s, small, big
    cdef int kind
    times, kinds, iis, jjs = [], [], [], []
    with gen.bit_generator.lock:
        while True:
            t += -log(1.0 - _u(rng)) / lambda0
            if t > t_end:
                break
            _u(rng)
            s = lambda0 * _u(rng)
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


cdef struct Particle:
    long root
    long i
    long j
    long cb
    double value
    long band
    bint alive


cdef struct Entry:
    double t
    long pid
    int kind


cdef inline bint _less(Entry a, Entry b) noexcept nogil:
    if a.t != b.t:
        return a.t < b.t
    if a.pid != b.pid:
        return a.pid < b.pid
    return a.kind < b.kind


cdef void _push(vector[Entry]& heap, Entry e) noexcept nogil:
    heap.push_back(e)
    cdef size_t k = heap.size() - 1
    cdef size_t parent
    cdef Entry tmp
    while k > 0:
        parent = (k - 1) // 2
        if _less(heap[k], heap[parent]):
            tmp = heap[k]
            heap[k] = heap[parent]
            heap[parent] = tmp
            k = parent
        else:
            break


cdef Entry _pop(vector[Entry]& heap) noexcept nogil:
    cdef Entry top = heap[0]
    cdef Entry tmp
    heap[0] = heap[heap.size() - 1]
    heap.pop_back()
    cdef size_t n = heap.size()
    cdef size_t k = 0, child, smallest
    while True:
        child = 2 * k + 1
        if child >= n:
            break
        smallest = k
        if _less(heap[child], heap[smallest]):
            smallest = child
        if child + 1 < n and _less(heap[child + 1], heap[smallest]):
            smallest = child + 1
        if smallest == k:
            break
        tmp = heap[k]
        heap[k] = heap[smallest]
        heap[smallest] = tmp
        k = smallest
    return top


cdef long _band(double x, vector[double]& thresholds) noexcept nogil:
    cdef size_t k
    for k in range(thresholds.size()):
        if x >= thresholds[k]:
            return k
    return thresholds.size() - 1


cdef int _offspring(bitgen_t* rng, vector[double]& roots, vector[double]& thresholds,
                    Particle* parent, double beta, double log_b, double log_g, bint edge_policy,
                    long* out) except -1:
    cdef double gbeta = 1.0 - beta
    cdef long band = parent.band
    cdef double edge = thresholds[band]
    cdef bint clipped = parent.cb >= 0
    cdef double base = thresholds[parent.cb] if clipped else roots[parent.root]
    cdef long i, j, n
    cdef double yv, ratio
    cdef bint below
    if not edge_policy:
        if clipped or _lattice(base, parent.i, parent.j + 1, beta, gbeta) < edge:
            out[0] = parent.root
            out[1] = parent.i
            out[2] = parent.j
            out[3] = parent.cb
            return 0
    for n in range(MAX_PROPOSALS):
        i = <long> floor(log(1.0 - _u(rng)) / log_b)
        j = <long> floor(log(1.0 - _u(rng)) / log_g)
        if clipped:
            yv = _lattice(base, i, j, beta, gbeta)
        else:
            yv = _lattice(base, parent.i + i, parent.j + j, beta, gbeta)
        below = yv < edge
        if below and not edge_policy:
            continue
        ratio = pow(beta, <double> i) * pow(gbeta, <double> j)
        if _u(rng) >= 1.0 - ratio:
            continue
        out[0] = parent.root
        out[1] = parent.i + i
        out[2] = parent.j + j
        out[3] = band if below else -1
        return 0
    raise InternalError(f"offspring sampler exceeded {MAX_PROPOSALS} proposals")


cdef void _spawn(bitgen_t* rng, vector[Particle]& ps, vector[Entry]& heap, double now,
                 long root, long i, long j, long cb, vector[double]& roots,
                 vector[double]& thresholds, double beta, double gbeta, double lambda0) noexcept nogil:
    cdef Particle p
    p.root = root
    p.i = i
    p.j = j
    p.cb = cb
    p.value = thresholds[cb] if cb >= 0 else _lattice(roots[root], i, j, beta, gbeta)
    p.band = _band(p.value, thresholds)
    p.alive = True
    cdef long pid = ps.size()
    ps.push_back(p)
    cdef Entry em, eb
    em.t = now + -log(1.0 - _u(rng)) / lambda0
    em.pid = pid
    em.kind = 0
    eb.t = now + -log(1.0 - _u(rng))
    eb.pid = pid
    eb.kind = 1
    _push(heap, em)
    _push(heap, eb)


def branching(gen, roots_in, particles, double t_end, double beta, double lambda0,
              thresholds_in, bint edge_policy, long cap):
    cdef bitgen_t* rng = _bitgen(gen)
    cdef double gbeta = 1.0 - beta
    cdef double log_b = log(beta), log_g = log(gbeta)
    cdef vector[double] roots = roots_in
    cdef vector[double] thresholds = thresholds_in
    cdef vector[Particle] ps
    cdef vector[Entry] heap
    cdef long alive = 0
    cdef Entry e
    cdef Particle* p
    cdef double x, u, small, big, pbs, pbb, edge, base, y
    cdef int ev
    cdef long child[4]
    cdef long root, i, j, cb
    events = []
    with gen.bit_generator.lock:
        for tup in particles:
            root, i, j, cb = tup
            _spawn(rng, ps, heap, 0.0, root, i, j, cb, roots, thresholds, beta, gbeta, lambda0)
            alive += 1
        if alive > cap:
            raise PopulationCap(f"population {alive} exceeds cap {cap}")
        while heap.size() > 0:
            e = _pop(heap)
            if e.t > t_end:
                break
            p = &ps[e.pid]
            if not p.alive:
                continue
            x = p.value
            if e.kind == 0:
                u = _u(rng)
                ev = 2
                i = p.i
                j = p.j
                if p.cb < 0:
                    edge = thresholds[p.band]
                    base = roots[p.root]
                    small = _lattice(base, i + 1, j, beta, gbeta)
                    big = _lattice(base, i, j + 1, beta, gbeta)
                    pbs = beta * x if small >= edge else 0.0
                    pbb = gbeta * x if big >= edge else 0.0
                    if u < pbs:
                        p.i = i + 1
                        p.value = small
                        ev = 1
                    elif u < pbs + pbb:
                        p.j = j + 1
                        p.value = big
                        ev = 1
                events.append((e.t, ev, e.pid, x, p.value, p.root, p.i, p.j, p.cb))
                e.t = e.t + -log(1.0 - _u(rng)) / lambda0
                _push(heap, e)
            else:
                _offspring(rng, roots, thresholds, p, beta, log_b, log_g, edge_policy, child)
                p.alive = False
                alive -= 1
                if child[3] >= 0:
                    y = thresholds[child[3]]
                else:
                    y = _lattice(roots[child[0]], child[1], child[2], beta, gbeta)
                events.append((e.t, 5 if child[3] >= 0 else 4, e.pid, x, y,
                               child[0], child[1], child[2], child[3]))
                # p may dangle once ps grows; only child[] is used from here on
                _spawn(rng, ps, heap, e.t, child[0], child[1], child[2], child[3],
                       roots, thresholds, beta, gbeta, lambda0)
                _spawn(rng, ps, heap, e.t, child[0], child[1], child[2], child[3],
                       roots, thresholds, beta, gbeta, lambda0)
                alive += 2
                if alive > cap:
                    raise PopulationCap(f"population {alive} exceeds cap {cap}")
    final = [(ps[k].root, ps[k].i, ps[k].j, ps[k].cb) for k in range(ps.size()) if ps[k].alive]
    return final, events
