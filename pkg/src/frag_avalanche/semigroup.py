"""Exact linear algebra on finite reachable supports.

Every state space here is finite: a particle never grows and never leaves its
band, so the closure of a root under the step map and the offspring map is a
finite set of lattice points plus band edges.  On it the transition function
is computed by uniformization with a certified Poisson tail bound, and the
branching cumulant ``h_t`` by a fixed-step RK4 integration of its differential
form, cross-checked against Picard iteration of the integral form.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import (
    BelowResolution,
    SingularSystem,
    ToleranceNotMet,
    UnclosedSupport,
    UnknownCoordinate,
)
from .kernels import ClipPolicy, coord_step, offspring_distribution
from .model import Configuration, FractalCoord, ModelParams, coord_value

SEMIGROUP_TOL = 1e-12
CUMULANT_TOL = 1e-8


class StateSpace:
    """Ordered finite set of coordinates with strictly decreasing values.

    Distinct coordinates with the same float value (for instance a root that
    sits exactly on a band edge and the clipped edge state) are aliases of a
    single state.
    """

    def __init__(self, coords: Sequence[FractalCoord], roots: Sequence[float], params: ModelParams,
                 policy: ClipPolicy = ClipPolicy.EDGE, aliases: dict | None = None):
        self.roots = tuple(roots)
        self.params = params
        self.policy = ClipPolicy.parse(policy)
        vals = [coord_value(c, self.roots, params) for c in coords]
        order = sorted(range(len(coords)), key=lambda k: -vals[k])
        self.coords: tuple[FractalCoord, ...] = tuple(coords[k] for k in order)
        self.values = np.array([vals[k] for k in order], dtype=float)
        if np.any(np.diff(self.values) >= 0):
            raise ValueError("state values must be distinct")
        self._index = {c: k for k, c in enumerate(self.coords)}
        for alias, target in (aliases or {}).items():
            self._index[alias] = self._index[target]

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __contains__(self, c: object) -> bool:
        return c in self._index

    def index(self, c: FractalCoord) -> int:
        try:
            return self._index[c]
        except KeyError:
            raise UnknownCoordinate(f"{c!r} is not in the state space") from None

    def function(self, f) -> np.ndarray:
        """Tabulate a size function ``f`` over the states."""
        return np.array([f(v) for v in self.values], dtype=float)


def _start_coords(x0, roots: Sequence[float] | None) -> tuple[list[FractalCoord], tuple[float, ...]]:
    if isinstance(x0, Configuration):
        return list(x0.coords), tuple(x0.roots)
    if isinstance(x0, FractalCoord):
        if roots is None:
            raise ValueError("roots are required with a FractalCoord start")
        return [x0], tuple(roots)
    if isinstance(x0, (list, tuple)):
        cfg = Configuration.from_sizes(x0)
        return list(cfg.coords), cfg.roots
    return [FractalCoord(0)], (float(x0),)


def reachable_support(x0, params: ModelParams, policy: ClipPolicy | str = ClipPolicy.EDGE,
                      roots: Sequence[float] | None = None) -> StateSpace:
    """Breadth-first closure of the start under in-band moves and offspring atoms.

    ``x0`` may be a size, a list of sizes, a :class:`Configuration`, or a
    coordinate (with ``roots``).
    """
    policy = ClipPolicy.parse(policy)
    start, roots = _start_coords(x0, roots)
    for r in roots:
        if r < params.floor:
            raise BelowResolution(f"root {r} is below the resolution floor {params.floor}")
        if r > 1.0:
            raise ValueError(f"root {r} exceeds 1")
    seen: dict[FractalCoord, float] = {}
    by_value: dict[float, FractalCoord] = {}
    aliases: dict[FractalCoord, FractalCoord] = {}
    queue: deque[FractalCoord] = deque()

    def visit(c: FractalCoord) -> None:
        if c in seen or c in aliases:
            return
        v = coord_value(c, roots, params)
        if v in by_value:
            aliases[c] = by_value[v]
            return
        seen[c] = v
        by_value[v] = c
        queue.append(c)

    for c in start:
        visit(c)
    while queue:
        c = queue.popleft()
        for target, p in coord_step(c, roots, params):
            if p > 0.0:
                visit(target)
        for target, p in offspring_distribution(c, params, policy, roots=roots).items():
            if p > 0.0:
                visit(target)
    return StateSpace(list(seen), roots, params, policy, aliases)


@dataclass(frozen=True)
class TransitionOperator:
    """Row-stochastic matrix over a state space."""

    matrix: np.ndarray
    space: StateSpace
    tag: str
    t: float | None = None
    terms: int = 0

    def row(self, c: FractalCoord) -> np.ndarray:
        return self.matrix[self.space.index(c)]

    def __matmul__(self, other):
        if isinstance(other, TransitionOperator):
            return self.matrix @ other.matrix
        return self.matrix @ other


def _lookup(S: StateSpace, c: FractalCoord) -> int:
    try:
        return S.index(c)
    except UnknownCoordinate:
        raise UnclosedSupport(f"target {c!r} is missing from the state space") from None


def step_matrix(S: StateSpace) -> TransitionOperator:
    """Markovian one-step kernel of the uniformized chain."""
    n = len(S)
    m = np.zeros((n, n))
    for a, c in enumerate(S.coords):
        for target, p in coord_step(c, S.roots, S.params):
            m[a, _lookup(S, target)] += p
    return TransitionOperator(m, S, "step")


def offspring_matrix(S: StateSpace) -> np.ndarray:
    """``Q[x, y]``: probability that both offspring of ``x`` start at ``y``."""
    n = len(S)
    q = np.zeros((n, n))
    for a, c in enumerate(S.coords):
        for target, p in offspring_distribution(c, S.params, S.policy, roots=S.roots).items():
            if p > 0.0:
                q[a, _lookup(S, target)] += p
    return q


def generator_matrix(S: StateSpace) -> np.ndarray:
    n = step_matrix(S).matrix
    return S.params.lambda0 * (n - np.eye(len(S)))


def poisson_truncation(mu: float, tol: float) -> int:
    """Smallest ``K`` whose Poisson(``mu``) tail ``P(N > K)`` is below ``tol``."""
    if mu == 0.0:
        return 0
    k = int(max(0.0, mu))
    while stats.poisson.sf(k, mu) >= tol:
        k += 1
    return k


def transition_at(t: float, S: StateSpace, tol: float = SEMIGROUP_TOL) -> TransitionOperator:
    """Transition matrix at time ``t`` by the truncated uniformization series.

    The sup-norm error is at most ``tol`` because every power of a stochastic
    matrix has sup-norm one.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    n = step_matrix(S).matrix
    mu = S.params.lambda0 * t
    K = poisson_truncation(mu, tol)
    weights = stats.poisson.pmf(np.arange(K + 1), mu) if K > 0 else np.array([1.0])
    power = np.eye(len(S))
    acc = weights[0] * power
    for k in range(1, K + 1):
        power = power @ n
        acc += weights[k] * power
    acc[(acc < 0.0) & (acc >= -1e-15)] = 0.0
    return TransitionOperator(acc, S, "semigroup", t=t, terms=K + 1)


def generator_apply(f: np.ndarray, S: StateSpace) -> np.ndarray:
    """``lambda0 (N' f - f)``."""
    f = np.asarray(f, dtype=float)
    n = step_matrix(S).matrix
    return S.params.lambda0 * (n @ f - f)


def resolvent_apply(alpha: float, f: np.ndarray, S: StateSpace) -> np.ndarray:
    """Solve ``(alpha I - A) u = f`` for the resolvent ``u = U_alpha f``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    f = np.asarray(f, dtype=float)
    lhs = alpha * np.eye(len(S)) - generator_matrix(S)
    try:
        u = np.linalg.solve(lhs, f)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    resid = np.max(np.abs(lhs @ u - f)) if len(f) else 0.0
    scale = max(np.max(np.abs(f)) if len(f) else 0.0, np.finfo(float).tiny)
    if resid > 1e-12 * scale:
        raise SingularSystem(f"resolvent residual {resid:.3e} exceeds 1e-12 * |f|")
    return u


@dataclass
class CumulantOptions:
    tol: float = CUMULANT_TOL
    initial_step: float = 0.05
    max_doublings: int = 14
    cross_check: bool = True
    picard_points_per_unit: int = 1000
    picard_min_iterations: int = 3
    picard_max_iterations: int = 400


@dataclass
class CumulantSolution:
    """Solution of the cumulant equation on a uniform time grid.

    ``values[k]`` is ``h`` at ``times[k]`` over the states of ``space``.
    """

    times: np.ndarray
    values: np.ndarray
    space: StateSpace
    step: float
    steps: int
    doublings: int
    halving_change: float
    picard_iterations: int = 0
    picard_discrepancy: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def at(self, c: FractalCoord, k: int = -1) -> float:
        return float(self.values[k, self.space.index(c)])


def _rk4(phi: np.ndarray, gen: np.ndarray, q: np.ndarray, t_end: float, n: int) -> np.ndarray:
    lin = gen - np.eye(len(phi))

    def rhs(h):
        return lin @ h + q @ (h * h)

    dt = t_end / n
    out = np.empty((n + 1, len(phi)))
    h = phi.copy()
    out[0] = h
    for k in range(n):
        k1 = rhs(h)
        k2 = rhs(h + 0.5 * dt * k1)
        k3 = rhs(h + 0.5 * dt * k2)
        k4 = rhs(h + dt * k3)
        h = h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = h
    return out


def picard_cumulant(phi: np.ndarray, S: StateSpace, t_end: float, m: int, q: np.ndarray | None = None,
                    min_iter: int = 3, max_iter: int = 400, stop: float = 1e-14) -> tuple[np.ndarray, int]:
    """Picard iterates of the integral form on an ``m``-step grid.

    Quadrature is the composite trapezoidal rule, evaluated recursively with
    the exact one-step propagator ``exp(-dt) P_dt``.  Iteration starts from
    ``h = phi`` at all times and stops once successive iterates differ by less
    than ``stop``.  Returns the ``(m + 1, n_states)`` grid and the iteration count.
    """
    if q is None:
        q = offspring_matrix(S)
    dt = t_end / m
    prop = math.exp(-dt) * transition_at(dt, S, tol=1e-15).matrix if t_end > 0 else np.eye(len(S))
    n = len(phi)
    free = np.empty((m + 1, n))
    free[0] = phi
    for k in range(m):
        free[k + 1] = prop @ free[k]
    h = np.tile(phi, (m + 1, 1))
    it = 0
    while True:
        g = (h * h) @ q.T
        pg = g @ prop.T
        new = np.empty_like(h)
        acc = np.zeros(n)
        new[0] = free[0]
        half = 0.5 * dt
        for k in range(m):
            acc = prop @ acc + half * (pg[k] + g[k + 1])
            new[k + 1] = free[k + 1] + acc
        change = float(np.max(np.abs(new - h)))
        h = new
        it += 1
        if it >= max_iter or (it >= min_iter and change < stop):
            break
    return h, it


def cumulant_solve(phi, t_end: float, S: StateSpace, opts: CumulantOptions | None = None) -> CumulantSolution:
    """Solve the branching cumulant equation ``h' = (A - I) h + B(h^2)``, ``h_0 = phi``.

    ``A`` is the generator of the motion and ``B`` the offspring kernel of
    ``S.policy``; branching happens at rate one.  The step is halved until the
    solution changes by less than ``opts.tol / 10``; the result is then
    compared with Picard iteration of the integral form.

    Raises
    ------
    ToleranceNotMet
        If step halving or the Picard cross-check cannot reach ``opts.tol``.
    """
    opts = opts or CumulantOptions()
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (len(S),):
        raise ValueError(f"phi must have shape ({len(S)},)")
    if np.any(phi < 0) or np.any(phi > 1):
        raise ValueError("phi must take values in [0, 1]")
    if t_end < 0:
        raise ValueError(f"t_end must be nonnegative, got {t_end}")
    gen = generator_matrix(S)
    q = offspring_matrix(S)
    if t_end == 0:
        return CumulantSolution(np.array([0.0]), phi[None, :].copy(), S, 0.0, 0, 0, 0.0,
                                picard_iterations=0, picard_discrepancy=0.0)

    n = max(1, math.ceil(t_end / opts.initial_step))
    coarse = _rk4(phi, gen, q, t_end, n)
    change = float("inf")
    doublings = 0
    while doublings < opts.max_doublings:
        fine = _rk4(phi, gen, q, t_end, 2 * n)
        change = float(np.max(np.abs(fine[::2] - coarse)))
        n *= 2
        doublings += 1
        coarse = fine
        if change < opts.tol / 10:
            break
    else:
        raise ToleranceNotMet(f"RK4 step halving still changes h by {change:.3e}")
    values = coarse
    lo = float(values.min())
    hi = float(values.max())
    if lo < -1e-9 or hi > 1 + 1e-9:
        raise ToleranceNotMet(f"cumulant left [0, 1]: range [{lo}, {hi}]")
    values = np.clip(values, 0.0, 1.0)
    times = np.linspace(0.0, t_end, n + 1)
    sol = CumulantSolution(times, values, S, t_end / n, n, doublings, change)

    if opts.cross_check:
        # Richardson extrapolation of the trapezoidal grids removes the
        # leading dt^2 error, which otherwise grows like e^t
        per = max(1, math.ceil(opts.picard_points_per_unit * t_end / n))
        coarse_pic, it = picard_cumulant(phi, S, t_end, n * per, q=q, min_iter=opts.picard_min_iterations,
                                         max_iter=opts.picard_max_iterations)
        fine_pic, it2 = picard_cumulant(phi, S, t_end, 2 * n * per, q=q, min_iter=opts.picard_min_iterations,
                                        max_iter=opts.picard_max_iterations)
        pic = (4.0 * fine_pic[::2] - coarse_pic) / 3.0
        it = max(it, it2)
        disc = float(np.max(np.abs(pic[::per] - values)))
        sol.picard_iterations = it
        sol.picard_discrepancy = disc
        if disc > opts.tol:
            raise ToleranceNotMet(f"Picard cross-check differs from RK4 by {disc:.3e} > {opts.tol:.1e}")
    return sol


def branching_expectation(config: Configuration | Iterable[FractalCoord], phi, t: float, S: StateSpace,
                          opts: CumulantOptions | None = None, solution: CumulantSolution | None = None) -> float:
    """Expectation of the multiplicative functional ``prod phi(particle)`` at time ``t``.

    Equals the product of ``h_t`` over the starting particles; the empty
    configuration gives 1.
    """
    coords = config.coords if isinstance(config, Configuration) else tuple(config)
    if solution is None:
        solution = cumulant_solve(phi, t, S, opts)
    h = solution.final
    out = 1.0
    for c in coords:
        out *= float(h[S.index(c)])
    return out
